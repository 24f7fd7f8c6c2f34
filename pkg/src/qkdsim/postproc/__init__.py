"""Classical post-processing: reconciliation, privacy amplification, key length."""
from .blockstats import BlockStats
from .cascade import cascade_correct, efficiency
from .finite_key import (CurvePoint, DecoyBounds, KeyReport, binary_entropy, decoy_bounds,
                         key_length, key_report, skr_curve)
from .privacy import toeplitz_hash

__all__ = ["BlockStats", "CurvePoint", "DecoyBounds", "KeyReport", "binary_entropy",
           "cascade_correct", "decoy_bounds", "efficiency", "key_length", "key_report",
           "skr_curve", "toeplitz_hash"]
