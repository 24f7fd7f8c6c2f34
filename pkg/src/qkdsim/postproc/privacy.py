"""Toeplitz-hash privacy amplification over GF(2)."""
from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from ..errors import RejectedInput


def toeplitz_entry_index(i, j, out_len: int):
    """Seed index of ``T[i, j]``.

    The first column is ``seed[0:out_len]`` top to bottom and the first row
    continues with ``seed[out_len:]`` left to right.
    """
    d = np.asarray(j) - np.asarray(i)
    return np.where(d <= 0, -d, out_len - 1 + d)


def toeplitz_hash(key, seed_bits, out_len: int) -> np.ndarray:
    """``T . key`` over GF(2) for the Toeplitz matrix defined by ``seed_bits``."""
    key = np.asarray(key, dtype=np.uint8)
    seed_bits = np.asarray(seed_bits, dtype=np.uint8)
    n = len(key)
    if not 0 <= out_len <= n:
        raise RejectedInput("out_len must lie in [0, len(key)]")
    if len(seed_bits) != n + out_len - 1 and out_len > 0:
        raise RejectedInput(f"seed must hold len(key) + out_len - 1 = {n + out_len - 1} bits")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    # u[d + out_len - 1] = t(d) for diagonal offset d = j - i
    u = np.concatenate([seed_bits[:out_len][::-1], seed_bits[out_len:]]).astype(float)
    # out[i] = sum_j u[j - i + out_len - 1] key[j]  (a correlation)
    corr = fftconvolve(u, key[::-1].astype(float), mode="valid")
    counts = np.rint(corr).astype(np.int64)
    return (counts[::-1] & 1).astype(np.uint8)
