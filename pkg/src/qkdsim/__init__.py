"""Simulator for an SMZI-based phase-coding decoy-state BB84 link."""
from .channel import ChannelParams, ChannelState
from .protocol import PhaseTracker, PulseBatchRecord, SystemParams

__all__ = ["ChannelParams", "ChannelState", "PhaseTracker", "PulseBatchRecord", "SystemParams"]
__version__ = "0.1.0"
