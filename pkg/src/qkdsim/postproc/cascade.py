"""Cascade error correction with hash verification.

Each pass shuffles the key (pass one keeps the natural order), splits it into
blocks, discloses Alice's block parities and bisects every odd block down to
one error. After a pass, the cascade step re-checks all earlier passes: a bit
flipped in one pass toggles the parity of exactly one block in each earlier
pass, and those blocks are bisected again until every known parity matches.

Blocks within one pass are disjoint, so all odd blocks of a pass are bisected
in lockstep with prefix-parity arrays; that keeps a 2^20-bit block well under a
second.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CorrectionFailure, RejectedInput
from .finite_key import binary_entropy

HASH_PRIME = (1 << 64) - 59
HASH_BITS = 64
MIN_KEY_BITS = 1024


def poly_hash(bits: np.ndarray, point: int) -> int:
    """Polynomial hash of 32-bit words over GF(2^64 - 59), evaluated at ``point``."""
    padded = np.zeros(-(-len(bits) // 32) * 32, dtype=np.uint8)
    padded[: len(bits)] = bits
    words = np.packbits(padded).view(">u4").astype(np.uint64).tolist()
    h = len(bits)
    for w in words:
        h = (h * point + w) % HASH_PRIME
    return h


@dataclass
class _Pass:
    perm: np.ndarray | None
    starts: np.ndarray
    ends: np.ndarray
    pref_a: np.ndarray
    parity_a: np.ndarray

    def permuted(self, x: np.ndarray) -> np.ndarray:
        return x if self.perm is None else x[self.perm]

    def to_index(self, pos: np.ndarray) -> np.ndarray:
        return pos if self.perm is None else self.perm[pos]


def _prefix(x: np.ndarray) -> np.ndarray:
    out = np.zeros(len(x) + 1, dtype=np.uint8)
    np.bitwise_xor.accumulate(x, out=out[1:])
    return out


class Cascade:
    """Interactive reconciliation of Bob's key against Alice's.

    ``leak`` accumulates every parity Alice discloses plus the verification
    hashes; ``passes`` counts passes run.
    """

    def __init__(self, key_a, key_b, qber_estimate: float, seed: int = 0):
        self.a = np.asarray(key_a, dtype=np.uint8)
        self.b = np.asarray(key_b, dtype=np.uint8).copy()
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise RejectedInput("keys must be 1-D and of equal length")
        if len(self.a) < MIN_KEY_BITS:
            raise RejectedInput(f"keys must hold at least {MIN_KEY_BITS} bits")
        if not 0 < qber_estimate <= 0.25:
            raise RejectedInput("qber_estimate must lie in (0, 0.25]")
        self.n = len(self.a)
        self.k1 = math.ceil(0.73 / qber_estimate)
        self.rng = np.random.default_rng(seed)
        self.leak = 0
        self.passes: list[_Pass] = []

    def _new_pass(self) -> _Pass:
        i = len(self.passes)
        perm = None if i == 0 else self.rng.permutation(self.n)
        size = min(self.n, self.k1 << i)
        starts = np.arange(0, self.n, size)
        ends = np.minimum(starts + size, self.n)
        a = self.a if perm is None else self.a[perm]
        pref_a = _prefix(a)
        p = _Pass(perm, starts, ends, pref_a, pref_a[ends] ^ pref_a[starts])
        self.leak += len(starts)
        return p

    def _bisect(self, p: _Pass, blocks: np.ndarray) -> None:
        """Locate and flip one error in each odd block of pass ``p``."""
        pref_b = _prefix(p.permuted(self.b))
        lo, hi = p.starts[blocks].copy(), p.ends[blocks].copy()
        active = hi - lo > 1
        while active.any():
            idx = np.nonzero(active)[0]
            l, h = lo[idx], hi[idx]
            mid = (l + h) // 2
            self.leak += len(idx)
            left_odd = (p.pref_a[mid] ^ p.pref_a[l]) != (pref_b[mid] ^ pref_b[l])
            hi[idx] = np.where(left_odd, mid, h)
            lo[idx] = np.where(left_odd, l, mid)
            active[idx] = hi[idx] - lo[idx] > 1
        self.b[p.to_index(lo)] ^= 1

    def _odd_blocks(self, p: _Pass) -> np.ndarray:
        pref_b = _prefix(p.permuted(self.b))
        return np.nonzero((pref_b[p.ends] ^ pref_b[p.starts]) != p.parity_a)[0]

    def run_pass(self) -> None:
        self.passes.append(self._new_pass())
        dirty = True
        while dirty:
            dirty = False
            for p in reversed(self.passes):
                odd = self._odd_blocks(p)
                if len(odd):
                    self._bisect(p, odd)
                    dirty = True

    def verify(self, point: int) -> bool:
        self.leak += HASH_BITS
        return poly_hash(self.a, point) == poly_hash(self.b, point)


def cascade_correct(key_a, key_b, qber_estimate: float, seed: int = 0,
                    passes: int = 4, max_passes: int = 16) -> tuple[np.ndarray, int]:
    """Reconcile ``key_b`` to ``key_a``; returns ``(corrected_b, leak_bits)``.

    Runs ``passes`` passes, then checks a 64-bit hash. On a mismatch further
    passes run, each followed by a fresh hash, up to ``max_passes``; if the
    hash still differs the block is rejected with :class:`CorrectionFailure`.
    """
    c = Cascade(key_a, key_b, qber_estimate, seed)
    points = np.random.default_rng([seed, 0x5EED]).integers(2, HASH_PRIME - 1, size=max_passes,
                                                             dtype=np.uint64)
    for i in range(max_passes):
        c.run_pass()
        if i + 1 < passes:
            continue
        if c.verify(int(points[i])):
            return c.b, c.leak
    raise CorrectionFailure(f"verification failed after {max_passes} passes")


def efficiency(leak_bits: int, n: int, qber: float) -> float:
    """Reconciliation efficiency ``leak / (n h2(qber))``."""
    return leak_bits / (n * binary_entropy(qber))
