"""Sifted-block statistics shared by sifting and key-length estimation."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import RejectedInput


@dataclass(frozen=True)
class BlockStats:
    """Per-intensity counts (index order: signal, weak decoy, vacuum).

    Counts are floats so analytic, block-size-scaled statistics and integer
    Monte Carlo tallies share one type.
    """

    sent: np.ndarray
    n: np.ndarray
    m: np.ndarray
    block_size: int = 2 ** 20
    epsilon_sec: float = 1e-10
    epsilon_cor: float = 1e-15
    f_ec: float = 1.14

    def __post_init__(self):
        for name in ("sent", "n", "m"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.m > self.n) or np.any(self.n < 0) or np.any(self.m < 0):
            raise RejectedInput("need 0 <= m_k <= n_k")
        if not (0 < self.epsilon_sec < 1 and 0 < self.epsilon_cor < 1):
            raise RejectedInput("epsilon_sec and epsilon_cor must lie in (0, 1)")
        if self.f_ec < 1:
            raise RejectedInput("f_ec must be >= 1")

    @property
    def qber(self) -> np.ndarray:
        return np.divide(self.m, self.n, out=np.zeros(3), where=self.n > 0)

    def scaled(self, factor: float) -> "BlockStats":
        return replace(self, sent=self.sent * factor, n=self.n * factor, m=self.m * factor)

    def scaled_to_block(self) -> "BlockStats":
        """Rescale so the signal sifted count equals ``block_size``."""
        if self.n[0] <= 0:
            raise RejectedInput("no signal detections to scale")
        return self.scaled(self.block_size / self.n[0])
