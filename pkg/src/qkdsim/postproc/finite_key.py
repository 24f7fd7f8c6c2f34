"""Decoy-state bounds and finite-key secure key length.

Vacuum + weak decoy bounds in the concise form of Lim et al. (PRA 89, 022307):
counts per intensity are corrected by Hoeffding deviations and reweighted by
``e^k / p_k``, giving lower bounds on vacuum and single-photon events and an
upper bound on the single-photon phase-error rate. Every concentration term
runs at ``epsilon_sec / 21``.

The deviation is taken per intensity class, ``sqrt(n_k/2 * ln(21/eps))``;
using the total sifted count for every class leaves no key at a 2^20 block.
The single-photon bounds are derived for the whole sifted set and then
apportioned to the signal block by the Poisson weight of the signal class.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .blockstats import BlockStats

if TYPE_CHECKING:
    from ..protocol import SystemParams

EPS_SPLIT = 21


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def hoeffding_deviation(count, epsilon: float):
    """``sqrt(count/2 * ln(1/epsilon))``."""
    return np.sqrt(np.asarray(count, dtype=float) / 2 * math.log(1 / epsilon))


def _gamma(eps: float, rate: float, c: float, d: float) -> float:
    """Random-sampling correction to the phase-error rate."""
    if c <= 0 or d <= 0 or not 0 < rate < 0.5:
        return 0.0
    arg = (c + d) / (c * d * (1 - rate) * rate) * EPS_SPLIT ** 2 / eps ** 2
    return math.sqrt((c + d) * (1 - rate) * rate / (c * d * math.log(2)) * math.log2(arg))


@dataclass(frozen=True)
class DecoyBounds:
    s0: float
    s1: float
    phi1: float
    degenerate: bool = False


def poisson_weight(params: "SystemParams", n: int) -> np.ndarray:
    """``p_k e^{-k} k^n / n!`` per intensity."""
    k = params.k
    return params.p * np.exp(-k) * k ** n / math.factorial(n)


def decoy_bounds(stats: BlockStats, params: "SystemParams", finite: bool = True) -> DecoyBounds:
    """Lower bounds on vacuum/single-photon signal events, upper bound on phi_1.

    ``finite=False`` drops the concentration terms (asymptotic limit).
    """
    mu, nu1, nu2 = params.intensities
    eps = stats.epsilon_sec / EPS_SPLIT
    if finite:
        dn = hoeffding_deviation(stats.n, eps)
        dm = hoeffding_deviation(stats.m, eps)
    else:
        dn = dm = np.zeros(3)
    w = np.exp(params.k) / params.p
    n_lo, n_hi = w * (stats.n - dn), w * (stats.n + dn)
    m_lo, m_hi = w * (stats.m - dm), w * (stats.m + dm)
    tau0 = poisson_weight(params, 0).sum()
    tau1 = poisson_weight(params, 1).sum()

    s0_all = max(0.0, tau0 * (nu1 * n_lo[2] - nu2 * n_hi[1]) / (nu1 - nu2))
    s1_all = tau1 * mu * (n_lo[1] - n_hi[2] - (nu1 ** 2 - nu2 ** 2) / mu ** 2 * (n_hi[0] - s0_all / tau0)) \
        / (mu * (nu1 - nu2) - nu1 ** 2 + nu2 ** 2)
    degenerate = not s1_all > 0
    s1_all = max(0.0, s1_all)

    # share of n-photon events that were signal pulses
    s0 = poisson_weight(params, 0)[0] / tau0 * s0_all
    s1 = poisson_weight(params, 1)[0] / tau1 * s1_all
    s0 = float(np.clip(s0, 0, stats.block_size))
    s1 = float(np.clip(s1, 0, stats.block_size))

    if degenerate:
        return DecoyBounds(s0=s0, s1=0.0, phi1=0.5, degenerate=True)
    v1 = max(0.0, tau1 * (m_hi[1] - m_lo[2]) / (nu1 - nu2))
    rate = min(0.5, v1 / s1_all)
    phi1 = rate + (_gamma(stats.epsilon_sec, rate, s1_all, s1) if finite else 0.0)
    return DecoyBounds(s0=s0, s1=s1, phi1=min(0.5, phi1))


def ec_leak(stats: BlockStats) -> float:
    """Modeled error-correction leakage ``f_EC * n_mu * h2(E_mu)``."""
    return stats.f_ec * stats.n[0] * binary_entropy(stats.qber[0])


def key_length(stats: BlockStats, bounds: DecoyBounds, leak_ec: float | None = None) -> int:
    """Secure bits extractable from the signal block (clamped at zero)."""
    if bounds.degenerate:
        return 0
    leak = ec_leak(stats) if leak_ec is None else leak_ec
    ell = (bounds.s0 + bounds.s1 * (1 - binary_entropy(bounds.phi1)) - leak
           - 6 * math.log2(EPS_SPLIT / stats.epsilon_sec) - math.log2(2 / stats.epsilon_cor))
    return max(0, math.floor(ell))


@dataclass(frozen=True)
class KeyReport:
    s0_lower: float
    s1_lower: float
    phi1_upper: float
    ell: int
    skr: float
    leak_ec: float


def key_report(stats: BlockStats, params: "SystemParams", block_rate: float,
               leak_ec: float | None = None, finite: bool = True) -> KeyReport:
    """Bounds, key length and secure rate for blocks arriving at ``block_rate`` /s."""
    bounds = decoy_bounds(stats, params, finite=finite)
    leak = ec_leak(stats) if leak_ec is None else leak_ec
    ell = key_length(stats, bounds, leak)
    return KeyReport(s0_lower=bounds.s0, s1_lower=bounds.s1, phi1_upper=bounds.phi1,
                     ell=ell, skr=ell * block_rate, leak_ec=leak)


def analytic_block(params: "SystemParams", loss_db: float, **security) -> BlockStats:
    """Expected statistics of one signal block of ``block_size`` sifted bits."""
    from ..protocol import rate_model

    model = rate_model(params, loss_db)
    sent = params.p.copy()
    n = sent * model.q * 0.5
    stats = BlockStats(sent=sent, n=n, m=n * model.e, **security)
    return stats.scaled_to_block()


@dataclass(frozen=True)
class CurvePoint:
    loss_db: float
    sifted_rate: float
    qber: float
    skr: float
    report: KeyReport


def skr_curve(params: "SystemParams", losses, **security) -> list[CurvePoint]:
    """Analytic sifted rate, signal QBER and secure key rate per channel loss."""
    from ..protocol import rate_model, sifted_rate

    out = []
    for loss in losses:
        model = rate_model(params, loss)
        stats = analytic_block(params, loss, **security)
        rate = sifted_rate(params, loss, model)
        report = key_report(stats, params, block_rate=rate / stats.block_size)
        out.append(CurvePoint(loss_db=float(loss), sifted_rate=rate, qber=float(model.e[0]),
                              skr=report.skr, report=report))
    return out
