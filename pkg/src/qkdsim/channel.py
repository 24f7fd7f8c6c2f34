"""Disturbed fiber channel: fixed loss, scrambled polarization, phase drift.

The polarization scrambler is modeled as an isotropic SU(2) random walk: each
step applies ``exp(-i (delta/2) n.sigma)`` with ``n`` uniform on the sphere and
``delta`` half-normal with scale ``scramble_rate * dt``. The interferometric
phase offset between Alice's and Bob's AMZIs follows a Wiener process.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInput

#: Steps between re-orthonormalizations of the accumulated unitary.
RENORM_EVERY = 10_000


def wrap_phase(x):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)


@dataclass(frozen=True)
class ChannelParams:
    loss_db: float = 12.6
    scramble_rate: float = 2.0  # rad/s
    phase_drift_sigma: float = 0.05  # rad/sqrt(s)
    seed: int = 0

    def __post_init__(self):
        if self.loss_db < 0:
            raise RejectedInput("loss_db must be >= 0")
        if self.scramble_rate < 0:
            raise RejectedInput("scramble_rate must be >= 0")
        if self.phase_drift_sigma < 0:
            raise RejectedInput("phase_drift_sigma must be >= 0")


@dataclass(frozen=True)
class ChannelState:
    unitary: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    phase_offset: float = 0.0
    time: float = 0.0
    steps: int = 0


def su2_step(direction: np.ndarray, angle: float) -> np.ndarray:
    """``exp(-i (angle/2) n.sigma)`` for a unit 3-vector ``n``."""
    nx, ny, nz = direction
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c - 1j * s * nz, -1j * s * (nx - 1j * ny)],
                     [-1j * s * (nx + 1j * ny), c + 1j * s * nz]])


def reorthonormalize(u: np.ndarray) -> np.ndarray:
    """Project onto SU(2) using the first column."""
    a, b = u[0, 0], u[1, 0]
    n = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
    a, b = a / n, b / n
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]])


def _draws_to_step(g: np.ndarray, params: ChannelParams, dt: float):
    norm = np.linalg.norm(g[:3])
    direction = g[:3] / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
    angle = abs(g[3]) * params.scramble_rate * dt
    dphi = g[4] * params.phase_drift_sigma * np.sqrt(dt)
    return direction, angle, dphi


def advance(state: ChannelState, params: ChannelParams, dt: float,
            rng: np.random.Generator) -> ChannelState:
    """One step of the scrambler and drift processes.

    Consumes exactly five standard normals from ``rng`` per call, so a fixed
    seed and step sequence reproduce the trajectory bit for bit.
    """
    if dt <= 0:
        raise RejectedInput("dt must be positive")
    g = rng.standard_normal(5)
    direction, angle, dphi = _draws_to_step(g, params, dt)
    u = state.unitary
    if angle != 0.0:
        u = su2_step(direction, angle) @ u
    steps = state.steps + 1
    if steps % RENORM_EVERY == 0:
        u = reorthonormalize(u)
    phase = float(wrap_phase(state.phase_offset + dphi)) if dphi != 0.0 else state.phase_offset
    return ChannelState(unitary=u, phase_offset=phase, time=state.time + dt, steps=steps)


def trajectory(state: ChannelState, params: ChannelParams, dt: float, n_steps: int,
               rng: np.random.Generator, record: bool = True):
    """Advance ``n_steps`` times; identical to repeated :func:`advance` calls.

    Returns ``(final_state, unitaries, phase_offsets)`` where the arrays hold
    the state *after* each step (``None`` when ``record`` is false). The
    composition runs on scalar complex numbers, which is much faster than
    2x2 array products for long trajectories.
    """
    if dt <= 0:
        raise RejectedInput("dt must be positive")
    g = rng.standard_normal((n_steps, 5))
    norms = np.linalg.norm(g[:, :3], axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    dirs = np.where(norms[:, None] > 0, g[:, :3] / safe[:, None], [0.0, 0.0, 1.0])
    angles = np.abs(g[:, 3]) * params.scramble_rate * dt
    dphis = g[:, 4] * params.phase_drift_sigma * np.sqrt(dt)
    c = np.cos(angles / 2)
    s = np.sin(angles / 2)
    # step matrix [[p, q], [r, t]]
    p_ = (c - 1j * s * dirs[:, 2]).tolist()
    q_ = (-1j * s * (dirs[:, 0] - 1j * dirs[:, 1])).tolist()
    r_ = (-1j * s * (dirs[:, 0] + 1j * dirs[:, 1])).tolist()
    t_ = (c + 1j * s * dirs[:, 2]).tolist()
    moving = (angles != 0.0).tolist()
    u00, u01 = complex(state.unitary[0, 0]), complex(state.unitary[0, 1])
    u10, u11 = complex(state.unitary[1, 0]), complex(state.unitary[1, 1])
    steps = state.steps
    phase = state.phase_offset
    us = np.empty((n_steps, 2, 2), dtype=complex) if record else None
    phases = np.empty(n_steps) if record else None
    dphis_l = dphis.tolist()
    two_pi = 2 * np.pi
    for i in range(n_steps):
        if moving[i]:
            p, q, r, t = p_[i], q_[i], r_[i], t_[i]
            u00, u01, u10, u11 = (p * u00 + q * u10, p * u01 + q * u11,
                                  r * u00 + t * u10, r * u01 + t * u11)
        steps += 1
        if steps % RENORM_EVERY == 0:
            m = reorthonormalize(np.array([[u00, u01], [u10, u11]]))
            u00, u01, u10, u11 = complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1])
        if dphis_l[i] != 0.0:
            phase = np.pi - (np.pi - (phase + dphis_l[i])) % two_pi
        if record:
            us[i] = ((u00, u01), (u10, u11))
            phases[i] = phase
    final = ChannelState(unitary=np.array([[u00, u01], [u10, u11]]), phase_offset=float(phase),
                         time=state.time + n_steps * dt, steps=steps)
    return final, us, phases


def apply_polarization(state: ChannelState, e_in) -> np.ndarray:
    """Polarization state reaching Bob: ``U . e_in``."""
    return np.matmul(state.unitary, np.asarray(e_in, dtype=complex)[..., None])[..., 0]


def transmittance(params: ChannelParams) -> float:
    """Channel power transmission ``10^(-loss_db/10)``."""
    return 10 ** (-0.1 * params.loss_db)
