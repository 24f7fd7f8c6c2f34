"""Jones-calculus model of the Sagnac--Mach-Zehnder (SMZI) receiver.

Vectors are complex arrays with a trailing axis of length 2 (``[h, v]``) and
matrices carry two trailing axes of length 2, so every function here also
accepts a batch of states or phases and broadcasts over the leading axes.
Losses of the elements and the PMF segments are ignored; the PMF Jones matrix
is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RejectedInput, UndefinedVisibility

#: Tolerance used for algebraic identities (about 40 roundings per chain).
ALGEBRA_TOL = 1e-12

_I2 = np.eye(2, dtype=complex)
_SQRT2 = np.sqrt(2.0)
_PORT_PAIRS = {(1, 2), (2, 1), (1, 3), (3, 1)}


def jones_vector(theta, beta=0.0) -> np.ndarray:
    """Normalized input state ``(cos theta, e^{i beta} sin theta)``.

    ``theta`` is the angle to horizontal polarization and ``beta`` the phase
    delay between the horizontal and vertical components, both in radians.
    """
    theta = np.asarray(theta, dtype=float)
    beta = np.asarray(beta, dtype=float)
    h = np.cos(theta) + 0j
    v = np.exp(1j * beta) * np.sin(theta)
    h, v = np.broadcast_arrays(h, v)
    return np.stack([h, v], axis=-1)


def polarization_angles(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`jones_vector` up to a global phase."""
    e = np.asarray(e)
    h, v = e[..., 0], e[..., 1]
    theta = np.arctan2(np.abs(v), np.abs(h))
    beta = np.angle(v) - np.angle(h)
    return theta, np.mod(beta, 2 * np.pi)


def rotation_matrix() -> np.ndarray:
    """90-degree PMF axis rotation on the port-3 side of each PBS.

    Forward and backward propagation share the same matrix.
    """
    return np.array([[0, -1], [1, 0]], dtype=complex)


def element_matrix(kind: str, index: int, in_port: int, out_port: int) -> np.ndarray:
    """Jones matrix of the ``index``-th BS or PBS from ``in_port`` to ``out_port``.

    All beam splitters (and all PBSs) are identical, so ``index`` only labels
    the element in a composition.
    """
    if (in_port, out_port) not in _PORT_PAIRS:
        raise RejectedInput(f"invalid port pair ({in_port}, {out_port})")
    if index < 1:
        raise RejectedInput(f"element index must be >= 1, got {index}")
    through = 2 in (in_port, out_port)
    kind = kind.upper()
    if kind == "BS":
        return _I2 / _SQRT2 if through else 1j * _I2 / _SQRT2
    if kind == "PBS":
        # port 2 transmits horizontal, port 3 reflects vertical
        return np.diag([1, 0]).astype(complex) if through else np.diag([0, 1]).astype(complex)
    raise RejectedInput(f"unknown element kind {kind!r}")


def _phase_modulator(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return np.exp(1j * phi)[..., None, None] * _I2


def _chain(*mats) -> np.ndarray:
    """Matrix product in the written (left-to-right) order."""
    out = mats[0]
    for m in mats[1:]:
        out = np.matmul(out, m)
    return out


def smzi_path_transforms(phi_b, output: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Long- and short-arm transfer matrices of the SMZI, CW plus CCW.

    Built by composing element matrices, so the composition is what gets
    checked against the closed forms ``T_L = -(e^{i phi_b}/2) R`` and
    ``T_S = R/2`` (output 1). For ``output=2`` the arms exit the AMZI through
    the other coupler port towards PBS2 and both pick up a factor ``i/2``.
    """
    B = lambda n, j, k: element_matrix("BS", n, j, k)  # noqa: E731
    P = lambda n, j, k: element_matrix("PBS", n, j, k)  # noqa: E731
    R = rotation_matrix()
    pm = _phase_modulator(phi_b)
    if output == 1:
        t_long = (_chain(P(1, 3, 1), R, B(2, 3, 1), pm, B(1, 1, 3), P(1, 1, 2))
                  + _chain(P(1, 2, 1), B(1, 3, 1), pm, B(2, 1, 3), R, P(1, 1, 3)))
        t_short = (_chain(P(1, 3, 1), R, B(2, 2, 1), B(1, 1, 2), P(1, 1, 2))
                   + _chain(P(1, 2, 1), B(1, 2, 1), B(2, 1, 2), R, P(1, 1, 3)))
    elif output == 2:
        t_long = (_chain(P(2, 3, 1), R, B(2, 2, 1), pm, B(1, 1, 3), P(1, 1, 2))
                  + _chain(P(2, 2, 1), B(1, 2, 1), pm, B(2, 1, 3), R, P(1, 1, 3)))
        t_short = (_chain(P(2, 3, 1), R, B(2, 3, 1), B(1, 1, 2), P(1, 1, 2))
                   + _chain(P(2, 2, 1), B(1, 3, 1), B(2, 1, 2), R, P(1, 1, 3)))
    else:
        raise RejectedInput(f"SMZI has outputs 1 and 2, got {output}")
    return t_long, np.broadcast_to(t_short, t_long.shape)


@dataclass(frozen=True)
class PhaseSettings:
    """Phases of Alice's and Bob's modulators (radians).

    ``phi_b`` may be set directly or derived from Bob's drive voltage through
    :meth:`from_voltage`. Fields may be arrays for batched evaluation.
    """

    phi_a: float | np.ndarray = 0.0
    phi_b: float | np.ndarray = 0.0
    v_pi: float = 2.5
    voltage: float | np.ndarray | None = None

    @classmethod
    def from_voltage(cls, phi_a, voltage, v_pi: float = 2.5) -> "PhaseSettings":
        if v_pi <= 0:
            raise RejectedInput("v_pi must be positive")
        phi_b = np.mod(np.pi * np.asarray(voltage, dtype=float) / v_pi, 2 * np.pi)
        return cls(phi_a=phi_a, phi_b=phi_b, v_pi=v_pi, voltage=voltage)


def _check_unit(e: np.ndarray) -> None:
    norm2 = np.sum(np.abs(e) ** 2, axis=-1)
    if not np.all(np.abs(norm2 - 1.0) <= ALGEBRA_TOL):
        raise RejectedInput("input Jones vector must have unit norm")


def smzi_outputs(e_in, phases: PhaseSettings) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized output amplitudes at PBS1 (SPD1) and PBS2 (SPD2)."""
    e_in = np.asarray(e_in, dtype=complex)
    _check_unit(e_in)
    phase_a = np.exp(1j * np.asarray(phases.phi_a, dtype=float))[..., None, None]
    outs = []
    for port in (1, 2):
        t_long, t_short = smzi_path_transforms(phases.phi_b, output=port)
        t = t_long + phase_a * t_short
        outs.append(np.matmul(t, e_in[..., None])[..., 0])
    return outs[0], outs[1]


def intensity(e: np.ndarray) -> np.ndarray:
    """``E^dagger E`` along the trailing axis."""
    return np.sum(np.abs(np.asarray(e)) ** 2, axis=-1)


def detection_probabilities(phases: PhaseSettings) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form fringe: ``(1 -/+ cos(phi_a - phi_b)) / 2`` at SPD1 / SPD2."""
    c = np.cos(np.asarray(phases.phi_a, dtype=float) - np.asarray(phases.phi_b, dtype=float))
    return 0.5 * (1 - c), 0.5 * (1 + c)


def visibility(counts) -> float:
    """Fringe visibility ``(C_max - C_min) / (C_max + C_min)``."""
    c = np.asarray(counts, dtype=float)
    if c.size < 2:
        raise RejectedInput("visibility needs at least two samples")
    if np.any(c < 0):
        raise RejectedInput("counts must be non-negative")
    hi, lo = c.max(), c.min()
    if hi + lo <= 0:
        raise UndefinedVisibility("all counts are zero")
    return float((hi - lo) / (hi + lo))
