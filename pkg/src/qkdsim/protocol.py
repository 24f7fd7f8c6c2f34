"""Decoy-state BB84 source and detector statistics.

Three layers live here:

* the analytic gain/error model (``gain_no_afterpulse``, ``rate_model``),
* a Monte Carlo engine that samples aggregated detection tallies per
  (intensity, Alice basis, Alice bit, Bob basis) cell, driving the SMZI
  fringe through the Jones model and a live channel trajectory,
* basis sifting and the mismatched-basis phase tracker.

Phase alphabet: Alice uses ``phi_a = basis*pi/2 + bit*pi`` and Bob
``phi_b = basis*pi/2``. With matched bases, bit 0 lands on SPD2 and bit 1 on
SPD1, so Bob reads a click on SPD1 as 1.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as ch
from .errors import RejectedInput, UndefinedErrorRate
from .jones import PhaseSettings, intensity, smzi_outputs
from .postproc.blockstats import BlockStats

INTENSITY_NAMES = ("mu", "nu1", "nu2")
#: Pulses sharing one channel state in :func:`simulate_block`.
PULSES_PER_CHANNEL_STEP = 10_000
#: Channel steps per independently seeded sub-block.
STEPS_PER_SUBBLOCK = 1_000

# Outcome axis of the cell probabilities.
NONE, SPD1, SPD2, BOTH = range(4)
CELL_SHAPE = (3, 2, 2, 2)  # intensity, alice basis, alice bit, bob basis


@dataclass(frozen=True)
class SystemParams:
    """Physical and protocol constants of the link (defaults: 40 MHz system)."""

    rep_rate: float = 40e6
    intensities: tuple[float, float, float] = (0.6, 0.1, 0.0)
    probabilities: tuple[float, float, float] = (29 / 32, 2 / 32, 1 / 32)
    eta_d: float = 0.10
    p_dc: float = 3.5e-6  # per gate, summed over both detectors
    p_ap: float = 0.005
    receiver_loss_db: float = 5.95
    e_mis: float = 0.005606  # calibrated against the 10 dB QBER
    duty_factor: float = 0.7902  # calibrated against the 10 dB sifted rate
    fringe_visibility: float = 0.9921  # intrinsic SMZI contrast (scan only)

    def __post_init__(self):
        mu, nu1, nu2 = self.intensities
        if not (mu > nu1 > nu2 == 0):
            raise RejectedInput("intensities must satisfy mu > nu1 > nu2 = 0")
        p = self.probabilities
        if any(not 0 <= x <= 1 for x in p) or abs(sum(p) - 1) > 1e-12:
            raise RejectedInput("intensity probabilities must lie in [0,1] and sum to 1")
        for name in ("eta_d", "p_dc", "p_ap", "e_mis", "fringe_visibility"):
            if not 0 <= getattr(self, name) <= 1:
                raise RejectedInput(f"{name} must lie in [0, 1]")
        if not 0 < self.duty_factor <= 1:
            raise RejectedInput("duty_factor must lie in (0, 1]")
        if self.rep_rate <= 0 or self.receiver_loss_db < 0:
            raise RejectedInput("rep_rate must be positive and receiver_loss_db >= 0")

    @property
    def k(self) -> np.ndarray:
        return np.asarray(self.intensities, dtype=float)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.probabilities, dtype=float)


@dataclass(frozen=True)
class RateModel:
    eta: float
    q0: np.ndarray
    q: np.ndarray
    q_t: float
    e: np.ndarray


def overall_efficiency(params: SystemParams, channel_loss_db: float) -> float:
    """Transmission times detection efficiency between Alice and Bob."""
    return 10 ** (-0.1 * (channel_loss_db + params.receiver_loss_db)) * params.eta_d


def gain_no_afterpulse(k, eta: float, p_dc: float):
    if np.any(np.asarray(k) < 0):
        raise RejectedInput("mean photon number must be >= 0")
    return 1 - (1 - p_dc) * np.exp(-np.asarray(k, dtype=float) * eta)


def rate_model(params: SystemParams, channel_loss_db: float) -> RateModel:
    """Gains and error rates per intensity, with after-pulses."""
    eta = overall_efficiency(params, channel_loss_db)
    k = params.k
    q0 = gain_no_afterpulse(k, eta, params.p_dc)
    q_t = float(np.dot(params.p, q0))
    q = q_t * params.p_ap + q0
    if np.any(q <= 0):
        raise UndefinedErrorRate("zero gain: error rate undefined")
    e = (0.5 * params.p_dc + params.e_mis * (1 - np.exp(-k * eta)) + 0.5 * q_t * params.p_ap) / q
    return RateModel(eta=eta, q0=q0, q=q, q_t=q_t, e=e)


def sifted_rate(params: SystemParams, channel_loss_db: float, model: RateModel | None = None) -> float:
    """Signal-state sifted key rate in bits/s."""
    model = model or rate_model(params, channel_loss_db)
    return params.rep_rate * params.probabilities[0] * model.q[0] * 0.5 * params.duty_factor


def calibrate_e_mis(params: SystemParams, channel_loss_db: float, qber: float) -> float:
    """Misalignment error that reproduces a measured signal QBER.

    ``E_mu`` is affine in ``e_mis``, so the inversion is closed form.
    """
    m = rate_model(replace(params, e_mis=0.0), channel_loss_db)
    signal = 1 - math.exp(-params.intensities[0] * m.eta)
    return float((qber * m.q[0] - 0.5 * params.p_dc - 0.5 * m.q_t * params.p_ap) / signal)


def calibrate_duty_factor(params: SystemParams, channel_loss_db: float, rate_bps: float) -> float:
    """Throughput factor that reproduces a measured sifted rate."""
    unit = sifted_rate(replace(params, duty_factor=1.0), channel_loss_db)
    return rate_bps / unit


# --- Monte Carlo ---------------------------------------------------------

def bb84_phases() -> tuple[np.ndarray, np.ndarray]:
    """``(phi_a, phi_b)`` broadcast over (alice basis, alice bit, bob basis)."""
    a_basis = np.arange(2)[:, None, None]
    a_bit = np.arange(2)[None, :, None]
    b_basis = np.arange(2)[None, None, :]
    phi_a = a_basis * np.pi / 2 + a_bit * np.pi
    phi_b = b_basis * np.pi / 2 + 0.0 * phi_a
    return np.broadcast_to(phi_a, (2, 2, 2)).astype(float), phi_b


def fringe_fractions(phase_error, unitary=None) -> np.ndarray:
    """Fraction of Bob's detected signal that reaches SPD1, per cell.

    ``phase_error`` (shape ``(B,)``) is the residual interferometric offset
    added to ``phi_a - phi_b``; ``unitary`` (``(B, 2, 2)``) is the channel
    polarization seen by the SMZI. Returns shape ``(B, 2, 2, 2)``.
    """
    phase_error = np.atleast_1d(np.asarray(phase_error, dtype=float))
    b = phase_error.shape[0]
    if unitary is None:
        unitary = np.broadcast_to(np.eye(2, dtype=complex), (b, 2, 2))
    e_in = np.asarray(unitary)[:, :, 0]  # U applied to Alice's horizontal PMF mode
    e_in = e_in / np.linalg.norm(e_in, axis=-1, keepdims=True)
    phi_a, phi_b = bb84_phases()
    phases = PhaseSettings(phi_a=phi_a[None] + phase_error[:, None, None, None],
                           phi_b=np.broadcast_to(phi_b, (2, 2, 2))[None])
    out1, out2 = smzi_outputs(e_in[:, None, None, None, :], phases)
    i1, i2 = intensity(out1), intensity(out2)
    return i1 / (i1 + i2)


def outcome_probabilities(params: SystemParams, model: RateModel, frac1: np.ndarray,
                          contrast_error: float | None = None, afterpulse: float | None = None) -> np.ndarray:
    """Probabilities of (no click, SPD1 only, SPD2 only, both) per cell.

    ``frac1`` has shape ``(B, 2, 2, 2)``; the result ``(B, 3, 2, 2, 2, 4)``.
    Photon detection is Poisson thinning with mean ``k * eta`` split between
    the detectors by the fringe, after a phase-independent wrong-detector
    probability ``contrast_error`` (``e_mis`` by default). Dark counts and
    after-pulses are independent per-gate additive clicks, half per detector.
    """
    e = params.e_mis if contrast_error is None else contrast_error
    ap = model.q_t * params.p_ap if afterpulse is None else afterpulse
    f1 = e + (1 - 2 * e) * frac1
    f1 = f1[:, None]
    x = params.k[None, :, None, None, None] * model.eta
    background = (1 - 0.5 * params.p_dc) * (1 - 0.5 * ap)
    n1 = np.exp(-x * f1) * background
    n2 = np.exp(-x * (1 - f1)) * background
    probs = np.stack([n1 * n2, (1 - n1) * n2, n1 * (1 - n2), (1 - n1) * (1 - n2)], axis=-1)
    return np.clip(probs, 0.0, 1.0)


@dataclass
class PulseBatchRecord:
    """Aggregated tallies indexed by (intensity, alice basis, alice bit, bob basis)."""

    sent: np.ndarray = field(default_factory=lambda: np.zeros(CELL_SHAPE, dtype=np.int64))
    spd1: np.ndarray = field(default_factory=lambda: np.zeros(CELL_SHAPE, dtype=np.int64))
    spd2: np.ndarray = field(default_factory=lambda: np.zeros(CELL_SHAPE, dtype=np.int64))
    double: np.ndarray = field(default_factory=lambda: np.zeros(CELL_SHAPE, dtype=np.int64))

    def __add__(self, other: "PulseBatchRecord") -> "PulseBatchRecord":
        return PulseBatchRecord(self.sent + other.sent, self.spd1 + other.spd1,
                                self.spd2 + other.spd2, self.double + other.double)

    @property
    def detections(self) -> np.ndarray:
        return self.spd1 + self.spd2 + self.double

    def gains(self) -> np.ndarray:
        """Empirical detection probability per intensity class."""
        sent = self.sent.sum(axis=(1, 2, 3))
        return self.detections.sum(axis=(1, 2, 3)) / np.maximum(sent, 1)

    def __eq__(self, other):
        if not isinstance(other, PulseBatchRecord):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("sent", "spd1", "spd2", "double"))


def sample_cells(rng: np.random.Generator, params: SystemParams, n_pulses: np.ndarray,
                 probs: np.ndarray) -> PulseBatchRecord:
    """Draw one record summed over ``B`` batches of ``n_pulses[b]`` pulses."""
    cell_p = np.broadcast_to((params.p / 8)[:, None, None, None], CELL_SHAPE).ravel()
    sent = rng.multinomial(np.asarray(n_pulses, dtype=np.int64), cell_p)  # (B, 24)
    outcomes = rng.multinomial(sent, probs.reshape(sent.shape + (4,)))
    outcomes = outcomes.reshape(probs.shape).sum(axis=0)
    return PulseBatchRecord(sent=sent.sum(axis=0).reshape(CELL_SHAPE),
                            spd1=outcomes[..., SPD1], spd2=outcomes[..., SPD2],
                            double=outcomes[..., BOTH])


def _subblock(params, model, frac1, sizes, seed_seq):
    rng = np.random.default_rng(seed_seq)
    probs = outcome_probabilities(params, model, frac1)
    return sample_cells(rng, params, sizes, probs)


def simulate_block(params: SystemParams, channel: ch.ChannelParams, n_pulses: int, seed: int,
                   phase_correction: float = 0.0, workers: int = 1,
                   state: ch.ChannelState | None = None) -> PulseBatchRecord:
    """Monte Carlo tallies for ``n_pulses`` pulses through the channel.

    The channel advances once per :data:`PULSES_PER_CHANNEL_STEP` pulses. The
    pulse stream is partitioned into sub-blocks with spawned seeds, so the
    result does not depend on ``workers``. ``phase_correction`` is subtracted
    from the channel phase offset (Bob's tracked compensation).
    """
    if n_pulses <= 0:
        raise RejectedInput("n_pulses must be positive")
    model = rate_model(params, channel.loss_db)
    n_steps = -(-n_pulses // PULSES_PER_CHANNEL_STEP)
    sizes = np.full(n_steps, PULSES_PER_CHANNEL_STEP, dtype=np.int64)
    sizes[-1] = n_pulses - PULSES_PER_CHANNEL_STEP * (n_steps - 1)
    root = np.random.SeedSequence([seed, channel.seed])
    chan_seq, pulse_seq = root.spawn(2)
    dt = PULSES_PER_CHANNEL_STEP / params.rep_rate
    state = state or ch.ChannelState()
    _, unitaries, offsets = ch.trajectory(state, channel, dt, n_steps, np.random.default_rng(chan_seq))
    frac1 = fringe_fractions(offsets - phase_correction, unitaries)
    bounds = list(range(0, n_steps, STEPS_PER_SUBBLOCK)) + [n_steps]
    seqs = pulse_seq.spawn(len(bounds) - 1)
    jobs = [(params, model, frac1[a:b], sizes[a:b], s) for a, b, s in zip(bounds[:-1], bounds[1:], seqs)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda j: _subblock(*j), jobs))
    else:
        parts = [_subblock(*j) for j in jobs]
    record = parts[0]
    for part in parts[1:]:
        record = record + part
    return record


def sift(record: PulseBatchRecord, rng: np.random.Generator | int | None = 0,
         block_size: int = 2 ** 20, **security) -> BlockStats:
    """Matched-basis detections ``n_k`` and bit errors ``m_k`` per intensity.

    Double clicks are assigned a uniformly random bit (one binomial draw per
    cell), so half of them count as errors in expectation.
    """
    rng = np.random.default_rng(rng)
    matched = np.zeros(CELL_SHAPE, dtype=bool)
    matched[:, 0, :, 0] = True
    matched[:, 1, :, 1] = True
    bit1 = np.zeros(CELL_SHAPE, dtype=bool)
    bit1[:, :, 1, :] = True
    # Bob reads 1 on SPD1; errors are clicks on the detector of the other bit.
    wrong = np.where(bit1, record.spd2, record.spd1)
    double_err = rng.binomial(record.double, 0.5)
    n = np.where(matched, record.detections, 0).sum(axis=(1, 2, 3))
    m = np.where(matched, wrong + double_err, 0).sum(axis=(1, 2, 3))
    sent = record.sent.sum(axis=(1, 2, 3))
    return BlockStats(sent=sent.astype(float), n=n.astype(float), m=m.astype(float),
                      block_size=block_size, **security)


# --- phase tracking ------------------------------------------------------

@dataclass(frozen=True)
class PhaseTracker:
    estimated_offset: float = 0.0
    window: int = 4000  # mismatched-basis detections per update
    gain: float = 1.0


def mismatched_counts(record: PulseBatchRecord) -> tuple[int, int]:
    """Mismatched-basis singles, oriented so drift ``+d`` gives ``C1 > C2``.

    For ``phi_a - phi_b = +pi/2`` the SPD1 probability is ``(1 + sin d)/2``;
    for ``-pi/2`` it is ``(1 - sin d)/2``, so those cells swap detectors.
    """
    phi_a, phi_b = bb84_phases()
    sign = np.sin(phi_a - phi_b)  # 0 on matched cells
    plus = np.broadcast_to(sign > 0.5, CELL_SHAPE)
    minus = np.broadcast_to(sign < -0.5, CELL_SHAPE)
    c1 = record.spd1[plus].sum() + record.spd2[minus].sum()
    c2 = record.spd2[plus].sum() + record.spd1[minus].sum()
    return int(c1), int(c2)


def phase_track_update(tracker: PhaseTracker, mismatched: tuple[int, int]) -> tuple[PhaseTracker, bool]:
    """Move the offset estimate by ``gain * arcsin(r)``, ``r = (C1-C2)/(C1+C2)``.

    Returns ``(tracker, updated)``; with zero counts the tracker is returned
    unchanged and ``updated`` is false.
    """
    c1, c2 = mismatched
    total = c1 + c2
    if total <= 0:
        return tracker, False
    r = min(1.0, max(-1.0, (c1 - c2) / total))
    est = float(ch.wrap_phase(tracker.estimated_offset + tracker.gain * math.asin(r)))
    return replace(tracker, estimated_offset=est), True


@dataclass
class TrackedStep:
    time: float
    phase_offset: float
    estimated_offset: float
    record: PulseBatchRecord


def run_tracked(params: SystemParams, channel: ch.ChannelParams, duration: float, seed: int,
                step_seconds: float = 0.05, tracker: PhaseTracker | None = None,
                pulse_scale: float = 1.0, channel_substeps: int = 1):
    """Sequential simulation with the phase-tracking loop in the feedback path.

    Each step samples ``rep_rate * step_seconds * pulse_scale`` pulses at the
    current channel state and compensation. Mismatched-basis singles
    accumulate until ``tracker.window`` is reached, then the compensation is
    updated; the pulse stream is never paused. ``tracker=None`` runs open loop.
    Yields one :class:`TrackedStep` per step.
    """
    if duration <= 0 or step_seconds <= 0:
        raise RejectedInput("duration and step_seconds must be positive")
    model = rate_model(params, channel.loss_db)
    root = np.random.SeedSequence([seed, channel.seed])
    chan_rng, pulse_rng = (np.random.default_rng(s) for s in root.spawn(2))
    n_steps = int(round(duration / step_seconds))
    pulses = np.array([int(round(params.rep_rate * step_seconds * pulse_scale))], dtype=np.int64)
    state = ch.ChannelState()
    pending = (0, 0)
    for i in range(n_steps):
        state, _, _ = ch.trajectory(state, channel, step_seconds / channel_substeps,
                                    channel_substeps, chan_rng, record=False)
        est = tracker.estimated_offset if tracker is not None else 0.0
        frac1 = fringe_fractions([state.phase_offset - est], state.unitary[None])
        probs = outcome_probabilities(params, model, frac1)
        record = sample_cells(pulse_rng, params, pulses, probs)
        yield TrackedStep(time=(i + 1) * step_seconds, phase_offset=state.phase_offset,
                          estimated_offset=est, record=record)
        if tracker is not None:
            c1, c2 = mismatched_counts(record)
            pending = (pending[0] + c1, pending[1] + c2)
            if sum(pending) >= tracker.window:
                tracker, _ = phase_track_update(tracker, pending)
                pending = (0, 0)
