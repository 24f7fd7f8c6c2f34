import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from qkdsim.channel import ChannelParams, ChannelState
from qkdsim.errors import RejectedInput, UndefinedErrorRate
from qkdsim.protocol import (CELL_SHAPE, PhaseTracker, PulseBatchRecord, SystemParams,
                             calibrate_duty_factor, calibrate_e_mis, gain_no_afterpulse,
                             mismatched_counts, overall_efficiency, phase_track_update, rate_model,
                             sifted_rate, sift, simulate_block)

P = SystemParams()
STATIC = ChannelParams(scramble_rate=2.0, phase_drift_sigma=0.0)


def test_system_params_validation():
    with pytest.raises(RejectedInput):
        SystemParams(probabilities=(0.5, 0.3, 0.3))
    with pytest.raises(RejectedInput):
        SystemParams(intensities=(0.1, 0.6, 0.0))
    with pytest.raises(RejectedInput):
        SystemParams(duty_factor=0.0)


def test_overall_efficiency():
    ideal = replace(P, receiver_loss_db=0.0, eta_d=1.0)
    assert overall_efficiency(ideal, 0.0) == 1.0
    assert overall_efficiency(P, 10.0) == pytest.approx(2.540e-3, rel=5e-4)
    assert overall_efficiency(P, 12.6) == pytest.approx(1.396e-3, rel=5e-4)


def test_gain_no_afterpulse():
    assert gain_no_afterpulse(0.0, 0.5, 3.5e-6) == pytest.approx(3.5e-6, rel=1e-12)
    assert gain_no_afterpulse(0.6, 1.396e-3, 3.5e-6) == pytest.approx(8.410e-4, rel=5e-4)
    assert gain_no_afterpulse(1e6, 1.0, 0.0) == 1.0
    with pytest.raises(RejectedInput):
        gain_no_afterpulse(-0.1, 0.1, 0.0)


def test_rate_model_invariants():
    m = rate_model(P, 12.6)
    assert np.all(m.q0 <= m.q) and np.all(m.q <= 1)
    assert np.all((0 <= m.e) & (m.e <= 1))
    assert m.q_t == pytest.approx(float(np.dot(P.p, m.q0)), rel=1e-15)
    # vacuum pulses only see dark counts and after-pulses
    assert m.e[2] == pytest.approx(0.5, abs=1e-9)
    assert m.e[0] == pytest.approx(0.00958, abs=0.001)
    assert rate_model(P, 25.0).e[0] == pytest.approx(0.0413, abs=2e-4)


def test_rate_model_zero_gain():
    dead = SystemParams(p_dc=0.0, p_ap=0.0, eta_d=0.0)
    with pytest.raises(UndefinedErrorRate):
        rate_model(dead, 10.0)


def test_monotonicity():
    losses = np.arange(0, 40, 0.5)
    for loss in losses:
        m = rate_model(P, loss)
        assert m.q[0] > m.q[1] > m.q[2]
    e_mu = [rate_model(P, loss).e[0] for loss in losses]
    assert np.all(np.diff(e_mu) > 0)


def test_e_mis_calibration_against_root_solve():
    # oracle: scalar root solve of E_mu(e_mis) = 0.899 % at 10 dB
    root = brentq(lambda x: rate_model(replace(P, e_mis=x), 10.0).e[0] - 0.00899, 0.0, 0.5, xtol=1e-14)
    assert calibrate_e_mis(P, 10.0, 0.00899) == pytest.approx(root, rel=1e-9)
    assert root == pytest.approx(0.0056, abs=5e-5)
    assert P.e_mis == pytest.approx(root, rel=1e-3)


def test_duty_factor_calibration():
    kappa = calibrate_duty_factor(P, 10.0, 21969.0)
    assert kappa == pytest.approx(0.79, abs=0.005)
    assert sifted_rate(replace(P, duty_factor=kappa), 10.0) == pytest.approx(21969.0, rel=1e-12)


def test_null_fringe_only_dark_counts():
    params = replace(P, e_mis=0.0)
    chan = ChannelParams(loss_db=0.0, scramble_rate=2.0, phase_drift_sigma=0.0)
    rec = simulate_block(params, chan, 10 ** 7, seed=3)
    m = rate_model(params, 0.0)
    ap = m.q_t * params.p_ap
    bg = 1 - (1 - params.p_dc / 2) * (1 - ap / 2)  # one detector, no signal
    for k in range(3):
        for basis in range(2):
            sent = rec.sent[k, basis, 0, basis]
            # bit 0, matched basis: signal goes to SPD2 only
            p2 = 1 - math.exp(-P.intensities[k] * m.eta) * (1 - params.p_dc / 2) * (1 - ap / 2)
            lam = sent * bg * (1 - p2)
            assert abs(rec.spd1[k, basis, 0, basis] - lam) <= 3 * math.sqrt(lam) + 1


def test_simulate_block_determinism_and_workers():
    a = simulate_block(P, STATIC, 3 * 10 ** 7, seed=7)
    b = simulate_block(P, STATIC, 3 * 10 ** 7, seed=7, workers=4)
    c = simulate_block(P, STATIC, 3 * 10 ** 7, seed=8)
    assert a == b
    assert a != c
    assert int(a.sent.sum()) == 3 * 10 ** 7
    assert np.all(a.detections <= a.sent)


def test_simulate_block_rejects_empty():
    with pytest.raises(RejectedInput):
        simulate_block(P, STATIC, 0, seed=1)


def test_sift_examples():
    rec = PulseBatchRecord()
    rec.sent[:, 0, :, 1] = 1000
    rec.spd1[:, 0, :, 1] = 40
    rec.sent[:, 1, :, 0] = 1000
    rec.spd2[:, 1, :, 0] = 40
    stats = sift(rec)
    assert np.all(stats.n == 0)

    clean = PulseBatchRecord()
    clean.sent[:] = 100
    clean.spd2[:, :, 0, :] = 10
    clean.spd1[:, :, 1, :] = 10
    stats = sift(clean)
    assert np.all(stats.m == 0)
    assert np.all(stats.n == 40)


def test_sift_double_clicks_half_errors():
    rec = PulseBatchRecord()
    rec.sent[:] = 10 ** 6
    rec.double[:] = 10 ** 5
    stats = sift(rec, rng=1)
    assert np.all(np.abs(stats.m / stats.n - 0.5) < 3 * 0.5 / math.sqrt(4 * 10 ** 5))


def test_mc_matches_model_at_operating_point():
    rec = simulate_block(P, replace(STATIC, loss_db=12.6), 10 ** 8, seed=21)
    m = rate_model(P, 12.6)
    sent = rec.sent.sum(axis=(1, 2, 3))
    assert np.all(np.abs(rec.gains() - m.q) <= 3 * np.sqrt(m.q * (1 - m.q) / sent))
    stats = sift(rec, rng=21)
    assert np.all(np.abs(stats.qber - m.e) <= 3 * np.sqrt(m.e * (1 - m.e) / stats.n))


def test_scrambler_does_not_change_qber():
    off = simulate_block(P, replace(STATIC, scramble_rate=0.0), 10 ** 8, seed=4)
    on = simulate_block(P, STATIC, 10 ** 8, seed=5)
    e_off, e_on = sift(off).qber[0], sift(on).qber[0]
    n = sift(on).n[0]
    assert abs(e_on - e_off) < 3 * math.sqrt(2 * e_off * (1 - e_off) / n)


def test_phase_tracker_examples():
    t = PhaseTracker(estimated_offset=0.2)
    t2, updated = phase_track_update(t, (500, 500))
    assert updated and t2.estimated_offset == pytest.approx(0.2)
    t3, updated = phase_track_update(t, (0, 0))
    assert not updated and t3 == t
    t4, _ = phase_track_update(PhaseTracker(), (1000, 0))
    assert t4.estimated_offset == pytest.approx(math.pi / 2)


def test_phase_tracker_recovers_injected_drift():
    # closed loop: counts generated with a known residual offset of +0.1 rad
    params = P
    chan = ChannelParams(loss_db=0.0, scramble_rate=2.0, phase_drift_sigma=0.0)
    n = 0
    rec = None
    while n < 10 ** 4:
        part = simulate_block(params, chan, 10 ** 5, seed=n, state=ChannelState(phase_offset=0.1))
        rec = part if rec is None else rec + part
        n = sum(mismatched_counts(rec))
    c1, c2 = mismatched_counts(rec)
    tracker, _ = phase_track_update(PhaseTracker(gain=1.0), (c1, c2))
    sigma = 1 / math.sqrt(c1 + c2)
    assert abs(tracker.estimated_offset - 0.1 * (1 - 2 * params.e_mis)) < 3 * sigma


def test_record_merge_is_associative():
    a, b, c = (simulate_block(P, STATIC, 10 ** 6, seed=s) for s in range(3))
    assert (a + b) + c == a + (b + c)
    assert a.sent.shape == CELL_SHAPE
