"""Scenario runners behind the ``qkdsim`` command.

Each runner returns a :class:`Report`: named CSV tables plus a JSON summary
that embeds the resolved config, so a report alone is enough to re-run it.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import channel as ch
from .config import ScenarioConfig
from .errors import QKDSimError, UndefinedErrorRate
from .jones import PhaseSettings, intensity, smzi_outputs, visibility
from .postproc import cascade_correct, toeplitz_hash
from .postproc.cascade import efficiency
from .postproc.finite_key import binary_entropy, key_report, skr_curve
from .protocol import PhaseTracker, rate_model, run_tracked, sift, simulate_block

SCHEMA_VERSION = "1"
RATE_COLUMNS = ["loss_db", "sifted_bps", "secure_bps", "qber"]


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(x) for x in row])
        return buf.getvalue()


@dataclass
class Report:
    scenario: str
    config: dict
    tables: dict[str, Table]
    rows: list[dict]
    metrics: dict

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "seed": self.config["scenario"]["seed"],
            "config": self.config,
            "rows": self.rows,
            "metrics": self.metrics,
            "files": sorted(f"{name}.csv" for name in self.tables),
        }

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            paths = []
            for name, table in sorted(self.tables.items()):
                p = out / f"{name}.csv"
                p.write_text(table.to_csv(), encoding="utf-8")
                paths.append(p)
            p = out / "summary.json"
            p.write_text(json.dumps(_jsonable(self.summary()), indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
            paths.append(p)
        except OSError as exc:
            raise QKDSimError(f"cannot write report to {out}: {exc}") from exc
        return paths


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return repr(float(x))
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _rate_row(loss, sifted, secure, qber) -> dict:
    return {"loss_db": float(loss), "sifted_bps": float(sifted), "secure_bps": float(secure),
            "qber": float(qber)}


def _security(cfg: ScenarioConfig) -> dict:
    s = cfg.security
    return dict(block_size=s.block_size, epsilon_sec=s.epsilon_sec, epsilon_cor=s.epsilon_cor,
                f_ec=s.f_ec)


# --- visibility scan -----------------------------------------------------

def scan_counts(cfg: ScenarioConfig, phase_offsets, unitaries, voltages, rng) -> np.ndarray:
    """SPD1 counts for one voltage sweep.

    The scan runs with Alice's phase fixed, so only the intrinsic fringe
    contrast limits the minimum. After-pulses follow the detector's own click
    probability at each voltage point.
    """
    sp, opt = cfg.system, cfg.options
    eta = 10 ** (-0.1 * (cfg.channel.loss_db + sp.receiver_loss_db)) * sp.eta_d
    phases = PhaseSettings.from_voltage(phase_offsets, voltages, v_pi=opt.v_pi)
    out1, out2 = smzi_outputs(unitaries[:, :, 0], phases)
    i1, i2 = intensity(out1), intensity(out2)
    e_vis = (1 - sp.fringe_visibility) / 2
    f1 = e_vis + (1 - 2 * e_vis) * i1 / (i1 + i2)
    click = 1 - np.exp(-opt.scan_mean_photon * eta * f1) * (1 - 0.5 * sp.p_dc)
    click = 1 - (1 - click) * (1 - sp.p_ap * click)
    return rng.binomial(opt.pulses_per_point, click)


def run_visibility_scan(cfg: ScenarioConfig) -> Report:
    opt = cfg.options
    voltages = np.round(np.arange(opt.v_min, opt.v_max + opt.v_step / 2, opt.v_step), 10)
    root = np.random.SeedSequence([cfg.seed, cfg.channel.seed])
    chan_rng, count_rng = (np.random.default_rng(s) for s in root.spawn(2))
    dt = opt.pulses_per_point / cfg.system.rep_rate
    state = ch.ChannelState()
    rounds = Table(["round", "time_s", "visibility", "c_max", "c_min"])
    vis = []
    for r in range(opt.rounds):
        start = state.time
        state, us, offs = ch.trajectory(state, cfg.channel, dt, len(voltages), chan_rng)
        counts = scan_counts(cfg, offs, us, voltages, count_rng)
        v = visibility(counts)
        vis.append(v)
        rounds.rows.append([r, start, v, int(counts.max()), int(counts.min())])
        if opt.round_interval_s > 0:
            state, _, _ = ch.trajectory(state, cfg.channel, opt.round_interval_s, 1, chan_rng, record=False)
    vis = np.asarray(vis)
    hist, edges = np.histogram(vis, bins=opt.histogram_bins)
    histogram = Table(["bin_lo", "bin_hi", "count"],
                      [[lo, hi, int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], hist)])
    try:
        model = rate_model(cfg.system, cfg.channel.loss_db)
        point = skr_curve(cfg.system, [cfg.channel.loss_db], **_security(cfg))[0]
        rate_rows = [_rate_row(cfg.channel.loss_db, point.sifted_rate, point.skr, model.e[0])]
    except UndefinedErrorRate:
        rate_rows = []  # noiseless detectors: the vacuum decoy has no error rate
    return Report(
        scenario=cfg.scenario, config=cfg.to_dict(),
        tables={"visibility_rounds": rounds, "visibility_histogram": histogram},
        rows=rate_rows,
        metrics={"visibility_mean": float(vis.mean()), "visibility_std": float(vis.std(ddof=1)) if len(vis) > 1 else 0.0,
                 "visibility_min": float(vis.min()), "visibility_max": float(vis.max()),
                 "rounds": int(len(vis)), "points_per_round": int(len(voltages))},
    )


# --- loss sweep ----------------------------------------------------------

def run_loss_sweep(cfg: ScenarioConfig) -> Report:
    opt = cfg.options
    sec = _security(cfg)
    cols = RATE_COLUMNS + ["s0_lower", "s1_lower", "phi1_upper", "ell"]

    def rows_for(losses):
        return [[p.loss_db, p.sifted_rate, p.skr, p.qber, p.report.s0_lower, p.report.s1_lower,
                 p.report.phi1_upper, p.report.ell] for p in skr_curve(cfg.system, losses, **sec)]

    table = Table(cols, rows_for(opt.losses))
    fine = np.round(np.arange(opt.fine_min, opt.fine_max + opt.fine_step / 2, opt.fine_step), 10)
    curve = Table(cols, rows_for(fine))
    tables = {"loss_sweep": table, "skr_curve": curve}
    metrics = {}
    if opt.mc_pulses > 0:
        mc = Table(["loss_db", "intensity", "sent", "gain_mc", "gain_model", "gain_z",
                    "qber_mc", "qber_model", "qber_z"])
        worst = 0.0
        for i, loss in enumerate(opt.losses):
            chan = replace(cfg.channel, loss_db=float(loss), phase_drift_sigma=0.0)
            rec = simulate_block(cfg.system, chan, opt.mc_pulses, seed=cfg.seed + i)
            for row in mc_comparison(cfg.system, rec, float(loss), seed=cfg.seed + i):
                mc.rows.append(row)
                worst = max(worst, abs(row[5]), abs(row[8]))
        tables["mc_check"] = mc
        metrics["mc_max_abs_z"] = worst
    return Report(scenario=cfg.scenario, config=cfg.to_dict(), tables=tables,
                  rows=[_rate_row(*r[:4]) for r in table.rows], metrics=metrics)


def mc_comparison(params, record, loss_db: float, seed: int = 0) -> list[list]:
    """Per-intensity MC gains and QBERs against the analytic model, with z-scores."""
    model = rate_model(params, loss_db)
    stats = sift(record, rng=seed)
    sent = record.sent.sum(axis=(1, 2, 3))
    gains = record.gains()
    rows = []
    for k, name in enumerate(("mu", "nu1", "nu2")):
        sg = math.sqrt(model.q[k] * (1 - model.q[k]) / sent[k])
        se = math.sqrt(model.e[k] * (1 - model.e[k]) / stats.n[k]) if stats.n[k] else math.inf
        rows.append([loss_db, name, int(sent[k]), gains[k], model.q[k], (gains[k] - model.q[k]) / sg,
                     stats.qber[k], model.e[k], (stats.qber[k] - model.e[k]) / se])
    return rows


# --- long run ------------------------------------------------------------

def run_long_run(cfg: ScenarioConfig) -> Report:
    """Accelerated continuous operation with drift, scrambling and tracking.

    ``duration_s`` is nominal wall-clock time; the loop simulates
    ``duration_s / compression`` seconds at full pulse statistics with the
    channel processes at their physical rates. Output times are reported both
    as simulated seconds and rescaled to the nominal axis.
    """
    opt = cfg.options
    sp = cfg.system
    sim_duration = opt.duration_s / opt.compression
    tracker = PhaseTracker(window=opt.tracker_window, gain=opt.tracker_gain) if opt.tracking else None
    native_steps = max(1, int(round(opt.native_seconds / opt.step_seconds)))
    bin_steps = max(1, int(round(opt.bin_seconds / opt.compression / opt.step_seconds)))
    cols = ["t_sim_s", "t_nominal_s", "E_mu", "E_nu1", "E_nu2", "Q_mu", "Q_nu1", "Q_nu2",
            "sifted_bps", "skr_bps", "phase_offset", "estimated_offset"]
    native, binned = Table(list(cols)), Table(list(cols))
    sec = _security(cfg)
    all_records = []
    rng = np.random.default_rng([cfg.seed, 0xB17])

    def row(steps, records):
        rec = records[0]
        for r in records[1:]:
            rec = rec + r
        span = len(records) * opt.step_seconds
        stats = sift(rec, rng=rng, **sec)
        gains = rec.gains()
        sifted = stats.n[0] / span * sp.duty_factor
        skr = math.nan
        if stats.n[0] > 0 and stats.n[1] > 0:
            rep = key_report(stats.scaled_to_block(), sp, block_rate=sifted / stats.block_size)
            skr = rep.skr
        t = steps[-1].time
        return [t, t * opt.compression, *stats.qber, *gains, sifted, skr,
                steps[-1].phase_offset, steps[-1].estimated_offset], rec

    step_buf_n, step_buf_b = [], []
    for step in run_tracked(sp, cfg.channel, sim_duration, cfg.seed, step_seconds=opt.step_seconds,
                            tracker=tracker):
        step_buf_n.append(step)
        step_buf_b.append(step)
        if len(step_buf_n) == native_steps:
            r, _ = row(step_buf_n, [s.record for s in step_buf_n])
            native.rows.append(r)
            step_buf_n = []
        if len(step_buf_b) == bin_steps:
            r, rec = row(step_buf_b, [s.record for s in step_buf_b])
            binned.rows.append(r)
            all_records.append(rec)
            step_buf_b = []
    if step_buf_b:
        r, rec = row(step_buf_b, [s.record for s in step_buf_b])
        binned.rows.append(r)
        all_records.append(rec)
    total = all_records[0]
    for r in all_records[1:]:
        total = total + r
    stats = sift(total, rng=rng, **sec)
    sifted = stats.n[0] / sim_duration * sp.duty_factor
    rep = key_report(stats.scaled_to_block(), sp, block_rate=sifted / stats.block_size)
    e = stats.qber
    skr_bins = np.array([r[9] for r in binned.rows], dtype=float)
    return Report(
        scenario=cfg.scenario, config=cfg.to_dict(),
        tables={"longrun_native": native, "longrun_binned": binned},
        rows=[_rate_row(cfg.channel.loss_db, sifted, rep.skr, e[0])],
        metrics={"qber_mu_mean": float(e[0]), "qber_nu1_mean": float(e[1]), "qber_nu2_mean": float(e[2]),
                 "gain_mu_mean": float(total.gains()[0]), "skr_mean_of_bins": float(np.nanmean(skr_bins)),
                 "simulated_seconds": sim_duration, "tracking": bool(opt.tracking)},
    )


# --- post-processing demo ------------------------------------------------

def run_postprocess_demo(cfg: ScenarioConfig) -> Report:
    """One Monte Carlo block through sifting, cascade, key length and hashing."""
    sp, sec = cfg.system, _security(cfg)
    n_block = cfg.security.block_size
    target = cfg.options.min_signal_bits or n_block
    model = rate_model(sp, cfg.channel.loss_db)
    per_pulse = sp.probabilities[0] * model.q[0] * 0.5
    n_pulses = int(math.ceil(1.05 * target / per_pulse))
    record = simulate_block(sp, replace(cfg.channel, phase_drift_sigma=0.0), n_pulses, seed=cfg.seed)
    stats = sift(record, rng=cfg.seed, **sec)
    n_sig = int(stats.n[0])
    errors = int(stats.m[0])
    key_bits = min(n_sig, n_block)
    errors = int(round(errors * key_bits / n_sig))
    rng = np.random.default_rng([cfg.seed, 0xD3])
    key_a = rng.integers(0, 2, key_bits, dtype=np.uint8)
    key_b = key_a.copy()
    key_b[rng.choice(key_bits, errors, replace=False)] ^= 1
    qber = errors / key_bits
    corrected, leak = cascade_correct(key_a, key_b, max(qber, 1e-4), seed=cfg.seed)
    block = stats.scaled(key_bits / n_sig)
    rate = n_sig / (n_pulses / sp.rep_rate) * sp.duty_factor
    measured = key_report(block, sp, block_rate=rate / key_bits, leak_ec=leak)
    modeled = key_report(block, sp, block_rate=rate / key_bits)
    seed_bits = rng.integers(0, 2, key_bits + max(measured.ell, 1) - 1, dtype=np.uint8)
    final_a = toeplitz_hash(key_a, seed_bits[: key_bits + measured.ell - 1], measured.ell) if measured.ell else key_a[:0]
    final_b = toeplitz_hash(corrected, seed_bits[: key_bits + measured.ell - 1], measured.ell) if measured.ell else key_a[:0]
    table = Table(["leak_mode", "key_bits", "errors", "qber", "leak_ec", "f_ec", "s0_lower", "s1_lower",
                   "phi1_upper", "ell", "secure_bps"])
    for mode, rep in (("measured", measured), ("modeled", modeled)):
        table.rows.append([mode, key_bits, errors, qber, rep.leak_ec,
                           rep.leak_ec / (key_bits * binary_entropy(qber)) if qber > 0 else math.nan,
                           rep.s0_lower, rep.s1_lower, rep.phi1_upper, rep.ell, rep.skr])
    return Report(
        scenario=cfg.scenario, config=cfg.to_dict(), tables={"postprocess": table},
        rows=[_rate_row(cfg.channel.loss_db, rate, measured.skr, qber)],
        metrics={"keys_match": bool(np.array_equal(final_a, final_b)),
                 "reconciled": bool(np.array_equal(corrected, key_a)),
                 "cascade_efficiency": efficiency(leak, key_bits, qber) if qber > 0 else None,
                 "final_key_bits": int(measured.ell), "pulses": n_pulses},
    )


RUNNERS = {"visibility-scan": run_visibility_scan, "long-run": run_long_run,
           "loss-sweep": run_loss_sweep, "postprocess-demo": run_postprocess_demo}


def run(cfg: ScenarioConfig) -> Report:
    return RUNNERS[cfg.scenario](cfg)
