"""Trial runner, relative error metrics, parameter sweeps, and result files.

An experiment repeats sample -> estimate over R independent trials and
reports, per method,

    RMSE_r = sqrt(sum_t (F_debias - F*)^2) / sqrt(sum_t (F_naive - F*)^2)
    Bias_r = sum_t (F_debias - F*) / sum_t (F_naive - F*)

Trial t draws every random quantity from ``split(master, t)``, so summaries
are a pure function of (config, master seed) regardless of how many workers
execute the trials.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BootstrapPlan, covariance_debias, scale_debias, shift_debias
from .objectives import Objective
from .observations import ContractError, mean_observation
from .problems import ProblemInstance, generate_instance
from .resampling import RandomStream

METHODS = ("shift", "scale", "cov")

PRESETS = {
    "P1": {"n": 10, "K": 10, "methods": ["shift", "scale", "cov"]},
    "P2": {"n": 10, "K": 10, "methods": ["shift", "scale", "cov"]},
    "P3": {"n": 10, "K": 10, "methods": ["shift", "scale", "cov"]},
    "P4": {"n": 10, "K": 100, "methods": ["shift", "scale"]},
    "P5": {"n": 10, "K": 100, "methods": ["shift", "scale"]},
    "P6": {"n": None, "K": 100, "methods": ["shift", "scale", "cov"]},  # n = n_ratio * d
    "P7": {"n": 10, "K": 50, "methods": ["shift", "scale"]},
}

SWEEP_AXES = {
    "P1": ("d", "kappa", "sigma", "xstar_norm2", "n", "K"),
    "P2": ("d", "kappa", "sigma", "xstar_norm2", "n", "K"),
    "P3": ("d", "c_norm", "xstar_norm2", "n", "K"),
    "P4": ("d", "kappa", "k_shape", "n", "K"),
    "P5": ("d", "p_dim", "ratio_dp", "sigma", "n", "K"),
    "P6": ("d", "alpha", "n_ratio", "n", "K"),
    "P7": ("d", "mu2_norm", "sigma", "m_samples", "n", "K"),
}


@dataclass
class TrialRecord:
    """One trial: naive and per-method debiased values on a shared sample."""

    trial_index: int
    truth_value: float
    naive_value: float
    debiased: dict[str, float]
    seed_path: tuple
    fingerprint: int


@dataclass
class ExperimentSummary:
    """Per-method relative metrics plus the raw sums they derive from."""

    problem: str
    params: dict
    n: int
    K: int
    R: int
    seed: int
    methods: list[str]
    rmse_r: dict[str, float]
    bias_r: dict[str, float]
    debias_sq_sum: dict[str, float]
    debias_err_sum: dict[str, float]
    naive_sq_sum: float
    naive_err_sum: float
    axis: Optional[str] = None
    axis_value: Optional[float] = None


def method_applicable(method: str, instance: ProblemInstance) -> Optional[str]:
    """None if the method applies to this instance, else the reason it doesn't."""
    if method not in METHODS:
        return f"unknown method {method!r}; valid: {', '.join(METHODS)}"
    F = instance.objective
    paired = instance.noise.kind == "iid_dirac_pair"
    if method == "scale" and F.sign_constraint not in ("positive", "negative"):
        return "scale needs a sign-definite objective"
    if method == "cov":
        if F.hessian is None:
            return "covariance needs a hessian oracle"
        if paired:
            return "covariance needs Euclidean observations"
    return None


def _estimate(method: str, F: Objective, obs, plan: BootstrapPlan, rng: RandomStream):
    if method == "shift":
        return shift_debias(F, obs, plan, rng)
    if method == "scale":
        return scale_debias(F, obs, plan, rng)
    if method == "cov":
        return covariance_debias(F, obs)
    raise ContractError(f"unknown method {method!r}")


def run_trial(instance: ProblemInstance, n: int, plan: BootstrapPlan,
              methods, stream: RandomStream) -> TrialRecord:
    """One fresh observation set, all requested methods evaluated on it."""
    for m in methods:
        reason = method_applicable(m, instance)
        if reason:
            raise ContractError(f"{instance.id}: {reason}")
    obs = instance.sample_observations(n, stream.split(0))
    if isinstance(obs, tuple):
        mean = tuple(mean_observation(s) for s in obs)
        fingerprint = hash(tuple(s.fingerprint() for s in obs))
    else:
        mean = mean_observation(obs)
        fingerprint = obs.fingerprint()
    naive = instance.objective.evaluate(mean)
    debiased = {}
    for j, m in enumerate(methods):
        est = _estimate(m, instance.objective, obs, plan, stream.split(1 + j))
        debiased[m] = est.debiased_value
        if not math.isfinite(est.debiased_value):
            raise ContractError(f"trial {stream.path}: method {m} produced {est.debiased_value}")
    return TrialRecord(
        trial_index=stream.path[-1] if stream.path else 0,
        truth_value=instance.truth_value,
        naive_value=naive,
        debiased=debiased,
        seed_path=stream.path,
        fingerprint=fingerprint,
    )


def _reduce_records(instance, n, plan, methods, R, seed, records) -> ExperimentSummary:
    truth = instance.truth_value
    naive_err = [rec.naive_value - truth for rec in records]
    naive_sq_sum = math.fsum(e * e for e in naive_err)
    naive_err_sum = math.fsum(naive_err)
    rmse_r, bias_r, sq_sums, err_sums = {}, {}, {}, {}
    for m in methods:
        err = [rec.debiased[m] - truth for rec in records]
        sq = math.fsum(e * e for e in err)
        es = math.fsum(err)
        sq_sums[m] = sq
        err_sums[m] = es
        rmse_r[m] = math.sqrt(sq) / math.sqrt(naive_sq_sum) if naive_sq_sum > 0 else float("nan")
        bias_r[m] = es / naive_err_sum if naive_err_sum != 0 else float("nan")
    return ExperimentSummary(
        problem=instance.id,
        params={k: v for k, v in instance.params.items() if np.isscalar(v) or v is None},
        n=n,
        K=plan.rounds,
        R=R,
        seed=seed,
        methods=list(methods),
        rmse_r=rmse_r,
        bias_r=bias_r,
        debias_sq_sum=sq_sums,
        debias_err_sum=err_sums,
        naive_sq_sum=naive_sq_sum,
        naive_err_sum=naive_err_sum,
    )


def run_experiment(instance: ProblemInstance, n: int, plan: BootstrapPlan, methods,
                   R: int, master_stream: RandomStream, seed: Optional[int] = None) -> ExperimentSummary:
    """R paired trials, trial t on split(master_stream, t), reduced in order."""
    if R < 1:
        raise ContractError(f"R must be >= 1, got {R}")
    for m in methods:
        reason = method_applicable(m, instance)
        if reason:
            raise ContractError(f"{instance.id}: {reason}")
    records = [run_trial(instance, n, plan, methods, master_stream.split(t)) for t in range(R)]
    return _reduce_records(instance, n, plan, methods, R,
                           seed if seed is not None else master_stream.origin_seed, records)


def _trial_block(family, params, seed, exp_index, n, K, m_size, methods, t_lo, t_hi):
    """Worker entry: regenerate the instance and run a contiguous trial block."""
    master = RandomStream(seed).split(exp_index)
    instance = generate_instance(family, params, master.split(0))
    plan = BootstrapPlan(rounds=K, size=m_size)
    trial_root = master.split(1)
    out = []
    for t in range(t_lo, t_hi):
        rec = run_trial(instance, n, plan, methods, trial_root.split(t))
        out.append((t, rec.naive_value, rec.debiased))
    return out


def run_experiment_spec(family: str, params: dict, n: int, K: int, methods, R: int,
                        seed: int, exp_index: int = 0, workers: int = 1,
                        m_size: Optional[int] = None) -> ExperimentSummary:
    """Experiment from a declarative spec; safe to parallelize because each
    worker regenerates the instance and draws trial t from the same lineage.

    Lineage: master = RandomStream(seed).split(exp_index); the instance comes
    from master.split(0) and trial t from master.split(1).split(t).
    """
    master = RandomStream(seed).split(exp_index)
    instance = generate_instance(family, params, master.split(0))
    plan = BootstrapPlan(rounds=K, size=m_size)
    for m in methods:
        reason = method_applicable(m, instance)
        if reason:
            raise ContractError(f"{family}: {reason}")
    if workers <= 1 or R < 4:
        trial_root = master.split(1)
        records = [run_trial(instance, n, plan, methods, trial_root.split(t)) for t in range(R)]
    else:
        workers = min(workers, R)
        bounds = np.linspace(0, R, workers + 1).astype(int)
        args = [(family, params, seed, exp_index, n, K, m_size, list(methods), int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_trial_block_star, args))
        flat = sorted((item for block in blocks for item in block), key=lambda r: r[0])
        records = [TrialRecord(t, instance.truth_value, naive, deb, (t,), 0)
                   for t, naive, deb in flat]
    return _reduce_records(instance, n, plan, methods, R, seed, records)


def _trial_block_star(args):
    return _trial_block(*args)


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def run_sweep(family: str, axis: str, values, fixed: dict, R: int, seed: int,
              methods=None, workers: int = 1) -> list[ExperimentSummary]:
    """One experiment per axis value; value i uses experiment index i of the
    shared master seed, so sweeps are reproducible point by point."""
    if family not in SWEEP_AXES:
        raise ContractError(f"unknown problem family {family!r}")
    if axis not in SWEEP_AXES[family]:
        raise ContractError(
            f"invalid axis {axis!r} for {family}; valid: {', '.join(SWEEP_AXES[family])}")
    preset = PRESETS[family]
    fixed = dict(fixed)
    n = fixed.pop("n", preset["n"])
    K = fixed.pop("K", preset["K"])
    methods = list(methods) if methods is not None else list(preset["methods"])
    summaries = []
    for i, value in enumerate(values):
        params = dict(fixed)
        n_i, K_i = n, K
        if axis == "n":
            n_i = int(value)
        elif axis == "K":
            K_i = int(value)
        else:
            params[axis] = value
        if n_i is None:  # P6 style: observations scale with dimension
            probe = dict(params)
            d = probe.get("d", 30)
            n_i = int(probe.get("n_ratio", 5) * d)
        summary = run_experiment_spec(family, params, n_i, K_i, methods, R, seed,
                                      exp_index=i, workers=workers)
        summary.axis = axis
        summary.axis_value = float(value)
        summaries.append(summary)
    return summaries


# ---------------------------------------------------------------------------
# result files

CSV_COLUMNS = "problem,method,axis,axis_value,n,K,R,seed,rmse_r,bias_r"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def summary_rows(summaries) -> list[str]:
    rows = []
    for s in summaries:
        for m in s.methods:
            rows.append(",".join([
                s.problem, m, s.axis or "", _fmt(s.axis_value), str(s.n), str(s.K),
                str(s.R), str(s.seed), _fmt(s.rmse_r[m]), _fmt(s.bias_r[m]),
            ]))
    return rows


def emit_results(summaries, fmt: str, path: str, header_lines=()) -> None:
    """Write summaries as CSV (schema above) or JSON, full-precision floats."""
    summaries = list(summaries)
    if not summaries:
        raise ContractError("emit_results needs at least one summary")
    if fmt == "csv":
        lines = [f"# {h}" for h in header_lines]
        lines.append(CSV_COLUMNS)
        lines.extend(summary_rows(summaries))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = {"header": list(header_lines), "results": [summary_dict(s) for s in summaries]}
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise ContractError(f"unknown format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)


def summary_dict(s: ExperimentSummary) -> dict:
    return {
        "problem": s.problem,
        "params": s.params,
        "axis": s.axis,
        "axis_value": s.axis_value,
        "n": s.n,
        "K": s.K,
        "R": s.R,
        "seed": s.seed,
        "methods": s.methods,
        "rmse_r": s.rmse_r,
        "bias_r": s.bias_r,
        "debias_sq_sum": s.debias_sq_sum,
        "debias_err_sum": s.debias_err_sum,
        "naive_sq_sum": s.naive_sq_sum,
        "naive_err_sum": s.naive_err_sum,
    }


def parse_results_csv(path: str) -> list[dict]:
    """Read back a CSV written by emit_results; floats via full-precision parse."""
    rows = []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body or body[0] != CSV_COLUMNS:
        raise ContractError(f"{path}: missing expected CSV header row")
    cols = CSV_COLUMNS.split(",")
    for ln in body[1:]:
        parts = ln.split(",")
        rec = dict(zip(cols, parts))
        rec["axis_value"] = float(rec["axis_value"]) if rec["axis_value"] else None
        for k in ("n", "K", "R", "seed"):
            rec[k] = int(rec[k])
        rec["rmse_r"] = float(rec["rmse_r"])
        rec["bias_r"] = float(rec["bias_r"])
        rows.append(rec)
    return rows


_SVG_W, _SVG_H, _SVG_PAD = 420, 300, 45
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")


def _panel(summaries, metric, methods, x0):
    values = [s.axis_value if s.axis_value is not None else i for i, s in enumerate(summaries)]
    ys = {m: [getattr(s, metric)[m] for s in summaries] for m in methods}
    all_y = [y for v in ys.values() for y in v if math.isfinite(y)] or [0.0, 1.0]
    ymin, ymax = min(all_y + [0.0]), max(all_y + [1.0])
    if ymax == ymin:
        ymax = ymin + 1.0
    xmin, xmax = min(values), max(values)
    if xmax == xmin:
        xmax = xmin + 1.0
    span_x = _SVG_W - 2 * _SVG_PAD
    span_y = _SVG_H - 2 * _SVG_PAD

    def sx(x):
        return x0 + _SVG_PAD + (x - xmin) / (xmax - xmin) * span_x

    def sy(y):
        return _SVG_H - _SVG_PAD - (y - ymin) / (ymax - ymin) * span_y

    parts = [
        f'<rect x="{x0 + _SVG_PAD}" y="{_SVG_PAD}" width="{span_x}" height="{span_y}" '
        'fill="none" stroke="#999"/>',
        f'<text x="{x0 + _SVG_W / 2}" y="{_SVG_H - 8}" text-anchor="middle" '
        f'font-size="12">{metric}</text>',
    ]
    for i, m in enumerate(methods):
        pts = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(values, ys[m]) if math.isfinite(y)
        )
        color = _COLORS[i % len(_COLORS)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(
            f'<text x="{x0 + _SVG_PAD + 4}" y="{_SVG_PAD + 14 + 13 * i}" font-size="11" '
            f'fill="{color}">{m}</text>'
        )
    return "".join(parts)


def emit_plot(summaries, path: str) -> None:
    """Two-panel SVG line chart (RMSE_r, Bias_r), one polyline per method,
    with the numeric table embedded as JSON metadata."""
    summaries = list(summaries)
    if not summaries:
        raise ContractError("emit_plot needs at least one summary")
    methods = summaries[0].methods
    table = [summary_dict(s) for s in summaries]
    meta = json.dumps(table)
    body = _panel(summaries, "rmse_r", methods, 0) + _panel(summaries, "bias_r", methods, _SVG_W)
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * _SVG_W}" height="{_SVG_H}">'
        f"<metadata id=\"debias-data\">{meta}</metadata>{body}</svg>\n"
    )
    with open(path, "w") as fh:
        fh.write(svg)
