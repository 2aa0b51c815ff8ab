"""Execute an experiment config and write CSV and JSON reports.

Outputs depend only on the config (including seed and reps): floats are
written with ``repr``, rows are emitted in a fixed order, and no timestamps
or host details are recorded. The thread count changes wall time only.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import estimators as est
from . import rng
from . import risk as rk
from .config import ExperimentConfig
from .model import HolderClass, TestFunction, catalog
from .wavelets import CoefficientTree, build_basis, restricted_norm_bounds, window_energy

logger = logging.getLogger(__name__)

COLUMNS = (
    "estimator", "n", "alpha", "M", "x0", "c_n", "reps", "mean", "stderr", "seed",
    "basis", "function", "row_type", "slope", "intercept", "r_squared", "bound",
    "J", "J_star", "J_upper", "L", "card_H",
)


@dataclass
class RunResult:
    rows: list[dict]
    plans: list[dict]
    notes: list[str] = field(default_factory=list)
    csv_path: Path | None = None
    json_path: Path | None = None

    def fit_rows(self) -> list[dict]:
        return [r for r in self.rows if r["row_type"].endswith("fit")]


def _row(cfg: ExperimentConfig, **values) -> dict:
    row = {c: None for c in COLUMNS}
    row.update(alpha=cfg.alpha, M=cfg.M, x0=cfg.x0, basis=cfg.basis, seed=cfg.seed)
    row.update(values)
    return row


def _depth(cfg: ExperimentConfig) -> int:
    return cfg.J_max or (max(cfg.n_grid) - 1).bit_length() + 2


def _resolve_estimator(name: str, params: dict, n: int, c_n: float, notes: list[str],
                       alpha: float) -> rk.EstimatorSpec:
    if name == "hybrid" and c_n <= math.log(n) / n:
        msg = f"n={n}: c_n={c_n:.6g} <= log(n)/n, hybrid replaced by blockjs"
        logger.info(msg)
        notes.append(msg)
        return rk.EstimatorSpec("blockjs")
    params = dict(params)
    if name in ("superefficient", "local_constant"):
        params.setdefault("alpha", alpha)
    return rk.EstimatorSpec(name, params)


def _plan_row(n: int, c_n: float, basis, nb: rk.NeighborhoodSpec, alpha: float) -> dict:
    plan = est.plan_levels(n, c_n, alpha=alpha, j0=basis.coarse_level)
    out = plan.as_dict()
    out["n"] = n
    out["c_n"] = c_n
    out["card_H"] = None
    if not plan.blockjs_regime:
        out["card_H"] = est.hybrid_partition(n, nb, basis).vertical_size
    return out


def _function_for(entry, cls, depth, basis, cfg, n, cache) -> TestFunction:
    params = dict(entry.params)
    if entry.name == "two_point_bumped":
        b_exp = float(params.pop("B_exponent", 1.0))
        params.setdefault("B_n", float(n) ** b_exp)
        params.setdefault("M_prime", cfg.M_prime if cfg.M_prime is not None else cfg.M / 2)
        params["n"] = n
        return catalog("two_point_bumped", cls, depth, basis, x0=cfg.x0, **params)
    key = entry.label()
    if key not in cache:
        cache[key] = catalog(entry.name, cls, depth, basis, x0=cfg.x0, **params)
    return cache[key]


def _risk_rows(cfg: ExperimentConfig, result: RunResult) -> None:
    basis = build_basis(cfg.basis, cfg.coarse_level)
    cls = HolderClass(cfg.alpha, cfg.M)
    depth = _depth(cfg)
    cache: dict = {}
    series: dict = {}
    for n in cfg.n_grid:
        c_n, d_n = cfg.neighborhood.half_width(n, cfg.alpha)
        kernel = rk.KERNELS[cfg.neighborhood.kernel] if cfg.neighborhood.kernel else None
        nb = rk.NeighborhoodSpec(cfg.x0, c_n, kernel, d_n)
        plan = _plan_row(n, c_n, basis, nb, cfg.alpha)
        result.plans.append(plan)
        risk_fn = rk.weighted_risk if kernel else rk.neighborhood_risk
        for name, params in cfg.estimators:
            es = _resolve_estimator(name, params, n, c_n, result.notes, cfg.alpha)
            for entry in cfg.functions:
                f = _function_for(entry, cls, depth, basis, cfg, n, cache)
                rep = risk_fn(es, f, nb, n, cfg.reps, cfg.seed, threads=cfg.threads)
                result.rows.append(_row(
                    cfg, estimator=es.label(), n=n, c_n=c_n, reps=cfg.reps, mean=rep.mean,
                    stderr=rep.stderr, function=entry.label(), row_type="risk",
                    J=plan["J"], J_star=plan["J_star"], J_upper=plan["J_upper"], L=plan["L"],
                    card_H=plan["card_H"] if es.name == "hybrid" else None,
                ))
                series.setdefault((name, entry.label()), []).append((n, rep.mean))
    if cfg.kind != "rate_study":
        return
    by_est: dict = {}
    for (name, label), pts in series.items():
        by_est.setdefault(name, []).append(pts)
        _fit_row(cfg, result, name, label, pts, "fit")
    for name, groups in by_est.items():
        if len(groups) > 1:
            worst = [(n, max(g[i][1] for g in groups)) for i, n in enumerate(cfg.n_grid)]
            _fit_row(cfg, result, name, "max", worst, "max_fit")


def _fit_row(cfg, result, estimator, function, pts, row_type) -> None:
    usable = [(n, r) for n, r in pts if r > 0]
    if len(usable) < 3:
        result.notes.append(f"{estimator}/{function}: fewer than 3 positive risks, no rate fit")
        return
    fit = rk.rate_fit(usable)
    result.rows.append(_row(cfg, estimator=estimator, reps=cfg.reps, function=function,
                            row_type=row_type, slope=fit.slope, intercept=fit.intercept,
                            r_squared=fit.r_squared))


def _superefficiency_rows(cfg: ExperimentConfig, result: RunResult) -> None:
    basis = build_basis(cfg.basis, cfg.coarse_level)
    nb_rule = cfg.neighborhood
    rep = rk.superefficiency_experiment(
        cfg.regime, HolderClass(cfg.alpha, cfg.M), cfg.M_prime, cfg.x0, nb_rule.kind, nb_rule.scale,
        cfg.n_grid, cfg.reps, cfg.seed, basis, B_exponent=cfg.B_exponent, J_max=cfg.J_max,
        threads=cfg.threads)
    for row in rep.rows:
        nb = rk.NeighborhoodSpec(cfg.x0, row.c_n, d_n=row.d_n)
        plan = _plan_row(row.n, row.c_n, basis, nb, cfg.alpha)
        plan["d_n"] = row.d_n
        plan["B_n"] = row.B_n
        result.plans.append(plan)
        for label, r, seed in (("zero", row.risk_f0, cfg.seed), ("two_point_bumped", row.risk_alt, cfg.seed + 1)):
            result.rows.append(_row(
                cfg, estimator=row.estimator, n=row.n, c_n=row.c_n, reps=r.reps, mean=r.mean,
                stderr=r.stderr, seed=seed, function=label, row_type="risk", J=plan["J"],
                J_star=plan["J_star"], J_upper=plan["J_upper"], L=plan["L"],
                card_H=plan["card_H"] if row.estimator == "hybrid" else None))
    if rep.f0_fit is not None:
        result.rows.append(_row(cfg, estimator=cfg.regime, reps=cfg.reps, function="zero",
                                row_type="fit", slope=rep.f0_fit.slope,
                                intercept=rep.f0_fit.intercept, r_squared=rep.f0_fit.r_squared))
    else:
        result.notes.append("risk at f0 vanished at too many n for a rate fit")
    result.rows.append(_row(cfg, estimator=cfg.regime, reps=cfg.reps, function="max", row_type="max_fit",
                            slope=rep.max_fit.slope, intercept=rep.max_fit.intercept,
                            r_squared=rep.max_fit.r_squared, bound=rep.minimax_slope))


def oracle_configs(L: int) -> list[np.ndarray]:
    """20 mean vectors: zero, one spike of size 0.1..10, dense constant blocks."""
    out = [np.zeros(L)]
    for a in (0.1, 0.3, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0):
        v = np.zeros(L)
        v[0] = a
        out.append(v)
    for a in (0.1, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0):
        out.append(np.full(L, a))
    return out


def _oracle_rows(cfg: ExperimentConfig, result: RunResult) -> None:
    lam = est.LAMBDA_STAR
    result.rows.append(_row(cfg, estimator="threshold_constant", row_type="constant", mean=lam,
                            bound=4.50524))
    for L in (5, 10, 25):
        for i, theta in enumerate(oracle_configs(L)):
            m, se = rk.block_total_risk_mc(theta, lam, 1.0, cfg.oracle_reps, cfg.seed + i)
            result.rows.append(_row(cfg, estimator="james_stein", reps=cfg.oracle_reps, mean=m, stderr=se,
                                    seed=cfg.seed + i, function=f"theta[{i}]", row_type="oracle_inequality",
                                    bound=rk.oracle_bound(theta, lam, L, 1.0, "standard"), L=L))
    grid = np.arange(0, 21) * 0.25
    for c in (0.5, 1.0, 2.0, 4.0):
        vals = [rk.truncated_second_moment(t, c) for t in grid]
        result.rows.append(_row(cfg, estimator="truncated_second_moment", row_type="truncated_moment",
                                function=f"c={c}", mean=float(np.min(np.diff(vals))), bound=-1e-10))
    basis = build_basis(cfg.basis, cfg.coarse_level)
    f = catalog("alpha_cusp", HolderClass(cfg.alpha, cfg.M), 14, basis, x0=cfg.x0)
    levels = np.arange(4, 13)
    peaks = [float(np.abs(f.true_tree.level(j)).max()) for j in levels]
    slope = float(np.polyfit(levels, np.log2(peaks), 1)[0])
    result.rows.append(_row(cfg, estimator="coefficient_decay", row_type="coefficient_decay", function="alpha_cusp",
                            slope=slope, bound=-(0.5 + cfg.alpha)))
    # restricted-norm sandwich on random trees and windows
    gen = rng.uniforms(cfg.seed, 0, 4 * 100)
    worst = -math.inf
    for i in range(100):
        u = gen[4 * i: 4 * i + 4]
        tree = _random_tree(cfg.seed, i + 1, basis, 8)
        x0, c = 0.05 + 0.9 * u[0], 0.01 + 0.49 * u[1]
        nb = (max(0.0, x0 - c), min(1.0, x0 + c))
        lo, hi = restricted_norm_bounds(tree, nb, basis)
        val = window_energy(tree, nb, basis)
        worst = max(worst, lo - val, val - hi)
    result.rows.append(_row(cfg, estimator="restricted_norm", row_type="sandwich", reps=100, mean=worst,
                            bound=1e-6))


def _random_tree(seed: int, stream: int, basis, depth: int) -> CoefficientTree:
    z = rng.standard_normal(seed, stream, 2**depth)
    return CoefficientTree.from_flat(basis.coarse_level, depth, z)


def run(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    """Run the experiment; with ``write`` the reports go to ``cfg.output``."""
    result = RunResult([], [])
    if cfg.kind in ("risk_table", "rate_study"):
        _risk_rows(cfg, result)
    elif cfg.kind == "superefficiency":
        _superefficiency_rows(cfg, result)
    elif cfg.kind == "oracle_suite":
        _oracle_rows(cfg, result)
    else:
        raise ValueError(f"unknown experiment kind {cfg.kind!r}")
    if write:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        result.csv_path = out / "report.csv"
        result.json_path = out / "report.json"
        result.csv_path.write_text(to_csv(result.rows))
        result.json_path.write_text(to_json(cfg, result))
    return result


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_cell(row[c]) for c in COLUMNS])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


def config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d.pop("threads")
    d.pop("output")
    d["estimators"] = [{"name": n, "params": p} for n, p in cfg.estimators]
    return _jsonable(d)


def to_json(cfg: ExperimentConfig, result: RunResult) -> str:
    doc = {
        "columns": list(COLUMNS),
        "config": config_dict(cfg),
        "rng": rng.ALGORITHM,
        "plans": result.plans,
        "notes": result.notes,
        "rows": result.rows,
    }
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def summary(result: RunResult) -> str:
    """Plain-text table of the report rows."""
    cols = ("row_type", "estimator", "function", "n", "c_n", "mean", "stderr", "slope", "bound")
    lines = [[c for c in cols]]
    for r in result.rows:
        cells = []
        for c in cols:
            v = r[c]
            cells.append("" if v is None else (f"{v:.4g}" if isinstance(v, float) else str(v)))
        lines.append(cells)
    widths = [max(len(line[i]) for line in lines) for i in range(len(cols))]
    text = "\n".join("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in lines)
    if result.notes:
        text += "\n" + "\n".join(f"note: {n}" for n in result.notes)
    return text
