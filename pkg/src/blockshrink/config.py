"""Experiment configuration: YAML files with nested sections.

Example::

    kind: rate_study
    basis: daub4
    coarse_level: 3
    alpha: 1.0
    M: 5000.0
    x0: 0.5
    neighborhood: {rule: fixed, c_n: 0.5}
    estimators: [blockjs]
    functions:
      - {name: lacunary, params: {terms: 16}}
    n_grid: [1024, 2048, 4096]
    reps: 200
    seed: 20240601
    J_max: 18
    output: results/rate_study

Neighborhood rules are ``fixed`` (``c_n``), ``d_n`` (``kind`` one of
constant, log_root, log, loglog and ``scale``; ``c_n = d_n n^{-1/(1+2 alpha)}``)
and ``gamma`` (``c_n = n^{-gamma}``). An optional ``kernel`` turns the
neighborhood risk into the kernel-weighted risk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from . import estimators as est
from .model import FUNCTION_NAMES
from .risk import D_KINDS, KERNELS, ORACLE_ESTIMATORS, REGIME_KINDS, d_sequence
from .wavelets import available_bases

KINDS = ("risk_table", "rate_study", "superefficiency", "oracle_suite")
RULES = ("fixed", "d_n", "gamma")


class ConfigError(ValueError):
    """Invalid configuration; ``diagnostics`` lists every problem with its field path."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class NeighborhoodRule:
    rule: str = "fixed"
    c_n: float | None = 0.5
    kind: str | None = None
    scale: float = 1.0
    gamma: float | None = None
    kernel: str | None = None

    def half_width(self, n: int, alpha: float) -> tuple[float, float | None]:
        """(c_n, d_n) for sample size n, with c_n capped at 1/2."""
        if self.rule == "fixed":
            return float(self.c_n), None
        if self.rule == "gamma":
            return min(0.5, float(n) ** (-self.gamma)), None
        d_n = d_sequence(self.kind, self.scale, n, alpha)
        return min(0.5, d_n * float(n) ** (-1.0 / (1.0 + 2.0 * alpha))), d_n


@dataclass(frozen=True)
class FunctionEntry:
    name: str
    params: dict = field(default_factory=dict)

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n_grid: tuple[int, ...]
    reps: int
    seed: int
    output: str
    basis: str = "daub4"
    coarse_level: int = 3
    alpha: float = 1.0
    M: float = 1.0
    M_prime: float | None = None
    x0: float = 0.5
    neighborhood: NeighborhoodRule = NeighborhoodRule()
    estimators: tuple = ("blockjs",)
    functions: tuple[FunctionEntry, ...] = (FunctionEntry("alpha_cusp"),)
    J_max: int | None = None
    threads: int = 1
    # superefficiency
    regime: str | None = None
    B_exponent: float = 0.5
    # oracle_suite
    oracle_reps: int = 20000

    def with_overrides(self, seed=None, reps=None, output=None, threads=None) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if reps is not None:
            changes["reps"] = int(reps)
        if output is not None:
            changes["output"] = str(output)
        if threads is not None:
            changes["threads"] = int(threads)
        cfg = replace(self, **changes)
        problems = check(cfg)
        if problems:
            raise ConfigError(problems)
        return cfg


def _is_power_of_two(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 2 and v & (v - 1) == 0


def _number(raw: dict, key: str, problems: list, path: str, default=None, positive=False):
    value = raw.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{path}{key}: expected a number, got {value!r}")
        return None
    if positive and not value > 0:
        problems.append(f"{path}{key}: must be positive, got {value}")
    return float(value)


# alpha falls back to the experiment's alpha
REQUIRED_PARAMS = {"superefficient": ("D",), "local_constant": ("B_n",)}


def _estimators(raw, problems) -> tuple:
    out = []
    known = set(est.ESTIMATORS) | set(ORACLE_ESTIMATORS)
    for i, entry in enumerate(raw if isinstance(raw, list) else [raw]):
        if isinstance(entry, str):
            name, params = entry, {}
        elif isinstance(entry, dict) and "name" in entry:
            name, params = entry["name"], dict(entry.get("params") or {})
        else:
            problems.append(f"estimators[{i}]: expected a name or {{name, params}}")
            continue
        if name not in known:
            problems.append(f"estimators[{i}].name: unknown estimator {name!r}")
        for key in REQUIRED_PARAMS.get(name, ()):
            if not isinstance(params.get(key), (int, float)) or params[key] <= 0:
                problems.append(f"estimators[{i}].params.{key}: {name} needs a positive number")
        out.append((name, params))
    return tuple(out)


def _functions(raw, problems) -> tuple[FunctionEntry, ...]:
    out = []
    for i, entry in enumerate(raw if isinstance(raw, list) else [raw]):
        if isinstance(entry, str):
            fe = FunctionEntry(entry)
        elif isinstance(entry, dict) and "name" in entry:
            fe = FunctionEntry(entry["name"], dict(entry.get("params") or {}))
        else:
            problems.append(f"functions[{i}]: expected a name or {{name, params}}")
            continue
        if fe.name not in FUNCTION_NAMES:
            problems.append(f"functions[{i}].name: unknown function {fe.name!r}")
        out.append(fe)
    return tuple(out)


def _neighborhood(raw, problems) -> NeighborhoodRule:
    p = "neighborhood."
    if raw is None:
        return NeighborhoodRule()
    if not isinstance(raw, dict):
        problems.append("neighborhood: expected a mapping")
        return NeighborhoodRule()
    rule = raw.get("rule", "fixed")
    kernel = raw.get("kernel")
    if kernel is not None and kernel not in KERNELS:
        problems.append(f"{p}kernel: unknown kernel {kernel!r}; choose from {sorted(KERNELS)}")
    if rule == "fixed":
        c_n = _number(raw, "c_n", problems, p, default=None)
        if c_n is None:
            problems.append(f"{p}c_n: required for rule 'fixed'")
        elif not 0 < c_n <= 0.5:
            problems.append(f"{p}c_n: must lie in (0, 1/2], got {c_n}")
        return NeighborhoodRule("fixed", c_n, kernel=kernel)
    if rule == "d_n":
        kind = raw.get("kind")
        if kind not in D_KINDS:
            problems.append(f"{p}kind: must be one of {D_KINDS}, got {kind!r}")
        scale = _number(raw, "scale", problems, p, default=1.0, positive=True)
        return NeighborhoodRule("d_n", None, kind, scale if scale is not None else 1.0, kernel=kernel)
    if rule == "gamma":
        gamma = _number(raw, "gamma", problems, p, default=None)
        if gamma is None:
            problems.append(f"{p}gamma: required for rule 'gamma'")
        elif not 0 < gamma <= 1:
            problems.append(f"{p}gamma: must lie in (0, 1], got {gamma}")
        return NeighborhoodRule("gamma", None, gamma=gamma, kernel=kernel)
    problems.append(f"{p}rule: must be one of {RULES}, got {rule!r}")
    return NeighborhoodRule()


def parse(raw) -> tuple[ExperimentConfig | None, list[str]]:
    """Build a config from a parsed mapping; returns (config, diagnostics)."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        return None, ["<root>: expected a mapping of fields"]
    known = set(ExperimentConfig.__dataclass_fields__)
    for key in raw:
        if key not in known:
            problems.append(f"{key}: unknown field")
    for key in ("kind", "n_grid", "reps", "seed", "output"):
        if key not in raw:
            problems.append(f"{key}: required field missing")

    kind = raw.get("kind")
    if "kind" in raw and kind not in KINDS:
        problems.append(f"kind: must be one of {KINDS}, got {kind!r}")
    grid = raw.get("n_grid", [])
    if not isinstance(grid, list) or not grid:
        problems.append("n_grid: expected a non-empty list")
        grid = []
    else:
        for i, v in enumerate(grid):
            if not _is_power_of_two(v):
                problems.append(f"n_grid[{i}]: {v!r} is not a power of two")
        if any(not b > a for a, b in zip(grid, grid[1:])):
            problems.append("n_grid: must be strictly increasing")
    reps = raw.get("reps")
    if "reps" in raw and (not isinstance(reps, int) or isinstance(reps, bool) or reps < 2):
        problems.append(f"reps: must be an integer >= 2, got {reps!r}")
    seed = raw.get("seed")
    if "seed" in raw and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
        problems.append(f"seed: must be a non-negative integer, got {seed!r}")
    basis = raw.get("basis", "daub4")
    if basis not in available_bases():
        problems.append(f"basis: unknown basis {basis!r}; choose from {available_bases()}")
    coarse = raw.get("coarse_level", 3)
    if not isinstance(coarse, int) or coarse < 0:
        problems.append(f"coarse_level: must be a non-negative integer, got {coarse!r}")
    alpha = _number(raw, "alpha", problems, "", default=1.0, positive=True)
    M = _number(raw, "M", problems, "", default=1.0, positive=True)
    M_prime = _number(raw, "M_prime", problems, "", default=None, positive=True)
    if M_prime is not None and M is not None and not M_prime < M:
        problems.append(f"M_prime: must be below M={M}, got {M_prime}")
    x0 = _number(raw, "x0", problems, "", default=0.5)
    if x0 is not None and not 0 < x0 < 1:
        problems.append(f"x0: must lie in (0, 1), got {x0}")
    J_max = raw.get("J_max")
    if J_max is not None and (not isinstance(J_max, int) or J_max < 1):
        problems.append(f"J_max: must be a positive integer, got {J_max!r}")
    threads = raw.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        problems.append(f"threads: must be a positive integer, got {threads!r}")
    regime = raw.get("regime")
    nb = _neighborhood(raw.get("neighborhood"), problems)
    if kind == "superefficiency":
        if regime not in REGIME_KINDS:
            problems.append(f"regime: must be one of {list(REGIME_KINDS)}, got {regime!r}")
        elif nb.rule != "d_n" or nb.kind not in REGIME_KINDS[regime]:
            problems.append(
                f"neighborhood.kind: {regime} needs rule d_n with kind in {REGIME_KINDS[regime]}")
        if M_prime is None:
            problems.append("M_prime: required for superefficiency experiments")
        if isinstance(grid, list) and len(set(grid)) < 3:
            problems.append("n_grid: superefficiency needs at least 3 values of n")
    if kind == "rate_study" and isinstance(grid, list) and len(grid) < 3:
        problems.append("n_grid: rate_study needs at least 3 values of n")
    B_exp = _number(raw, "B_exponent", problems, "", default=0.5, positive=True)
    oracle_reps = raw.get("oracle_reps", 20000)
    if not isinstance(oracle_reps, int) or oracle_reps < 2:
        problems.append(f"oracle_reps: must be an integer >= 2, got {oracle_reps!r}")
    ests = _estimators(raw.get("estimators", ["blockjs"]), problems)
    funcs = _functions(raw.get("functions", ["alpha_cusp"]), problems)

    if problems:
        return None, problems
    cfg = ExperimentConfig(
        kind=kind, n_grid=tuple(grid), reps=reps, seed=seed, output=str(raw["output"]),
        basis=basis, coarse_level=coarse, alpha=alpha, M=M, M_prime=M_prime, x0=x0,
        neighborhood=nb, estimators=ests, functions=funcs, J_max=J_max, threads=threads,
        regime=regime, B_exponent=B_exp, oracle_reps=oracle_reps,
    )
    return cfg, check(cfg)


def check(cfg: ExperimentConfig) -> list[str]:
    """Invariants that also apply after command-line overrides."""
    problems = []
    if cfg.reps < 2:
        problems.append(f"reps: must be at least 2, got {cfg.reps}")
    if cfg.seed < 0:
        problems.append(f"seed: must be non-negative, got {cfg.seed}")
    if cfg.threads < 1:
        problems.append(f"threads: must be positive, got {cfg.threads}")
    nb = cfg.neighborhood
    for n in cfg.n_grid:
        c_n, _ = nb.half_width(n, cfg.alpha)
        if not c_n > 0 or math.isnan(c_n):
            problems.append(f"neighborhood: c_n={c_n} at n={n} is not positive")
    return problems


def load(path) -> ExperimentConfig:
    """Read and validate a config file; raises ConfigError listing every problem."""
    cfg, problems = parse(read(path))
    if problems:
        raise ConfigError(problems)
    return cfg


def read(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc.strerror}"]) from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<file>: cannot parse {path}: {exc}"]) from exc


def validate(path) -> list[str]:
    """Every violated invariant of the config at ``path`` (empty when valid)."""
    try:
        _, problems = parse(read(path))
    except ConfigError as exc:
        return exc.diagnostics
    return problems
