"""Randomized experiments against the weighted weak-type bounds.

Every experiment is driven by a TrialConfig and returns an
ExperimentReport. Reports are deterministic functions of the config: trial
i draws from a generator seeded by (seed, i), and serialization avoids
timestamps and environment-dependent fields, so re-running a config byte
reproduces its JSON and CSV output.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .bumps import (
    EpsilonSpec,
    OrliczSpec,
    k_epsilon,
    m_coeff,
    m_entropy,
    m_orlicz,
    shifted_log2,
)
from .errors import ConfigError
from .grid import (
    ROOT,
    CellSet,
    DyadicCube,
    GridFunction,
    integral,
    require_weight,
    superlevel_weight,
    weak_l1_norm,
)
from .sparse import (
    HaarSpec,
    cz_stopping_collection,
    haar_transform,
    proof_replay,
    sparse_dominate_bilinear,
)
from .weights import (
    a1_constant,
    a1_generator,
    ainf_constant,
    ainf_lemma_ratio,
    dyadic_maximal,
    power_weight,
)

VERSION = "0.1.0"

MAX_RESOLUTION_ENV = "ENDPOINT_LAB_MAX_N"

DEFAULT_WEIGHT_FAMILIES = ("power:0", "power:0.5", "power:0.9", "power:0.99", "a1gen")
DEFAULT_FUNCTION_FAMILIES = ("indicator", "random", "haar_packet", "adversarial")
DEFAULT_S_LIST = (0.0, 0.5, 0.9, 0.96875)


def resolution_cap() -> int:
    """Grid-size guard rail, overridable through the environment."""
    raw = os.environ.get(MAX_RESOLUTION_ENV)
    if raw is None:
        return 18
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(
            f"{MAX_RESOLUTION_ENV} must be an integer, got {raw!r}"
        ) from None
    if value < 0:
        raise ConfigError(f"{MAX_RESOLUTION_ENV} must be nonnegative, got {value}")
    return value


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for one trial; streams for distinct indices are independent."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


@dataclass(frozen=True)
class TrialConfig:
    resolution: int = 10
    trials: int = 100
    seed: int = 0
    eps: str = "log_pow:2"
    phi: str | None = None
    weight_families: tuple = DEFAULT_WEIGHT_FAMILIES
    function_families: tuple = DEFAULT_FUNCTION_FAMILIES
    stopping_a: float = 4.0
    bound: float = 64.0

    def __post_init__(self):
        if self.resolution < 0:
            raise ConfigError(f"negative resolution {self.resolution}")
        if self.trials < 1:
            raise ConfigError(f"need at least one trial, got {self.trials}")
        if self.seed < 0:
            raise ConfigError(f"negative seed {self.seed}")
        if not self.stopping_a > 2.0:
            raise ConfigError(f"stopping factor must exceed 2, got {self.stopping_a}")
        if not self.bound > 0.0:
            raise ConfigError(f"bound must be positive, got {self.bound}")
        if not self.weight_families:
            raise ConfigError("weight_families must be nonempty")
        if not self.function_families:
            raise ConfigError("function_families must be nonempty")
        object.__setattr__(self, "weight_families", tuple(self.weight_families))
        object.__setattr__(self, "function_families", tuple(self.function_families))
        self.eps_spec()  # fail fast on bad grammar
        self.phi_spec()

    def eps_spec(self) -> EpsilonSpec:
        return EpsilonSpec.parse(self.eps)

    def phi_spec(self) -> OrliczSpec | None:
        return None if self.phi is None else OrliczSpec.parse(self.phi)

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "trials": self.trials,
            "seed": self.seed,
            "eps": self.eps,
            "phi": self.phi,
            "weight_families": list(self.weight_families),
            "function_families": list(self.function_families),
            "stopping_a": self.stopping_a,
            "bound": self.bound,
        }


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    weight: str
    function: str | None
    s: float | None
    k_eps: float | None
    a1: float | None
    ainf: float | None
    quotient: float
    normalized_quotient: float | None
    passed: bool | None

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "weight": self.weight,
            "function": self.function,
            "s": self.s,
            "k_eps": self.k_eps,
            "a1": self.a1,
            "ainf": self.ainf,
            "quotient": self.quotient,
            "normalized_quotient": self.normalized_quotient,
            "passed": self.passed,
        }


CSV_COLUMNS = ("trial", "s", "K_eps", "a1", "ainf", "quotient", "normalized_quotient", "pass")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(value, ".17g")


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    records: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    pass_flags: dict = field(default_factory=dict)
    version: str = VERSION

    @property
    def all_passed(self) -> bool:
        return all(self.pass_flags.values())

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "version": self.version,
            "config": self.config,
            "aggregates": self.aggregates,
            "pass_flags": self.pass_flags,
            "all_passed": self.all_passed,
            "records": [rec.to_dict() for rec in self.records],
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for rec in self.records:
                row = (
                    rec.trial,
                    rec.s,
                    rec.k_eps,
                    rec.a1,
                    rec.ainf,
                    rec.quotient,
                    rec.normalized_quotient,
                    rec.passed,
                )
                fh.write(",".join(_csv_cell(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Random instance generators.
# ---------------------------------------------------------------------------


def _draw_weight(rng, resolution: int, family: str):
    """Returns (weight, label, s-or-None)."""
    if family.startswith("power:"):
        s = float(family.split(":", 1)[1])
        return power_weight(s, resolution), family, s
    if family == "a1gen":
        g = GridFunction(resolution, rng.standard_normal(1 << resolution))
        s = float(rng.uniform(0.3, 0.95))
        return a1_generator(g, s), family, None
    if family == "random":
        vals = np.exp(rng.normal(0.0, 1.5, 1 << resolution))
        return GridFunction(resolution, vals), family, None
    raise ConfigError(f"unknown weight family {family!r}")


def _draw_function(rng, resolution: int, family: str, majorant=None) -> GridFunction:
    size = 1 << resolution
    if family == "indicator":
        level = int(rng.integers(0, resolution + 1))
        index = int(rng.integers(0, 1 << level))
        vals = np.zeros(size)
        a, b = DyadicCube(level, index).cell_range(resolution)
        vals[a:b] = 1.0
        return GridFunction(resolution, vals)
    if family == "random":
        return GridFunction(resolution, rng.standard_normal(size))
    if family == "haar_packet":
        vals = np.zeros(size)
        for _ in range(int(rng.integers(1, 6))):
            level = int(rng.integers(0, max(resolution, 1)))
            level = min(level, resolution - 1) if resolution else 0
            if resolution == 0:
                break
            index = int(rng.integers(0, 1 << level))
            cube = DyadicCube(level, index)
            a, b = cube.cell_range(resolution)
            mid = (a + b) // 2
            coeff = float(rng.normal()) / math.sqrt(cube.measure)
            vals[a:mid] += coeff
            vals[mid:b] -= coeff
        if not np.any(vals):
            vals[0] = 1.0
        return GridFunction(resolution, vals)
    if family == "adversarial":
        # All L1 mass on the cell where the majorant is cheapest.
        vals = np.zeros(size)
        target = 0 if majorant is None else int(np.argmin(majorant))
        vals[target] = float(size)
        return GridFunction(resolution, vals)
    raise ConfigError(f"unknown function family {family!r}")


def weak_type_quotient(g: GridFunction, w: GridFunction, f: GridFunction, majorant) -> float:
    """weak-L1(w) size of g over the L1 norm of f against the majorant."""
    maj = majorant.values if isinstance(majorant, GridFunction) else np.asarray(majorant)
    denom = float(np.dot(np.abs(f.values), maj) * f.cell_width)
    if denom <= 0.0:
        raise ValueError("majorant norm of f vanishes, quotient undefined")
    return weak_l1_norm(g, w) / denom


# ---------------------------------------------------------------------------
# Coefficient maximal function: endpoint check with constant one.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FsCheckResult:
    lam: float
    lhs: float
    rhs: float
    passed: bool


def fs_check(cubes, alpha: dict, f: GridFunction, w: GridFunction, lam: float,
             rel_tol: float = 1e-9) -> FsCheckResult:
    """Check  w({M_alpha f > lam}) <= (1/lam) integral |f| M_alpha w.

    M_alpha is the coefficient maximal function over the given cubes; the
    inequality holds with constant exactly one, so only float slack is
    allowed on the right.
    """
    require_weight(w)
    if lam <= 0.0:
        raise ValueError(f"level must be positive, got {lam}")
    mf = m_coeff(f, alpha, cubes)
    mw = m_coeff(w, alpha, cubes)
    lhs = superlevel_weight(mf, lam, w)
    rhs = float(np.dot(np.abs(f.values), mw.values) * f.cell_width) / lam
    return FsCheckResult(lam, lhs, rhs, lhs <= rhs * (1.0 + rel_tol))


def fs_random_suite(cfg: TrialConfig) -> ExperimentReport:
    """Random weights, functions, cube families, coefficients, and levels."""
    report = ExperimentReport(kind="fs", config=cfg.to_dict())
    n = cfg.resolution
    worst_slack = -math.inf
    for i in range(cfg.trials):
        rng = trial_rng(cfg.seed, i)
        wfam = cfg.weight_families[i % len(cfg.weight_families)]
        ffam = cfg.function_families[i % len(cfg.function_families)]
        w, wlabel, _ = _draw_weight(rng, n, wfam)
        f = _draw_function(rng, n, ffam, majorant=w.values)
        cubes = [
            DyadicCube(level, index)
            for level in range(n + 1)
            for index in range(1 << level)
            if rng.random() < 0.4
        ]
        if not cubes:
            cubes = [ROOT]
        alpha = {cube: float(rng.uniform(0.1, 2.0)) for cube in cubes}
        mf_vals = m_coeff(f, alpha, cubes).values
        positive = mf_vals[mf_vals > 0]
        base = float(np.quantile(positive, float(rng.uniform(0.1, 0.9)))) if positive.size else 1.0
        lam = max(base * float(rng.uniform(0.3, 1.2)), 1e-300)
        res = fs_check(cubes, alpha, f, w, lam)
        slack = 0.0 if res.rhs == 0.0 else res.lhs / res.rhs
        worst_slack = max(worst_slack, slack)
        report.records.append(
            TrialRecord(
                trial=i, weight=wlabel, function=ffam, s=None, k_eps=None,
                a1=None, ainf=None, quotient=slack, normalized_quotient=None,
                passed=res.passed,
            )
        )
    report.aggregates = {
        "worst_lhs_over_rhs": worst_slack,
        "trials": cfg.trials,
    }
    report.pass_flags = {"constant_one": all(r.passed for r in report.records)}
    return report


# ---------------------------------------------------------------------------
# Main weak-type experiment and its A1 corollary.
# ---------------------------------------------------------------------------


def main_theorem_experiment(cfg: TrialConfig) -> ExperimentReport:
    """Random sign transforms against the entropy-majorant weak-type bound.

    The quotient weak-L1(w)(T f) / integral |f| M_eps w must stay below
    bound * K_eps across all trials.
    """
    eps = cfg.eps_spec()
    ke = k_epsilon(eps)
    limit = math.inf if ke.diverged else cfg.bound * ke.value
    report = ExperimentReport(kind="main", config=cfg.to_dict())
    n = cfg.resolution
    max_q = 0.0
    argmax = None
    for i in range(cfg.trials):
        rng = trial_rng(cfg.seed, i)
        wfam = cfg.weight_families[i % len(cfg.weight_families)]
        ffam = cfg.function_families[i % len(cfg.function_families)]
        w, wlabel, s = _draw_weight(rng, n, wfam)
        majorant = m_entropy(w, eps)
        f = _draw_function(rng, n, ffam, majorant=majorant.values)
        spec = HaarSpec.from_rng(n, rng)
        tf = haar_transform(spec, f)
        q = weak_type_quotient(tf, w, f, majorant)
        if q > max_q:
            max_q = q
            argmax = i
        report.records.append(
            TrialRecord(
                trial=i, weight=wlabel, function=ffam, s=s, k_eps=ke.value,
                a1=None, ainf=None, quotient=q, normalized_quotient=q / ke.value
                if ke.value > 0 else None,
                passed=q <= limit,
            )
        )
    report.aggregates = {
        "k_eps": ke.value,
        "k_eps_terms": ke.terms_used,
        "k_eps_diverged": ke.diverged,
        "bound": cfg.bound,
        "limit": limit,
        "max_quotient": max_q,
        "argmax_trial": argmax,
        "mean_quotient": float(np.mean([r.quotient for r in report.records])),
    }
    report.pass_flags = {"weak_type_bound": max_q <= limit}
    return report


def corollary_experiment(cfg: TrialConfig, s_list=DEFAULT_S_LIST) -> ExperimentReport:
    """Power weights with exponents from s_list, quotient against the plain
    L1(w) norm, normalized by a1 * shifted_log2(ainf).

    The normalized maxima must be uniform in s: max over s at most four
    times the median over s.
    """
    if not s_list:
        raise ConfigError("s_list must be nonempty")
    report = ExperimentReport(kind="corollary", config=cfg.to_dict())
    report.config["s_list"] = [float(s) for s in s_list]
    n = cfg.resolution
    per_s_max: dict[str, float] = {}
    for s_idx, s in enumerate(s_list):
        w = power_weight(float(s), n)
        a1 = a1_constant(w)
        ainf = ainf_constant(w)
        norm_factor = a1 * float(shifted_log2(ainf))
        best = 0.0
        for i in range(cfg.trials):
            rng = trial_rng(cfg.seed, s_idx * cfg.trials + i)
            ffam = cfg.function_families[i % len(cfg.function_families)]
            f = _draw_function(rng, n, ffam, majorant=w.values)
            spec = HaarSpec.from_rng(n, rng)
            tf = haar_transform(spec, f)
            q = weak_type_quotient(tf, w, f, w)
            normalized = q / norm_factor
            best = max(best, normalized)
            report.records.append(
                TrialRecord(
                    trial=s_idx * cfg.trials + i, weight=f"power:{float(s)}",
                    function=ffam, s=float(s), k_eps=None, a1=a1, ainf=ainf,
                    quotient=q, normalized_quotient=normalized, passed=None,
                )
            )
        per_s_max[repr(float(s))] = best
    values = list(per_s_max.values())
    max_over_s = max(values)
    median_over_s = float(np.median(values))
    factor = math.inf if median_over_s == 0.0 else max_over_s / median_over_s
    report.aggregates = {
        "per_s_max": per_s_max,
        "max_over_s": max_over_s,
        "median_over_s": median_over_s,
        "factor": factor,
    }
    report.pass_flags = {"uniform_in_s": factor <= 4.0}
    return report


# ---------------------------------------------------------------------------
# Structural sweeps.
# ---------------------------------------------------------------------------


def ainf_lemma_sweep(cfg: TrialConfig) -> ExperimentReport:
    """Random (weight, cube, subset) triples for the localized ratio
    w(E) shifted_log2(|Q|/|E|) / (w(Q) rho); must stay at or below 8."""
    report = ExperimentReport(kind="ainf", config=cfg.to_dict())
    n = cfg.resolution
    max_ratio = 0.0
    for i in range(cfg.trials):
        rng = trial_rng(cfg.seed, i)
        wfam = cfg.weight_families[i % len(cfg.weight_families)]
        w, wlabel, s = _draw_weight(rng, n, wfam)
        level = int(rng.integers(0, n + 1))
        index = int(rng.integers(0, 1 << level))
        cube = DyadicCube(level, index)
        a, b = cube.cell_range(n)
        sel = rng.random(b - a) < float(rng.uniform(0.05, 0.95))
        if not sel.any():
            sel[int(rng.integers(0, b - a))] = True
        mask = np.zeros(1 << n, dtype=bool)
        mask[a:b] = sel
        ratio = ainf_lemma_ratio(w, cube, CellSet(n, mask))
        max_ratio = max(max_ratio, ratio)
        report.records.append(
            TrialRecord(
                trial=i, weight=wlabel, function=None, s=s, k_eps=None,
                a1=None, ainf=None, quotient=ratio, normalized_quotient=None,
                passed=ratio <= 8.0,
            )
        )
    report.aggregates = {"max_ratio": max_ratio}
    report.pass_flags = {"ratio_bound": max_ratio <= 8.0}
    return report


def replay_random_suite(cfg: TrialConfig) -> ExperimentReport:
    """Random stopping collections, weights, and target sets through the
    full decomposition replay; every internal check must hold with measured
    constants at or below 16."""
    eps = cfg.eps_spec()
    report = ExperimentReport(kind="replay", config=cfg.to_dict())
    n = cfg.resolution
    worst = 0.0
    all_ok = True
    vacuous = 0
    for i in range(cfg.trials):
        rng = trial_rng(cfg.seed, i)
        wfam = cfg.weight_families[i % len(cfg.weight_families)]
        ffam = cfg.function_families[i % len(cfg.function_families)]
        w, wlabel, s = _draw_weight(rng, n, wfam)
        # heavy-tailed base so stopping trees reach a few generations
        base = GridFunction(n, np.exp(rng.normal(0.0, 2.0, 1 << n)))
        coll = cz_stopping_collection(base, ROOT, cfg.stopping_a)
        majorant = m_entropy(w, eps) if ffam == "adversarial" else None
        f = _draw_function(
            rng, n, ffam, majorant=None if majorant is None else majorant.values
        )
        g_mask = rng.random(1 << n) < 0.5
        g_set = CellSet(n, g_mask)
        if integral(w, g_set) <= 0.0:
            g_set = CellSet.full(n)
        rep = proof_replay(coll, f, w, g_set, eps, constant_bound=16.0)
        measured = rep.max_measured_constant()
        worst = max(worst, measured)
        all_ok = all_ok and rep.all_ok
        vacuous += int(rep.vacuous)
        report.records.append(
            TrialRecord(
                trial=i, weight=wlabel, function=ffam, s=s, k_eps=None,
                a1=None, ainf=None, quotient=measured, normalized_quotient=None,
                passed=rep.all_ok,
            )
        )
    report.aggregates = {
        "max_measured_constant": worst,
        "vacuous_trials": vacuous,
    }
    report.pass_flags = {
        "decomposition": all_ok,
        "constants": worst <= 16.0,
    }
    return report


def domination_random_suite(cfg: TrialConfig) -> ExperimentReport:
    """Random sign transforms and test pairs against the sparse bilinear
    form over the stopping cubes of |f| + |g|; the measured pairing-to-form
    ratio must stay at or below cfg.bound."""
    report = ExperimentReport(kind="domination", config=cfg.to_dict())
    n = cfg.resolution
    max_ratio = 0.0
    argmax = None
    for i in range(cfg.trials):
        rng = trial_rng(cfg.seed, i)
        ffam = cfg.function_families[i % len(cfg.function_families)]
        gfam = cfg.function_families[(i + 1) % len(cfg.function_families)]
        f = _draw_function(rng, n, ffam)
        g = _draw_function(rng, n, gfam)
        spec = HaarSpec.from_rng(n, rng)
        res = sparse_dominate_bilinear(spec, f, g, a=cfg.stopping_a)
        if res.measured_ratio > max_ratio:
            max_ratio = res.measured_ratio
            argmax = i
        report.records.append(
            TrialRecord(
                trial=i, weight="none", function=f"{ffam}|{gfam}", s=None,
                k_eps=None, a1=None, ainf=None, quotient=res.measured_ratio,
                normalized_quotient=None, passed=res.measured_ratio <= cfg.bound,
            )
        )
    report.aggregates = {
        "max_ratio": max_ratio,
        "argmax_trial": argmax,
        "bound": cfg.bound,
        "mean_ratio": float(np.mean([r.quotient for r in report.records])),
    }
    report.pass_flags = {"domination_bound": max_ratio <= cfg.bound}
    return report


def maximal_comparison(
    w: GridFunction, eps: EpsilonSpec, phi: OrliczSpec | None = None,
    config: dict | None = None,
) -> ExperimentReport:
    """Descriptive pointwise comparison of the dyadic, entropy, and Orlicz
    maximal functions of one weight. No pass flags; the output is a profile."""
    require_weight(w)
    md = dyadic_maximal(w).values
    me = m_entropy(w, eps).values
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_e = np.where(md > 0, me / md, np.nan)
    aggregates = {
        "resolution": w.resolution,
        "entropy_over_dyadic_min": float(np.nanmin(ratio_e)),
        "entropy_over_dyadic_max": float(np.nanmax(ratio_e)),
        "entropy_over_dyadic_mean": float(np.nanmean(ratio_e)),
        "entropy_dominates_dyadic": bool(np.all(me >= md * (1.0 - 1e-12))),
    }
    if phi is not None:
        mo = m_orlicz(w, phi).values
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio_o = np.where(md > 0, mo / md, np.nan)
        aggregates.update(
            {
                "orlicz_over_dyadic_min": float(np.nanmin(ratio_o)),
                "orlicz_over_dyadic_max": float(np.nanmax(ratio_o)),
                "orlicz_over_dyadic_mean": float(np.nanmean(ratio_o)),
            }
        )
    return ExperimentReport(
        kind="compare",
        config=config or {"resolution": w.resolution},
        aggregates=aggregates,
        pass_flags={},
    )
