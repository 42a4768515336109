"""Bump functions, their summability constants, and bump-averaged norms.

All logarithms here are the shifted base-2 logarithm

    shifted_log2(t) = log2(2 + t),

which is >= 1 everywhere, equals 1 at t = 0, and satisfies
shifted_log2(2^k) ~ k. Entropy bumps eps are increasing maps [1, inf) ->
[1, inf) from a small catalog; Orlicz bumps Phi are increasing Young-type
functions with Phi(0) = 0. Both are parsed from compact spec strings, e.g.
``log_pow:2`` or ``dlr:delta=1``.

The bump summability constant is

    k_epsilon(eps) = sum_{k>=0} eps(2^{2^k})^-1        (tower scale)

with a dyadic-scale variant sum_{k>=-1} eps(2^k)^-1 also exposed. Terms are
evaluated through shifted_log2(2^{2^k}) = 2^k + log2(1 + 2^{1-2^k}), so the
doubly exponential arguments never materialize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketingError, InvalidCubeError, InvalidSpecError
from .grid import DyadicCube, GridFunction, level_averages, require_weight
from .weights import rho, rho_all

_LN2 = math.log(2.0)


def shifted_log2(t):
    """log2(2 + t) for t >= 0; accepts scalars or arrays."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("shifted_log2 domain is t >= 0")
    out = np.log2(2.0 + arr)
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


def _tower_log(k: int) -> float:
    """shifted_log2(2^{2^k}) without forming 2^{2^k}."""
    e = 2.0 ** k
    if e == math.inf:
        return math.inf
    corr = 2.0 ** (1.0 - e) if e < 1070.0 else 0.0
    return e + math.log1p(corr) / _LN2


def _pow2_log(k: int) -> float:
    """shifted_log2(2^k) for any integer k (k = -1 included)."""
    if k <= 50:
        return math.log2(2.0 + 2.0 ** k)
    return k + math.log1p(2.0 ** (1 - k)) / _LN2


_EPS_PRIMARY = {"constant": "c", "log_pow": "p", "loglog": "delta"}
_PHI_PRIMARY = {"power": "r", "llog": "delta", "dlr": "delta"}


def _parse_spec_string(text: str, kind: str, primary: dict) -> tuple[str, dict]:
    name, _, rest = text.strip().partition(":")
    name = name.strip()
    if not name:
        raise InvalidSpecError(f"empty {kind} spec {text!r}")
    params: dict[str, float] = {}
    if rest.strip():
        for item in rest.split(","):
            item = item.strip()
            if not item:
                raise InvalidSpecError(f"empty parameter in {kind} spec {text!r}")
            if "=" in item:
                key, _, val = item.partition("=")
                key = key.strip()
            else:
                key = primary.get(name)
                if key is None:
                    raise InvalidSpecError(
                        f"{kind} member {name!r} takes no bare parameter"
                    )
                val = item
            if key in params:
                raise InvalidSpecError(f"duplicate parameter {key!r} in {text!r}")
            try:
                params[key] = float(val)
            except ValueError:
                raise InvalidSpecError(
                    f"non-numeric parameter {item!r} in {kind} spec {text!r}"
                ) from None
    return name, params


def _check_increasing(func, lo: float, label: str) -> None:
    """Sample on a log-spaced grid; reject decreasing or sub-1 values."""
    grid = np.concatenate(([lo], lo + np.logspace(-3, 9, 25)))
    vals = np.asarray([float(func(t)) for t in grid])
    if np.any(np.diff(vals) < -1e-12 * np.abs(vals[:-1])):
        raise InvalidSpecError(f"{label} is not nondecreasing")


@dataclass(frozen=True)
class EpsilonSpec:
    """An entropy bump: a named increasing map [1, inf) -> [1, inf).

    Catalog: ``constant`` (c >= 1), ``log_pow`` (shifted_log2(t)^p),
    ``loglog`` (shifted_log2(shifted_log2 t) *
    shifted_log2(shifted_log2(shifted_log2 t))^{1+delta}).
    """

    name: str
    params: tuple

    def __post_init__(self):
        p = dict(self.params)
        if self.name == "constant":
            keys, c = {"c"}, p.get("c")
            if set(p) != keys or c is None or c < 1.0:
                raise InvalidSpecError(f"constant bump needs c >= 1, got {p}")
        elif self.name == "log_pow":
            if set(p) != {"p"} or p["p"] < 0.0:
                raise InvalidSpecError(f"log_pow bump needs p >= 0, got {p}")
        elif self.name == "loglog":
            if set(p) != {"delta"} or p["delta"] < 0.0:
                raise InvalidSpecError(f"loglog bump needs delta >= 0, got {p}")
        else:
            raise InvalidSpecError(f"unknown bump {self.name!r}")
        object.__setattr__(self, "params", tuple(sorted(p.items())))
        _check_increasing(self, 1.0, f"bump {self.serialize()!r}")

    @classmethod
    def constant(cls, c: float) -> "EpsilonSpec":
        return cls("constant", (("c", float(c)),))

    @classmethod
    def log_pow(cls, p: float) -> "EpsilonSpec":
        return cls("log_pow", (("p", float(p)),))

    @classmethod
    def loglog(cls, delta: float) -> "EpsilonSpec":
        return cls("loglog", (("delta", float(delta)),))

    @classmethod
    def parse(cls, text: str) -> "EpsilonSpec":
        name, params = _parse_spec_string(text, "bump", _EPS_PRIMARY)
        return cls(name, tuple(sorted(params.items())))

    def serialize(self) -> str:
        items = ",".join(f"{k}={v!r}" for k, v in self.params)
        return f"{self.name}:{items}" if items else self.name

    def _eval_from_log(self, first_log):
        """Evaluate the bump given L1 = shifted_log2(t)."""
        p = dict(self.params)
        if self.name == "constant":
            like = np.asarray(first_log, dtype=np.float64)
            return np.full_like(like, p["c"]) if like.ndim else p["c"]
        if self.name == "log_pow":
            return np.power(first_log, p["p"])
        second = np.log2(2.0 + np.asarray(first_log, dtype=np.float64))
        third = np.log2(2.0 + second)
        return second * np.power(third, 1.0 + p["delta"])

    def __call__(self, t):
        arr = np.asarray(t, dtype=np.float64)
        if np.any(arr < 1.0 - 1e-9):
            raise ValueError("bump domain is t >= 1")
        # values an ulp below 1 (float noise in rho) are clipped to 1
        arr = np.maximum(arr, 1.0)
        out = self._eval_from_log(np.log2(2.0 + arr))
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out

    def at_tower(self, k: int) -> float:
        """eps(2^{2^k})."""
        return float(self._eval_from_log(_tower_log(k)))

    def at_pow2(self, k: int) -> float:
        """eps(2^k), defined for k >= -1."""
        return float(self._eval_from_log(_pow2_log(k)))


@dataclass(frozen=True)
class OrliczSpec:
    """An Orlicz bump Phi: increasing on (0, inf) with Phi(0) = 0.

    Catalog: ``power`` (t^r), ``llog`` (t * shifted_log2(t)^{1+delta}),
    ``dlr`` (t * shifted_log2(shifted_log2 t) *
    shifted_log2(shifted_log2(shifted_log2 t))^{1+delta}), and ``logprod``
    (t times a product of iterated shifted logs with exponents e1..e4).
    """

    name: str
    params: tuple

    def __post_init__(self):
        p = dict(self.params)
        if self.name == "power":
            if set(p) != {"r"} or p["r"] <= 0.0:
                raise InvalidSpecError(f"power bump needs r > 0, got {p}")
        elif self.name in ("llog", "dlr"):
            if set(p) != {"delta"} or p["delta"] < 0.0:
                raise InvalidSpecError(f"{self.name} bump needs delta >= 0, got {p}")
        elif self.name == "logprod":
            allowed = {"e1", "e2", "e3", "e4"}
            if not p or not set(p) <= allowed:
                raise InvalidSpecError(
                    f"logprod bump takes exponents e1..e4, got {p}"
                )
            if any(v < 0.0 for v in p.values()):
                raise InvalidSpecError("logprod exponents must be >= 0")
        else:
            raise InvalidSpecError(f"unknown Orlicz bump {self.name!r}")
        object.__setattr__(self, "params", tuple(sorted(p.items())))
        _check_increasing(self, 0.0, f"Orlicz bump {self.serialize()!r}")

    @classmethod
    def power(cls, r: float) -> "OrliczSpec":
        return cls("power", (("r", float(r)),))

    @classmethod
    def llog(cls, delta: float) -> "OrliczSpec":
        return cls("llog", (("delta", float(delta)),))

    @classmethod
    def dlr(cls, delta: float) -> "OrliczSpec":
        return cls("dlr", (("delta", float(delta)),))

    @classmethod
    def logprod(cls, **exponents) -> "OrliczSpec":
        return cls("logprod", tuple(sorted((k, float(v)) for k, v in exponents.items())))

    @classmethod
    def parse(cls, text: str) -> "OrliczSpec":
        name, params = _parse_spec_string(text, "Orlicz", _PHI_PRIMARY)
        return cls(name, tuple(sorted(params.items())))

    def serialize(self) -> str:
        items = ",".join(f"{k}={v!r}" for k, v in self.params)
        return f"{self.name}:{items}" if items else self.name

    def __call__(self, t):
        arr = np.asarray(t, dtype=np.float64)
        if np.any(arr < 0.0):
            raise ValueError("Orlicz bump domain is t >= 0")
        p = dict(self.params)
        if self.name == "power":
            out = np.power(arr, p["r"])
        elif self.name == "llog":
            out = arr * np.power(np.log2(2.0 + arr), 1.0 + p["delta"])
        elif self.name == "dlr":
            l2 = np.log2(2.0 + np.log2(2.0 + arr))
            l3 = np.log2(2.0 + l2)
            out = arr * l2 * np.power(l3, 1.0 + p["delta"])
        else:
            out = arr.astype(np.float64, copy=True)
            log_i = arr
            for i in range(1, 5):
                log_i = np.log2(2.0 + log_i)
                e = p.get(f"e{i}", 0.0)
                if e:
                    out = out * np.power(log_i, e)
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out


@dataclass(frozen=True)
class KEpsilonResult:
    value: float
    terms_used: int
    diverged: bool


def k_epsilon(
    eps: EpsilonSpec,
    tol: float = 1e-12,
    max_terms: int = 128,
    scale: str = "tower",
) -> KEpsilonResult:
    """Partial sum of the bump summability series.

    ``scale="tower"`` sums eps(2^{2^k})^-1 over k >= 0 (the default);
    ``scale="dyadic"`` sums eps(2^k)^-1 over k >= -1. Terms accumulate until
    one drops below tol or max_terms is reached; the diverged flag is set
    when max_terms is hit with nondecreasing terms (e.g. a constant bump),
    in which case the value is a partial sum only.
    """
    if scale not in ("tower", "dyadic"):
        raise InvalidSpecError(f"unknown k_epsilon scale {scale!r}")
    if tol <= 0 or max_terms < 1:
        raise ValueError("tol must be positive and max_terms >= 1")
    term_at = eps.at_tower if scale == "tower" else eps.at_pow2
    start = 0 if scale == "tower" else -1
    total = 0.0
    used = 0
    prev = None
    nondecreasing = True
    hit_max = False
    for k in range(start, start + max_terms):
        e = term_at(k)
        term = 0.0 if e == math.inf else 1.0 / e
        total += term
        used += 1
        if prev is not None and term < prev - 1e-300:
            nondecreasing = False
        prev = term
        if term < tol:
            break
    else:
        hit_max = True
    return KEpsilonResult(total, used, hit_max and nondecreasing)


def entropy_norm(
    w: GridFunction,
    cube: DyadicCube,
    eps: EpsilonSpec,
    variant: str = "log",
) -> float:
    """Entropy-bumped average of w on Q.

    ``full``: <w>_Q * rho_w(Q) * eps(rho_w(Q));
    ``log``:  <w>_Q * shifted_log2(rho_w(Q)) * eps(rho_w(Q)).
    Vacuous cubes give 0.
    """
    if variant not in ("full", "log"):
        raise ValueError(f"unknown entropy norm variant {variant!r}")
    require_weight(w)
    a, b = cube.cell_range(w.resolution)
    avg = float(np.mean(w.values[a:b]))
    if avg == 0.0:
        return 0.0
    r = rho(w, cube)
    factor = r if variant == "full" else shifted_log2(r)
    return avg * factor * eps(r)


def orlicz_norm(
    w: GridFunction,
    cube: DyadicCube,
    phi: OrliczSpec,
    tol: float = 1e-10,
) -> float:
    """Luxemburg norm inf{lam > 0 : <Phi(w/lam)>_Q <= 1} by bisection.

    The bracket grows or shrinks geometrically from lam0 = <w>_Q (at most 60
    doublings each way); bisection then runs to machine bracket width, and
    the result is certified by |<Phi(w/lam)>_Q - 1| <= tol. Identically-zero
    w on Q gives 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    require_weight(w)
    a, b = cube.cell_range(w.resolution)
    vals = w.values[a:b]
    lam0 = float(np.mean(vals))
    if lam0 == 0.0:
        return 0.0

    def phi_mean(lam: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.mean(phi(vals / lam)))

    m0 = phi_mean(lam0)
    if m0 > 1.0:
        lo, m_lo = lam0, m0
        hi = lam0
        m_prev = m0
        for _ in range(60):
            hi *= 2.0
            m_hi = phi_mean(hi)
            if m_hi > m_prev * (1.0 + 1e-9):
                raise InvalidSpecError("Phi-mean is not decreasing in lambda")
            m_prev = m_hi
            if m_hi <= 1.0:
                break
        else:
            raise BracketingError("could not bracket the unit Phi-mean from above")
    else:
        hi, m_hi = lam0, m0
        lo = lam0
        m_prev = m0
        for _ in range(60):
            lo *= 0.5
            m_lo = phi_mean(lo)
            if m_lo < m_prev * (1.0 - 1e-9) and m_lo < 1.0:
                raise InvalidSpecError("Phi-mean is not decreasing in lambda")
            m_prev = m_lo
            if m_lo >= 1.0:
                break
        else:
            raise BracketingError("could not bracket the unit Phi-mean from below")

    # Bisect all the way to machine bracket width; tol only certifies the
    # result, it never loosens it.
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * hi:
            break
        m = phi_mean(mid)
        if m > 1.0:
            lo = mid
        else:
            hi = mid
    m = phi_mean(mid)
    if abs(m - 1.0) > tol:
        raise BracketingError(
            f"bisection stalled with |Phi-mean - 1| = {abs(m - 1.0):.3e} > tol"
        )
    return mid


def _paint_max(resolution: int, per_level: list) -> np.ndarray:
    """Downward max ladder over per-level value arrays (-inf = absent)."""
    acc = per_level[0]
    for level in range(1, resolution + 1):
        acc = np.maximum(np.repeat(acc, 2), per_level[level])
    return acc


def m_entropy(
    w: GridFunction,
    eps: EpsilonSpec,
    collections=None,
    variant: str = "log",
) -> GridFunction:
    """Entropy-bump maximal function: per cell, the max of entropy_norm over
    the cubes containing it.

    ``collections`` is an optional list of cube iterables; None means all
    dyadic cubes of the grid. Cells covered by no cube get 0.
    """
    if variant not in ("full", "log"):
        raise ValueError(f"unknown entropy norm variant {variant!r}")
    require_weight(w)
    n_levels = w.resolution + 1
    table = rho_all(w)
    avgs = level_averages(w.values)
    norms = []
    for level in range(n_levels):
        r = np.array(table.values[level], copy=True)
        vac = table.vacuous[level]
        r[vac] = 1.0
        factor = r if variant == "full" else np.log2(2.0 + r)
        vals = avgs[level] * factor * eps(r)
        vals[vac] = 0.0
        norms.append(vals)
    if collections is not None:
        if not isinstance(collections, (list, tuple)) or len(collections) == 0:
            raise ValueError("collections must be a nonempty list of cube sets")
        allowed = [np.zeros(1 << level, dtype=bool) for level in range(n_levels)]
        for coll in collections:
            for cube in coll:
                if cube.level > w.resolution:
                    raise InvalidCubeError(
                        f"cube level {cube.level} exceeds resolution {w.resolution}"
                    )
                allowed[cube.level][cube.index] = True
        norms = [
            np.where(allowed[level], norms[level], -math.inf)
            for level in range(n_levels)
        ]
    out = _paint_max(w.resolution, norms)
    out = np.where(np.isneginf(out), 0.0, out)
    return GridFunction(w.resolution, out)


def m_orlicz(w: GridFunction, phi: OrliczSpec, tol: float = 1e-10) -> GridFunction:
    """Orlicz maximal function: per cell, sup of orlicz_norm over all dyadic
    cubes containing it."""
    require_weight(w)
    per_level = []
    for level in range(w.resolution + 1):
        vals = np.array(
            [
                orlicz_norm(w, DyadicCube(level, j), phi, tol=tol)
                for j in range(1 << level)
            ]
        )
        per_level.append(vals)
    return GridFunction(w.resolution, _paint_max(w.resolution, per_level))


def m_coeff(f: GridFunction, alpha, cubes) -> GridFunction:
    """Coefficient maximal function: per cell, max over the given cubes Q
    containing it of alpha[Q] * <|f|>_Q; 0 where no cube covers.

    ``alpha`` maps DyadicCube -> nonnegative real and must cover every cube.
    """
    n_levels = f.resolution + 1
    avgs = level_averages(np.abs(f.values))
    per_level = [np.full(1 << level, -math.inf) for level in range(n_levels)]
    for cube in cubes:
        if cube.level > f.resolution:
            raise InvalidCubeError(
                f"cube level {cube.level} exceeds resolution {f.resolution}"
            )
        try:
            a = alpha[cube]
        except KeyError:
            raise ValueError(f"missing coefficient for {cube}") from None
        if a < 0:
            raise ValueError(f"coefficient for {cube} is negative")
        val = a * avgs[cube.level][cube.index]
        if val > per_level[cube.level][cube.index]:
            per_level[cube.level][cube.index] = val
    out = _paint_max(f.resolution, per_level)
    out = np.where(np.isneginf(out), 0.0, out)
    return GridFunction(f.resolution, out)
