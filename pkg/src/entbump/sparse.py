"""Sparse collections of dyadic cubes and the operators built on them.

A collection S is (strictly) 1/2-sparse when the sets

    E_Q = Q \\ union(maximal S-members strictly inside Q)

satisfy |E_Q| > |Q|/2 for every member; the E_Q are then pairwise disjoint.
Sparseness implies the Carleson packing bound sum_{Q' subset Q} |Q'| <= 2|Q|,
which in turn lets any Carleson collection be split into eight parts (by
generation depth mod 8) each satisfying the stronger condition that the
strict descendants of a member cover at most a quarter of it.

Measures are tracked as integer cell counts, so every geometric check here
is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bumps import EpsilonSpec, m_coeff, m_entropy, shifted_log2
from .errors import (
    FileFormatError,
    InvalidCubeError,
    ResolutionMismatchError,
    SparsePreconditionError,
)
from .grid import (
    ROOT,
    CellSet,
    DyadicCube,
    GridFunction,
    integral,
    level_averages,
    level_sums,
    require_weight,
    restrict,
)
from .weights import rho_all


class SparseCollection:
    """An ordered, de-duplicated set of dyadic cubes on one grid."""

    def __init__(self, resolution: int, cubes):
        if resolution < 0:
            raise ValueError(f"negative resolution {resolution}")
        self.resolution = resolution
        seen = set()
        members = []
        for cube in cubes:
            if cube.level > resolution:
                raise InvalidCubeError(
                    f"cube level {cube.level} exceeds resolution {resolution}"
                )
            key = (cube.level, cube.index)
            if key not in seen:
                seen.add(key)
                members.append(cube)
        members.sort(key=lambda q: (q.level, q.index))
        self.cubes: tuple[DyadicCube, ...] = tuple(members)
        self._keys = frozenset(seen)

    def __iter__(self):
        return iter(self.cubes)

    def __len__(self):
        return len(self.cubes)

    def __contains__(self, cube: DyadicCube) -> bool:
        return (cube.level, cube.index) in self._keys

    def __eq__(self, other):
        if not isinstance(other, SparseCollection):
            return NotImplemented
        return self.resolution == other.resolution and self.cubes == other.cubes

    def __repr__(self):
        return f"SparseCollection(n={self.resolution}, {len(self.cubes)} cubes)"

    def s_parent(self, cube: DyadicCube):
        """Nearest strict ancestor of the cube inside the collection."""
        level, index = cube.level, cube.index
        for lev in range(level - 1, -1, -1):
            j = index >> (level - lev)
            if (lev, j) in self._keys:
                return DyadicCube(lev, j)
        return None

    def generation_depths(self) -> dict:
        """Number of strict ancestors within the collection, per member."""
        depths: dict[DyadicCube, int] = {}
        for cube in self.cubes:  # sorted by level, parents come first
            parent = self.s_parent(cube)
            depths[cube] = 0 if parent is None else depths[parent] + 1
        return depths

    def children_map(self) -> dict:
        """Member -> its maximal strict members (direct S-children)."""
        out: dict[DyadicCube, list] = {cube: [] for cube in self.cubes}
        roots = []
        for cube in self.cubes:
            parent = self.s_parent(cube)
            if parent is None:
                roots.append(cube)
            else:
                out[parent].append(cube)
        return out

    def save(self, path) -> None:
        """Text format: resolution line, then one 'level index' line per cube."""
        with open(path, "w") as fh:
            fh.write(f"{self.resolution}\n")
            for cube in self.cubes:
                fh.write(f"{cube.level} {cube.index}\n")

    @classmethod
    def load(cls, path) -> "SparseCollection":
        with open(path) as fh:
            lines = fh.read().splitlines()
        resolution = None
        cubes = []
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if resolution is None:
                try:
                    resolution = int(line)
                except ValueError:
                    raise FileFormatError(
                        path, lineno, f"expected an integer resolution, got {line!r}"
                    ) from None
                if resolution < 0:
                    raise FileFormatError(path, lineno, "negative resolution")
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FileFormatError(
                    path, lineno, f"expected 'level index', got {line!r}"
                )
            try:
                level, index = int(parts[0]), int(parts[1])
            except ValueError:
                raise FileFormatError(path, lineno, f"non-integer cube {line!r}") from None
            try:
                cube = DyadicCube(level, index)
                if level > resolution:
                    raise InvalidCubeError("cube finer than resolution")
            except InvalidCubeError as exc:
                raise FileFormatError(path, lineno, str(exc)) from None
            cubes.append(cube)
        if resolution is None:
            raise FileFormatError(path, 1, "empty file, expected a resolution line")
        return cls(resolution, cubes)


@dataclass(frozen=True)
class CarlesonReport:
    passed: bool
    lam: float
    include_self: bool
    worst_cube: DyadicCube | None
    worst_ratio: float


def carleson_check(
    s: SparseCollection, lam: float = 2.0, include_self: bool = False
) -> CarlesonReport:
    """Packing check: for every member Q, sum of |Q'| over members Q'
    strictly inside Q (plus Q itself if include_self) is <= lam |Q|."""
    counts = {(q.level, q.index): 0 for q in s.cubes}
    for cube in s.cubes:
        cells = cube.cell_count(s.resolution)
        for lev in range(cube.level - 1, -1, -1):
            key = (lev, cube.index >> (cube.level - lev))
            if key in counts:
                counts[key] += cells
    worst_cube = None
    worst_ratio = -math.inf
    for cube in s.cubes:
        own = cube.cell_count(s.resolution)
        total = counts[(cube.level, cube.index)] + (own if include_self else 0)
        ratio = total / own
        if ratio > worst_ratio:
            worst_ratio = ratio
            worst_cube = cube
    if worst_cube is None:
        return CarlesonReport(True, lam, include_self, None, 0.0)
    return CarlesonReport(worst_ratio <= lam, lam, include_self, worst_cube, worst_ratio)


@dataclass(frozen=True)
class EqCertification:
    """Result of the disjoint-E_Q construction on a collection."""

    certified: bool
    collection: SparseCollection
    eq_sets: dict
    violator: DyadicCube | None
    worst_ratio: float


def _eq_cell_counts(s: SparseCollection) -> dict:
    """Exact |E_Q| in cells: |Q| minus the (disjoint) maximal children."""
    children = s.children_map()
    return {
        q: q.cell_count(s.resolution)
        - sum(c.cell_count(s.resolution) for c in children[q])
        for q in s.cubes
    }


def build_disjoint_eq(s: SparseCollection) -> EqCertification:
    """Construct E_Q = Q minus its maximal strict members and certify the
    strict 1/2-sparseness |E_Q| > |Q|/2 for every member."""
    children = s.children_map()
    eq_sets = {}
    violator = None
    worst = math.inf
    for cube in s.cubes:
        mask = np.zeros(1 << s.resolution, dtype=bool)
        a, b = cube.cell_range(s.resolution)
        mask[a:b] = True
        for child in children[cube]:
            ca, cb = child.cell_range(s.resolution)
            mask[ca:cb] = False
        eq_sets[cube] = CellSet(s.resolution, mask)
        ratio = int(mask.sum()) / cube.cell_count(s.resolution)
        if ratio < worst:
            worst = ratio
            if ratio <= 0.5:
                violator = violator or cube
    if not s.cubes:
        return EqCertification(True, s, {}, None, 1.0)
    certified = worst > 0.5
    return EqCertification(certified, s, eq_sets, None if certified else violator, worst)


def certify_half_sparse(s: SparseCollection) -> bool:
    """Counts-only fast path for the strict 1/2-sparseness certificate."""
    counts = _eq_cell_counts(s)
    return all(2 * counts[q] > q.cell_count(s.resolution) for q in s.cubes)


@dataclass(frozen=True)
class StrongSparsenessReport:
    passed: bool
    worst_cube: DyadicCube | None
    worst_ratio: float


def strong_sparseness_check(
    s: SparseCollection, bound: float = 0.25
) -> StrongSparsenessReport:
    """Check |union of strict S-descendants of Q| <= bound * |Q| per member.

    The union of strict descendants equals the disjoint union of the maximal
    S-children, so this is an exact integer computation.
    """
    children = s.children_map()
    worst_cube = None
    worst = -math.inf
    for cube in s.cubes:
        covered = sum(c.cell_count(s.resolution) for c in children[cube])
        ratio = covered / cube.cell_count(s.resolution)
        if ratio > worst:
            worst = ratio
            worst_cube = cube
    if worst_cube is None:
        return StrongSparsenessReport(True, None, 0.0)
    return StrongSparsenessReport(worst <= bound, worst_cube, worst)


def split_eight(s: SparseCollection) -> list[SparseCollection]:
    """Partition a Carleson collection into 8 parts by generation depth
    mod 8; each part satisfies the quarter condition of
    strong_sparseness_check.

    Requires the packing bound with lam = 2 (raises otherwise).
    """
    report = carleson_check(s, lam=2.0)
    if not report.passed:
        raise SparsePreconditionError(
            f"collection fails the Carleson bound (worst ratio {report.worst_ratio:.3f} "
            f"at {report.worst_cube})"
        )
    depths = s.generation_depths()
    buckets: list[list] = [[] for _ in range(8)]
    for cube in s.cubes:
        buckets[depths[cube] % 8].append(cube)
    return [SparseCollection(s.resolution, b) for b in buckets]


def bilinear_form(collections, f: GridFunction, g: GridFunction) -> float:
    """sum over collections and members of |Q| <f>_Q <g>_Q, with the
    absolute-value averages of this package."""
    if f.resolution != g.resolution:
        raise ResolutionMismatchError("f and g live on different grids")
    favg = level_averages(np.abs(f.values))
    gavg = level_averages(np.abs(g.values))
    total = 0.0
    for coll in collections:
        if coll.resolution != f.resolution:
            raise ResolutionMismatchError("collection resolution does not match f")
        for cube in coll:
            total += cube.measure * favg[cube.level][cube.index] * gavg[cube.level][cube.index]
    return float(total)


def sparse_operator(s: SparseCollection, f: GridFunction) -> GridFunction:
    """A_S f(x) = sum over members Q containing x of <|f|>_Q."""
    if s.resolution != f.resolution:
        raise ResolutionMismatchError("collection resolution does not match f")
    favg = level_averages(np.abs(f.values))
    per_level = [np.zeros(1 << level) for level in range(f.resolution + 1)]
    for cube in s.cubes:
        per_level[cube.level][cube.index] += favg[cube.level][cube.index]
    acc = per_level[0]
    for level in range(1, f.resolution + 1):
        acc = np.repeat(acc, 2) + per_level[level]
    return GridFunction(f.resolution, acc)


def cz_stopping_collection(
    f: GridFunction, top: DyadicCube, a: float
) -> SparseCollection:
    """Calderon-Zygmund stopping cubes of f below the top cube.

    From each selected cube P (starting with top), select the maximal strict
    subcubes Q with <|f|>_Q > a <|f|>_P and recurse. For a > 2 the selected
    children of P cover less than |P|/a, so the output is strictly
    1/2-sparse.
    """
    if not a > 2.0:
        raise ValueError(f"stopping factor must exceed 2, got {a}")
    favg = level_averages(np.abs(f.values))

    def avg(cube: DyadicCube) -> float:
        return float(favg[cube.level][cube.index])

    if avg(top) == 0.0:
        raise ValueError("f is (absolutely) degenerate on the top cube")
    selected = [top]
    frontier = [top]
    n = f.resolution
    while frontier:
        parent = frontier.pop()
        threshold = a * avg(parent)
        if parent.level == n:
            continue
        stack = list(parent.children())
        while stack:
            cube = stack.pop()
            if avg(cube) > threshold:
                selected.append(cube)
                frontier.append(cube)
            elif cube.level < n:
                stack.extend(cube.children())
    return SparseCollection(n, selected)


class HaarSpec:
    """A sign assignment on all cubes of levels 0..N-1.

    Signs are stored per level as arrays of +/-1; the assignment must be
    total, which the array layout guarantees.
    """

    def __init__(self, resolution: int, signs):
        if resolution < 0:
            raise ValueError(f"negative resolution {resolution}")
        self.resolution = resolution
        stored = []
        if len(signs) != resolution:
            raise ValueError(
                f"expected sign arrays for {resolution} levels, got {len(signs)}"
            )
        for level, arr in enumerate(signs):
            a = np.asarray(arr, dtype=np.float64).reshape(-1)
            if a.size != (1 << level):
                raise ValueError(f"level {level} needs {1 << level} signs")
            if not np.all(np.abs(a) == 1.0):
                raise ValueError("signs must be +1 or -1")
            a.setflags(write=False)
            stored.append(a)
        self.signs = tuple(stored)

    @classmethod
    def constant(cls, resolution: int, sign: int = 1) -> "HaarSpec":
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return cls(
            resolution,
            [np.full(1 << level, float(sign)) for level in range(resolution)],
        )

    @classmethod
    def from_rng(cls, resolution: int, rng) -> "HaarSpec":
        return cls(
            resolution,
            [
                rng.choice(np.array([-1.0, 1.0]), size=1 << level)
                for level in range(resolution)
            ],
        )

    @classmethod
    def from_mapping(cls, resolution: int, mapping) -> "HaarSpec":
        signs = [np.ones(1 << level) for level in range(resolution)]
        for cube, sign in mapping.items():
            signs[cube.level][cube.index] = float(sign)
        return cls(resolution, signs)

    def sign(self, cube: DyadicCube) -> float:
        return float(self.signs[cube.level][cube.index])


def haar_transform(spec: HaarSpec, f: GridFunction) -> GridFunction:
    """T f = sum over cubes Q (levels < N) of sigma_Q <f, h_Q> h_Q with
    L2-normalized Haar functions.

    The per-cube term at a cell x in Q is sigma_Q (<f>_child(x) - <f>_Q) for
    the child of Q containing x, so one signed down-sweep computes T f; with
    all signs +1 the sweep telescopes to f minus its global mean.
    """
    if spec.resolution != f.resolution:
        raise ResolutionMismatchError("sign assignment resolution does not match f")
    avgs = level_averages(f.values)
    acc = np.zeros(1)
    for level in range(f.resolution):
        sigma = np.repeat(spec.signs[level], 2)
        parent = np.repeat(avgs[level], 2)
        acc = np.repeat(acc, 2) + sigma * (avgs[level + 1] - parent)
    return GridFunction(f.resolution, acc)


@dataclass(frozen=True)
class DominationResult:
    collections: list
    pairing: float
    form: float
    measured_ratio: float


def sparse_dominate_bilinear(
    spec: HaarSpec, f: GridFunction, g: GridFunction, a: float = 4.0
) -> DominationResult:
    """Measure |<T f, g>| against the sparse form over the stopping cubes of
    |f| + |g|.

    Returns the collections used, both sides, and the ratio; a zero form
    with nonzero pairing is reported as an infinite ratio (it cannot occur
    for admissible inputs).
    """
    if f.resolution != g.resolution or f.resolution != spec.resolution:
        raise ResolutionMismatchError("f, g, and the sign assignment must share a grid")
    if not np.any(f.values != 0) or not np.any(g.values != 0):
        raise ValueError("f and g must not be identically zero")
    base = GridFunction(f.resolution, np.abs(f.values) + np.abs(g.values))
    s = cz_stopping_collection(base, ROOT, a)
    tf = haar_transform(spec, f)
    pairing = float(np.dot(tf.values, g.values) * f.cell_width)
    form = bilinear_form([s], f, g)
    if form > 0.0:
        ratio = abs(pairing) / form
    else:
        ratio = 0.0 if pairing == 0.0 else math.inf
    return DominationResult([s], pairing, form, ratio)


# ---------------------------------------------------------------------------
# Proof replay: the weak-type decomposition, step by step.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubeClassRecord:
    """Where one member cube landed in the decomposition."""

    level: int
    index: int
    part: int
    r: int | None
    k: int | None
    generation: int | None
    eq1_ok: bool | None
    discard_reason: str | None


@dataclass(frozen=True)
class BandRecord:
    """Per (part, rho-bin, level-class) verification record."""

    part: int
    r: int
    k: int
    regime: str  # "coarse" or "far"
    cube_count: int
    band_sum: float  # sum over the class of |Q| <f>_Q <w 1_G'>_Q
    eq_disjoint_ok: bool
    coarse_constant: float | None = None
    coarse_ok: bool | None = None
    qt_empty: bool | None = None
    qt_measure_ok: bool | None = None
    qt_weight_constant: float | None = None
    qt_weight_ok: bool | None = None
    disjoint_constant: float | None = None
    disjoint_ok: bool | None = None


@dataclass
class ProofReplayReport:
    resolution: int
    normalization: float
    w_g: float
    w_h: float
    w_gprime: float
    threshold: float
    fs_ok: bool
    doubling_ok: bool
    cube_records: list = field(default_factory=list)
    band_records: list = field(default_factory=list)
    constant_bound: float = 16.0
    vacuous: bool = False

    @property
    def all_ok(self) -> bool:
        if not (self.fs_ok and self.doubling_ok):
            return False
        for rec in self.cube_records:
            if rec.discard_reason is None and not rec.eq1_ok:
                return False
        for band in self.band_records:
            if not band.eq_disjoint_ok:
                return False
            for flag in (band.coarse_ok, band.qt_measure_ok, band.qt_weight_ok, band.disjoint_ok):
                if flag is False:
                    return False
        return True

    def max_measured_constant(self) -> float:
        worst = 0.0
        for band in self.band_records:
            for value in (band.coarse_constant, band.qt_weight_constant, band.disjoint_constant):
                if value is not None and value > worst:
                    worst = value
        return worst

    def to_json_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "normalization": self.normalization,
            "w_g": self.w_g,
            "w_h": self.w_h,
            "w_gprime": self.w_gprime,
            "threshold": self.threshold,
            "fs_ok": self.fs_ok,
            "doubling_ok": self.doubling_ok,
            "vacuous": self.vacuous,
            "constant_bound": self.constant_bound,
            "all_ok": self.all_ok,
            "max_measured_constant": self.max_measured_constant(),
            "cubes": [
                {
                    "level": rec.level,
                    "index": rec.index,
                    "part": rec.part,
                    "r": rec.r,
                    "k": rec.k,
                    "generation": rec.generation,
                    "eq1_ok": rec.eq1_ok,
                    "discard_reason": rec.discard_reason,
                }
                for rec in self.cube_records
            ],
            "bands": [
                {
                    "part": band.part,
                    "r": band.r,
                    "k": band.k,
                    "regime": band.regime,
                    "cube_count": band.cube_count,
                    "band_sum": band.band_sum,
                    "eq_disjoint_ok": band.eq_disjoint_ok,
                    "coarse_constant": band.coarse_constant,
                    "coarse_ok": band.coarse_ok,
                    "qt_empty": band.qt_empty,
                    "qt_measure_ok": band.qt_measure_ok,
                    "qt_weight_constant": band.qt_weight_constant,
                    "qt_weight_ok": band.qt_weight_ok,
                    "disjoint_constant": band.disjoint_constant,
                    "disjoint_ok": band.disjoint_ok,
                }
                for band in self.band_records
            ],
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _level_class(avg_f: float, w_g: float) -> int:
    """The k >= -1 with avg_f in (4^{-k-1}, 4^{-k}] / w(G)."""
    x = avg_f * w_g
    k = max(-1, int(math.floor(-math.log(x, 4.0))) - 1)
    while 4.0 ** (-k) < x:
        k -= 1
    while k < 1100 and 4.0 ** (-k - 1) >= x:
        k += 1
    return k


def _rho_bin(rho_value: float) -> tuple[int, float, bool]:
    """The r >= 0 with shifted_log2(rho) in (2^r, 2^{r+1}]; returns
    (r, shifted_log2(rho), band check flag)."""
    val = shifted_log2(rho_value)
    r = 0
    while val > 2.0 ** (r + 1):
        r += 1
    ok = (2.0 ** r) < val <= 2.0 ** (r + 1)
    return r, val, ok


def proof_replay(
    s: SparseCollection,
    f: GridFunction,
    w: GridFunction,
    g_set: CellSet,
    eps: EpsilonSpec,
    constant_bound: float = 16.0,
    rel_tol: float = 1e-9,
) -> ProofReplayReport:
    """Replay the weak-type decomposition over a sparse collection.

    Steps, mirrored exactly: normalize f in L1 of the entropy majorant; carve
    out H (maximal cubes with <f>_Q above 4/w(G)) and check w(H) <= w(G)/4
    and the doubling w(G) <= 2 w(G'); split S into eight strongly sparse
    parts; within each part bin members by rho and by the dyadic size of
    <f>_Q; peel generations, build the disjoint E_Q sets, and verify the
    coarse bound (k <= 10 * 2^r) or the far-regime Q_t and disjointness
    bounds (k > 10 * 2^r) with measured constants against constant_bound.
    """
    require_weight(w)
    n = f.resolution
    if w.resolution != n or s.resolution != n or g_set.resolution != n:
        raise ResolutionMismatchError("f, w, S, and G must share one grid")
    w_g = integral(w, g_set)
    if w_g <= 0.0:
        raise ValueError("w(G) must be positive")
    if not certify_half_sparse(s):
        raise SparsePreconditionError("collection is not strictly 1/2-sparse")

    majorant = m_entropy(w, eps, variant="log")
    denom = float(np.dot(np.abs(f.values), majorant.values) * f.cell_width)
    threshold = 4.0 / w_g
    if denom == 0.0:
        # f is identically zero: every class is empty, all checks vacuous.
        return ProofReplayReport(
            resolution=n,
            normalization=0.0,
            w_g=w_g,
            w_h=0.0,
            w_gprime=w_g,
            threshold=threshold,
            fs_ok=True,
            doubling_ok=True,
            constant_bound=constant_bound,
            vacuous=True,
        )
    fn = GridFunction(n, f.values / denom)
    favg = level_averages(np.abs(fn.values))

    # H: maximal dyadic cubes with <f>_Q above the threshold.
    h_mask = np.zeros(1 << n, dtype=bool)
    stack = [ROOT]
    while stack:
        cube = stack.pop()
        if favg[cube.level][cube.index] > threshold:
            a, b = cube.cell_range(n)
            h_mask[a:b] = True
        elif cube.level < n:
            stack.extend(cube.children())
    h_set = CellSet(n, h_mask)
    w_h = integral(w, h_set)
    fs_ok = w_h <= 0.25 * w_g * (1.0 + rel_tol)

    g_prime = g_set.difference(h_set)
    w_gprime = integral(w, g_prime)
    doubling_ok = w_g <= 2.0 * w_gprime * (1.0 + rel_tol)

    # Per-cube w(G' ∩ Q) via one sum ladder over w restricted to G'.
    wgp_sums = level_sums(restrict(w, g_prime).values)
    cell_width = f.cell_width

    def w_gprime_on(cube: DyadicCube) -> float:
        return float(wgp_sums[cube.level][cube.index]) * cell_width

    table = rho_all(w)
    report = ProofReplayReport(
        resolution=n,
        normalization=denom,
        w_g=w_g,
        w_h=w_h,
        w_gprime=w_gprime,
        threshold=threshold,
        fs_ok=fs_ok,
        doubling_ok=doubling_ok,
        constant_bound=constant_bound,
    )

    parts = split_eight(s)
    wavg = level_averages(w.values)
    for part_idx, part in enumerate(parts):
        groups: dict[tuple[int, int], list] = {}
        bin_members: dict[int, list] = {}
        for cube in part:
            avg_f = float(favg[cube.level][cube.index])
            if avg_f > threshold * (1.0 + 1e-12):
                # The cube qualifies for H, so it is covered by H and meets
                # G' in a null set.
                assert w_gprime_on(cube) == 0.0
                report.cube_records.append(
                    CubeClassRecord(
                        cube.level, cube.index, part_idx, None, None, None, None,
                        "above-threshold",
                    )
                )
                continue
            if avg_f == 0.0:
                report.cube_records.append(
                    CubeClassRecord(
                        cube.level, cube.index, part_idx, None, None, None, None,
                        "zero-average",
                    )
                )
                continue
            k = _level_class(avg_f, w_g)
            r, _, eq1_ok = _rho_bin(table.effective(cube))
            groups.setdefault((r, k), []).append(cube)
            bin_members.setdefault(r, []).append(cube)
            # generation filled in below
            report.cube_records.append(
                CubeClassRecord(cube.level, cube.index, part_idx, r, k, None, eq1_ok, None)
            )
        rec_lookup = {
            (rec.level, rec.index): i
            for i, rec in enumerate(report.cube_records)
            if rec.part == part_idx and rec.discard_reason is None
        }

        # Coarse right-hand sides share M^S w over the full rho-bin.
        coarse_rhs: dict[int, float] = {}
        for r, members in bin_members.items():
            alpha = {cube: 1.0 for cube in members}
            m_s = m_coeff(w, alpha, members)
            coarse_rhs[r] = float(
                np.dot(np.abs(fn.values), m_s.values) * cell_width
            )

        for (r, k), members in sorted(groups.items()):
            sub = SparseCollection(n, members)
            gens = sub.generation_depths()
            max_gen = max(gens.values())
            by_gen: dict[int, list] = {}
            for cube in members:
                by_gen.setdefault(gens[cube], []).append(cube)
                i = rec_lookup[(cube.level, cube.index)]
                old = report.cube_records[i]
                report.cube_records[i] = CubeClassRecord(
                    old.level, old.index, old.part, old.r, old.k, gens[cube],
                    old.eq1_ok, None,
                )

            # E_Q = Q minus the next generation of the class.
            gen_masks = {}
            for gen, gen_members in by_gen.items():
                mask = np.zeros(1 << n, dtype=bool)
                for cube in gen_members:
                    a, b = cube.cell_range(n)
                    mask[a:b] = True
                gen_masks[gen] = mask
            eq_masks = {}
            for cube in members:
                a, b = cube.cell_range(n)
                mask = np.zeros(1 << n, dtype=bool)
                mask[a:b] = True
                nxt = gen_masks.get(gens[cube] + 1)
                if nxt is not None:
                    mask &= ~nxt
                eq_masks[cube] = mask
            union = np.zeros(1 << n, dtype=bool)
            total_cells = 0
            for cube in members:
                union |= eq_masks[cube]
                total_cells += int(eq_masks[cube].sum())
            eq_disjoint_ok = total_cells == int(union.sum())

            band_sum = sum(
                float(favg[c.level][c.index]) * w_gprime_on(c) for c in members
            )

            if k <= 10 * (1 << r):
                rhs = coarse_rhs[r]
                if band_sum == 0.0:
                    constant = 0.0
                elif rhs == 0.0:
                    constant = math.inf
                else:
                    constant = band_sum / rhs
                report.band_records.append(
                    BandRecord(
                        part=part_idx, r=r, k=k, regime="coarse",
                        cube_count=len(members), band_sum=band_sum,
                        eq_disjoint_ok=eq_disjoint_ok,
                        coarse_constant=constant,
                        coarse_ok=constant <= constant_bound * (1.0 + rel_tol),
                    )
                )
            else:
                t = 1 << k  # generations to skip; far regime has k >= 11
                qt_empty = True
                qt_measure_ok = True
                qt_weight_constant = 0.0
                disjoint_sum = 0.0
                two_pow_r = 2.0 ** (1 << r)
                for cube in members:
                    gen = gens[cube]
                    qt_cells = 0
                    qt_w = 0.0
                    if gen + t <= max_gen:
                        for deep in by_gen.get(gen + t, []):
                            if cube.contains(deep):
                                qt_cells += deep.cell_count(n)
                                da, db = deep.cell_range(n)
                                qt_w += float(w.values[da:db].sum()) * cell_width
                    if qt_cells:
                        qt_empty = False
                        # |Q_t| <= 4^-t |Q|, exact in cell counts
                        if qt_cells * (4 ** t) > cube.cell_count(n):
                            qt_measure_ok = False
                        wa, wb = cube.cell_range(n)
                        w_q = float(w.values[wa:wb].sum()) * cell_width
                        if w_q > 0.0:
                            c = qt_w * (2.0 ** k) / (two_pow_r * w_q)
                            qt_weight_constant = max(qt_weight_constant, c)
                    # disjointness part: descendants within t generations
                    avg_f = float(favg[cube.level][cube.index])
                    for offset in range(0, min(t, max_gen - gen + 1)):
                        for mid in by_gen.get(gen + offset, []):
                            if cube.contains(mid):
                                eq_w = float(
                                    np.dot(
                                        w.values[eq_masks[mid]],
                                        g_prime.mask[eq_masks[mid]].astype(np.float64),
                                    )
                                ) * cell_width
                                disjoint_sum += avg_f * eq_w
                disjoint_limit = constant_bound * (2.0 ** (-k)) * (1.0 + rel_tol)
                report.band_records.append(
                    BandRecord(
                        part=part_idx, r=r, k=k, regime="far",
                        cube_count=len(members), band_sum=band_sum,
                        eq_disjoint_ok=eq_disjoint_ok,
                        qt_empty=qt_empty,
                        qt_measure_ok=qt_measure_ok,
                        qt_weight_constant=qt_weight_constant,
                        qt_weight_ok=qt_weight_constant
                        <= constant_bound * (1.0 + rel_tol),
                        disjoint_constant=disjoint_sum * (2.0 ** k),
                        disjoint_ok=(disjoint_sum == 0.0) or (disjoint_sum <= disjoint_limit),
                    )
                )
    return report
