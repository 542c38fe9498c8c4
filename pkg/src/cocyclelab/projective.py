"""Projectivized fiber dynamics.

Empirical stand-ins for the fiber disintegrations of an invariant measure:
orbits of the projectivized skew product are binned by base cell, the
per-cell atom clouds are compared through exact Wasserstein-1 on the
projective line (circle of circumference pi) or a fixed bounded-Lipschitz
dictionary in higher dimension, and holonomy invariance is tested by
pushing one cell's cloud to another along a leaf.  Cells never visited are
omitted from the returned map.

The common-invariant-measure test for a matrix pair is a three-stage
heuristic (bounded word norms, invariant sums of generalized eigenspaces,
finite eigen-direction orbits); a PossiblyCommon verdict claims nothing
beyond the residual of the witness it returns.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .base import (
    STABLE_SLOPE,
    UNSTABLE_SLOPE,
    BaseSystem,
    SymbolSequence,
    TorusPoint,
    orbit_coords,
    sample,
    step,
)
from .cocycles import CocycleSpec, evaluate_orbit
from .errors import ConfigError, NumericalError, RefusalError
from .holonomy import stable_holonomy, unstable_holonomy
from .spectrum import _mc_core_width, lyapunov_spectrum

__all__ = [
    "ProjPoint",
    "EmpiricalMeasure",
    "empirical_measure",
    "Partition",
    "box_partition",
    "proj_step",
    "empirical_fiber_measures",
    "pushforward",
    "measure_distance",
    "MeasureTestOptions",
    "MeasureVerdict",
    "common_invariant_measure_test",
    "leaf_pairs",
    "DisintegrationReport",
    "disintegration_invariance_test",
]


class ProjPoint:
    """A point of projective space, stored as its canonical representative.

    The representative is the unit vector whose first nonzero coordinate
    is real and positive, so [v] and [-v] (and [cv] for complex c) store
    identical data."""

    __slots__ = ("v",)

    def __init__(self, v):
        w = np.asarray(v)
        if w.ndim != 1 or w.size < 2:
            raise ConfigError("a projective point needs a vector of length >= 2")
        dtype = np.complex128 if np.iscomplexobj(w) else np.float64
        w = w.astype(dtype)
        n = float(np.linalg.norm(w))
        if not math.isfinite(n) or n == 0.0:
            raise ConfigError("a projective point needs a nonzero finite vector")
        # skip the division when the norm is already 1 up to a few ulps, so
        # construction is idempotent and identity pushforwards reproduce
        # atoms bitwise
        if abs(n - 1.0) > 8.0 * np.finfo(np.float64).eps:
            w = w / n
        i = int(np.flatnonzero(w)[0])
        pivot = w[i]
        if dtype is np.complex128:
            w = w * (np.conj(pivot) / abs(pivot))
        elif pivot < 0.0:
            w = -w
        w.setflags(write=False)
        object.__setattr__(self, "v", w)

    def __setattr__(self, name, value):
        raise AttributeError("ProjPoint is immutable")

    @property
    def d(self) -> int:
        return self.v.size

    def angle(self) -> float:
        """Coordinate on the projective line seen as [0, pi). Real d=2 only."""
        if self.d != 2 or np.iscomplexobj(self.v):
            raise ConfigError("angle() applies to real projective points in d = 2")
        return math.atan2(self.v[1], self.v[0]) % math.pi

    def __eq__(self, other):
        return isinstance(other, ProjPoint) and np.array_equal(self.v, other.v)

    def __repr__(self):
        return f"ProjPoint({self.v.tolist()!r})"


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finitely many weighted projective atoms; weights positive, sum 1."""

    atoms: tuple

    def __post_init__(self):
        if len(self.atoms) < 1:
            raise ConfigError("an empirical measure needs at least one atom")
        total = 0.0
        for p, w in self.atoms:
            if not isinstance(p, ProjPoint):
                raise ConfigError("atoms must pair a ProjPoint with a weight")
            if not (w > 0.0 and math.isfinite(w)):
                raise ConfigError(f"atom weights must be positive, got {w}")
            total += w
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"atom weights must sum to 1, got {total!r}")

    @property
    def d(self) -> int:
        return self.atoms[0][0].d


def empirical_measure(pairs) -> EmpiricalMeasure:
    """Normalize a list of (vector-or-ProjPoint, weight) pairs to a measure."""
    pairs = list(pairs)
    total = sum(w for _, w in pairs)
    if not (total > 0.0 and math.isfinite(total)):
        raise ConfigError("total weight must be positive and finite")
    atoms = tuple(
        (p if isinstance(p, ProjPoint) else ProjPoint(p), w / total) for p, w in pairs
    )
    return EmpiricalMeasure(atoms)


def _atom_arrays(m: EmpiricalMeasure):
    V = np.stack([p.v for p, _ in m.atoms])
    w = np.array([w for _, w in m.atoms])
    return V, w


# --- base partitions ---------------------------------------------------------


@dataclass(frozen=True)
class Partition:
    """Finite partition of the base into boxes.

    CatMap: a depth x depth coordinate grid.  FullShift: cylinders fixed by
    the symbols at indices -depth..depth.  resolution bounds the base
    distance between two points sharing a cell."""

    kind: str
    depth: int
    resolution: float

    def cell(self, x):
        if self.kind == "catmap":
            if not isinstance(x, TorusPoint):
                raise ConfigError("this partition bins torus points")
            xf, yf = x.floats()
            g = self.depth
            return (int(xf * g) % g, int(yf * g) % g)
        if not isinstance(x, SymbolSequence):
            raise ConfigError("this partition bins symbol sequences")
        return tuple(x.window(-self.depth, self.depth))


def box_partition(sys: BaseSystem, depth: int) -> Partition:
    if depth < 1:
        raise ConfigError(f"partition depth must be >= 1, got {depth}")
    if sys.kind == "catmap":
        return Partition("catmap", depth, math.sqrt(2.0) / depth)
    return Partition("fullshift", depth, 2.0 ** (-(depth + 1)))


# --- projectivized skew product ---------------------------------------------


def proj_step(A: CocycleSpec, sys: BaseSystem, x, p: ProjPoint):
    """One step of the projectivized skew product (x, [v]) -> (fx, [A(x)v])."""
    from .cocycles import _value

    return step(sys, x, 1), ProjPoint(_value(A, x) @ p.v)


def _orbit_cells(sys, partition, x, n):
    if sys.kind == "catmap":
        coords = orbit_coords(sys, x, n)
        g = partition.depth
        cols = (coords * g).astype(np.int64) % g
        return [(int(a), int(b)) for a, b in cols]
    w = partition.depth
    win = x.window(-w, n - 1 + w)
    size = 2 * w + 1
    return [tuple(win[t : t + size]) for t in range(n)]


def _one_orbit(A, sys, partition, n_iter, child_seed):
    rng = np.random.default_rng(child_seed)
    if sys.kind == "catmap":
        x = TorusPoint(float(rng.random()), float(rng.random()))
    else:
        x = sample(sys, rng, 1, core_width=2 * (n_iter + partition.depth) + 8)[0]
    d = A.descriptor.d
    v = rng.normal(size=d)
    if A.descriptor.dtype == np.complex128:
        v = v + 1j * rng.normal(size=d)
    v = v / np.linalg.norm(v)
    mats = evaluate_orbit(A, sys, x, n_iter)
    cells = _orbit_cells(sys, partition, x, n_iter)
    burn = n_iter // 10
    out = []
    for t in range(n_iter):
        if t >= burn:
            out.append((cells[t], ProjPoint(v)))
        v = mats[t] @ v
        nv = np.linalg.norm(v)
        if not (np.isfinite(nv) and nv > 0.0):
            raise NumericalError(f"projective orbit degenerated at step {t}")
        v = v / nv
    return out


def empirical_fiber_measures(
    A: CocycleSpec,
    sys: BaseSystem,
    seed: int,
    n_orbits: int,
    n_iter: int,
    partition: Partition,
    threads: int = 1,
):
    """Per-cell empirical fiber measures of the projectivized skew product.

    Runs n_orbits random starts for n_iter steps each, discards the first
    n_iter // 10 as burn-in, and bins the remaining (cell, [v]) visits.
    Returns a dict cell -> EmpiricalMeasure with equal atom weights; cells
    never visited are omitted.  Deterministic given seed, for any thread
    count: orbits use spawned per-orbit seeds and are merged in orbit
    order."""
    if n_orbits < 1:
        raise ConfigError(f"n_orbits must be >= 1, got {n_orbits}")
    if n_iter < 1:
        raise ConfigError(f"n_iter must be >= 1, got {n_iter}")
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    if partition.kind != sys.kind:
        raise ConfigError("partition was built for a different base kind")
    children = np.random.SeedSequence(seed).spawn(n_orbits)
    run = lambda child: _one_orbit(A, sys, partition, n_iter, child)
    if threads == 1:
        visits = [run(c) for c in children]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            visits = list(ex.map(run, children))
    bins: dict = {}
    for orbit_visits in visits:
        for cell, p in orbit_visits:
            bins.setdefault(cell, []).append(p)
    out = {}
    for cell, pts in bins.items():
        w = 1.0 / len(pts)
        out[cell] = EmpiricalMeasure(tuple((p, w) for p in pts))
    return out


# --- pushforward and distances ----------------------------------------------


def pushforward(H, m: EmpiricalMeasure) -> EmpiricalMeasure:
    """Image measure under the projective action of an invertible matrix."""
    H = np.asarray(H)
    d = m.d
    if H.shape != (d, d):
        raise ConfigError(f"pushforward matrix must be {d}x{d}, got {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ConfigError("pushforward matrix must be finite")
    s = np.linalg.svd(H, compute_uv=False)
    if s[-1] <= s[0] * 1e-13:
        raise ConfigError("pushforward needs an invertible matrix")
    return EmpiricalMeasure(tuple((ProjPoint(H @ p.v), w) for p, w in m.atoms))


def _circle_w1(t1, w1, t2, w2) -> float:
    # exact W1 between atomic measures on a circle of circumference pi:
    # the transport cost is min_c int |F1 - F2 - c|, minimized at a
    # weighted median of the piecewise constant CDF difference
    pos = np.concatenate([t1, t2])
    wt = np.concatenate([w1, -w2])
    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    wt = wt[order]
    D = np.cumsum(wt)
    seg = np.append(np.diff(pos), pos[0] + math.pi - pos[-1])
    mo = np.argsort(D, kind="stable")
    cum = np.cumsum(seg[mo])
    c = D[mo][np.searchsorted(cum, 0.5 * cum[-1])]
    return float(np.sum(np.abs(D - c) * seg))


_BL_DICT_SIZE = 50
_BL_SEED = 1729
_bl_cache: dict = {}


def _bl_dictionary(d: int, complex_: bool) -> np.ndarray:
    key = (d, complex_)
    if key not in _bl_cache:
        rng = np.random.default_rng(_BL_SEED)
        U = rng.normal(size=(_BL_DICT_SIZE, d))
        if complex_:
            U = U + 1j * rng.normal(size=(_BL_DICT_SIZE, d))
        U = U / np.linalg.norm(U, axis=1, keepdims=True)
        U.setflags(write=False)
        _bl_cache[key] = U
    return _bl_cache[key]


def _bl_moments(m: EmpiricalMeasure, U: np.ndarray) -> np.ndarray:
    V, w = _atom_arrays(m)
    return w @ (np.abs(V @ U.conj().T) ** 2)


def measure_distance(m1: EmpiricalMeasure, m2: EmpiricalMeasure) -> float:
    """Distance between empirical projective measures.

    Real d = 2: exact Wasserstein-1 on the projective line parametrized as
    a circle of circumference pi.  Otherwise: bounded-Lipschitz estimate,
    the largest gap in the expectations of a fixed dictionary of 50
    quadratic test functions v -> |<u_j, v>|^2.  Symmetric, and zero on
    identical atom lists."""
    if m1.d != m2.d:
        raise ConfigError(f"measures live in different dimensions: {m1.d} vs {m2.d}")
    if len(m1.atoms) == len(m2.atoms) and all(
        u == w and np.array_equal(p.v, q.v)
        for (p, u), (q, w) in zip(m1.atoms, m2.atoms)
    ):
        return 0.0
    V1, w1 = _atom_arrays(m1)
    V2, w2 = _atom_arrays(m2)
    if m1.d == 2 and not (np.iscomplexobj(V1) or np.iscomplexobj(V2)):
        t1 = np.arctan2(V1[:, 1], V1[:, 0]) % math.pi
        t2 = np.arctan2(V2[:, 1], V2[:, 0]) % math.pi
        return _circle_w1(t1, w1, t2, w2)
    U = _bl_dictionary(m1.d, bool(np.iscomplexobj(V1) or np.iscomplexobj(V2)))
    return float(np.max(np.abs(_bl_moments(m1, U) - _bl_moments(m2, U))))


# --- common invariant measure test ------------------------------------------


@dataclass(frozen=True)
class MeasureTestOptions:
    L: int = 60             # longest random word probed
    bound: float = 1e6      # norm threshold separating bounded from growing
    finite_orbit: int = 4   # largest finite eigen-direction orbit searched
    n_words: int = 400
    seed: int = 7
    subspace_tol: float = 1e-8


@dataclass(frozen=True)
class MeasureVerdict:
    """Heuristic verdict on a common invariant measure for a matrix pair.

    kind is "PossiblyCommon" or "NoCommonMeasure"; stage names the sub-test
    that decided ("bounded", "subspace", "finite_orbit", "growth").  A
    PossiblyCommon witness is the averaged positive form, a subspace basis,
    or the stacked orbit directions; its residual is reported, and nothing
    is claimed beyond it."""

    kind: str
    stage: str
    detail: str
    witness: np.ndarray | None = None
    residual: float | None = None
    growth_rate: float | None = None


_WORD_CAP = 1e12  # stop multiplying runaway words well before overflow


def _word_scan(gens, d, dtype, opts):
    rng = np.random.default_rng(opts.seed)
    max_norm = 0.0
    # deterministic power probe first: prefixes of g^L for each generator and
    # two mixed products, so a single growing generator is never missed by
    # the random sample
    for g in gens + (gens[0] @ gens[1], gens[0] @ gens[3]):
        w = np.eye(d, dtype=dtype)
        for _ in range(opts.L):
            w = g @ w
            max_norm = max(max_norm, float(np.linalg.norm(w)))
            if max_norm > _WORD_CAP:
                break
    rates = []
    Q = np.zeros((d, d), dtype=dtype)
    n_forms = 0
    for _ in range(opts.n_words):
        ell = int(rng.integers(1, opts.L + 1))
        idx = rng.integers(0, 4, size=ell)
        w = np.eye(d, dtype=dtype)
        peak = 0.0
        steps = 0
        for j in idx:
            w = gens[j] @ w
            steps += 1
            peak = max(peak, float(np.linalg.norm(w)))
            if peak > _WORD_CAP:
                break
        max_norm = max(max_norm, peak)
        rates.append(math.log(max(peak, 1e-300)) / steps)
        if peak <= _WORD_CAP:
            Q += w.conj().T @ w
            n_forms += 1
    rate = float(np.mean(rates))
    return max_norm, rate, (Q / n_forms if n_forms else None)


def _generalized_eigenbases(g):
    d = g.shape[0]
    vals = np.linalg.eigvals(g)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    scale = max(1.0, float(np.max(np.abs(vals))))
    groups = [[vals[0]]]
    for lam in vals[1:]:
        if abs(lam - groups[-1][-1]) <= 1e-8 * scale:
            groups[-1].append(lam)
        else:
            groups.append([lam])
    bases = []
    for grp in groups:
        lam = complex(np.mean(grp))
        m = len(grp)
        M = np.linalg.matrix_power(g.astype(np.complex128) - lam * np.eye(d), m)
        Vh = np.linalg.svd(M)[2]
        bases.append(Vh[d - m :].conj().T)  # last m right-singular vectors
    return bases


def _invariant_subspace(a, b, opts):
    # sums of generalized eigenspaces of a, tested for b-invariance
    bases = _generalized_eigenbases(a)
    n = len(bases)
    for r in range(1, n):
        for subset in itertools.combinations(range(n), r):
            U = np.linalg.qr(np.hstack([bases[i] for i in subset]))[0]
            BU = b.astype(np.complex128) @ U
            resid = float(
                np.linalg.norm(BU - U @ (U.conj().T @ BU))
                / max(np.linalg.norm(BU), 1e-300)
            )
            if resid < opts.subspace_tol:
                return U, resid
    return None


def _proj_gap(a, b) -> float:
    return 1.0 - min(1.0, abs(np.vdot(a, b)))


def _eigen_direction_starts(g1, g2, real_inputs):
    starts = []
    for g in (g1, g2):
        _, vecs = np.linalg.eig(g)
        for i in range(g.shape[0]):
            v = vecs[:, i]
            j = int(np.argmax(np.abs(v)))
            v = v * (np.conj(v[j]) / abs(v[j]))
            if real_inputs:
                if float(np.linalg.norm(v.imag)) > 1e-9:
                    continue  # no fixed point in real projective space
                v = v.real
            v = v / np.linalg.norm(v)
            if all(_proj_gap(v, s) > 1e-8 for s in starts):
                starts.append(v)
    return starts


def _finite_orbit(g1, g2, opts, real_inputs):
    for s in _eigen_direction_starts(g1, g2, real_inputs):
        orbit = [s]
        frontier = [s]
        small = True
        while frontier and small:
            nxt = []
            for v in frontier:
                for g in (g1, g2):
                    w = g @ v
                    w = w / np.linalg.norm(w)
                    if min(_proj_gap(w, o) for o in orbit) > 1e-10:
                        orbit.append(w)
                        nxt.append(w)
                        if len(orbit) > opts.finite_orbit:
                            small = False
                            break
                if not small:
                    break
            frontier = nxt
        if small:
            return np.stack(orbit)
    return None


def common_invariant_measure_test(g1, g2, opts: MeasureTestOptions | None = None) -> MeasureVerdict:
    """Decide, heuristically, whether two matrices can share an invariant
    probability measure on projective space.

    Three sub-tests in order: (a) bounded random word norms (compact
    closure; witness = averaged positive form), (b) a common invariant sum
    of generalized eigenspaces, tried from both generators, (c) a finite
    eigen-direction orbit.  All negative: NoCommonMeasure with the word
    growth rate as certificate.  d <= 4 only."""
    opts = opts or MeasureTestOptions()
    g1 = np.asarray(g1)
    g2 = np.asarray(g2)
    if g1.ndim != 2 or g1.shape[0] != g1.shape[1] or g1.shape != g2.shape:
        raise ConfigError("the test needs two square matrices of equal size")
    d = g1.shape[0]
    if d > 4:
        raise ConfigError(f"eigenstructure enumeration supports d <= 4, got {d}")
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
        raise ConfigError("matrices must be finite")
    if opts.L < 1 or opts.n_words < 1 or opts.finite_orbit < 1:
        raise ConfigError("L, n_words and finite_orbit must all be >= 1")
    complex_ = bool(np.iscomplexobj(g1) or np.iscomplexobj(g2))
    dtype = np.complex128 if complex_ else np.float64
    g1 = g1.astype(dtype)
    g2 = g2.astype(dtype)
    # canonical pair order makes the verdict exactly symmetric in (g1, g2):
    # both argument orders run the identical computation
    if g2.tobytes() < g1.tobytes():
        g1, g2 = g2, g1
    try:
        gens = (g1, g2, np.linalg.inv(g1), np.linalg.inv(g2))
    except np.linalg.LinAlgError:
        raise ConfigError("both matrices must be invertible") from None

    max_norm, rate, Q = _word_scan(gens, d, dtype, opts)
    if max_norm < opts.bound and Q is not None:
        resid = max(
            float(np.linalg.norm(g.conj().T @ Q @ g - Q) / np.linalg.norm(Q))
            for g in (g1, g2)
        )
        return MeasureVerdict(
            "PossiblyCommon",
            "bounded",
            f"word norms stay below {max_norm:.3e} < {opts.bound:.1e}; "
            f"averaged form invariant to {resid:.2e}",
            witness=Q,
            residual=resid,
        )

    for a, b in ((g1, g2), (g2, g1)):
        found = _invariant_subspace(a, b, opts)
        if found is not None:
            U, resid = found
            return MeasureVerdict(
                "PossiblyCommon",
                "subspace",
                f"a sum of generalized eigenspaces (dim {U.shape[1]}) is "
                f"invariant for both, residual {resid:.2e}",
                witness=U,
                residual=resid,
            )

    orbit = _finite_orbit(g1, g2, opts, real_inputs=not complex_)
    if orbit is not None:
        return MeasureVerdict(
            "PossiblyCommon",
            "finite_orbit",
            f"an eigen-direction orbit closes at {orbit.shape[0]} "
            f"<= {opts.finite_orbit} points",
            witness=orbit,
        )

    return MeasureVerdict(
        "NoCommonMeasure",
        "growth",
        f"word norms reach {max_norm:.3e} (mean log-growth {rate:.3f}); no "
        f"invariant eigenspace sum; no eigen-direction orbit of size "
        f"<= {opts.finite_orbit}",
        growth_rate=rate,
    )


# --- disintegration invariance ----------------------------------------------


def leaf_pairs(sys: BaseSystem, n_pairs: int, seed: int, side: str = "stable",
               separation: float = 0.1, core_width: int = 64):
    """Random same-leaf (x, y, side) triples for holonomy experiments.

    Shift pairs share all symbols on the contracting side of the leaf and
    are forced to differ at the first index of the other side; torus pairs
    sit on a common eigenline within the local box."""
    if n_pairs < 1:
        raise ConfigError(f"n_pairs must be >= 1, got {n_pairs}")
    if side not in ("stable", "unstable", "both"):
        raise ConfigError(f"side must be stable, unstable or both, got {side!r}")
    if sys.kind == "catmap" and not 0.0 < separation * 2.0 < 0.4:
        raise ConfigError("separation must keep pairs inside the local box")
    rng = np.random.default_rng(seed)
    out = []
    for j in range(n_pairs):
        s = side if side != "both" else ("stable" if j % 2 == 0 else "unstable")
        if sys.kind == "catmap":
            x = TorusPoint(float(rng.random()), float(rng.random()))
            t = (0.2 + 0.8 * float(rng.random())) * separation
            if rng.random() < 0.5:
                t = -t
            slope = STABLE_SLOPE if s == "stable" else UNSTABLE_SLOPE
            y = TorusPoint(x.floats()[0] + t, x.floats()[1] + t * slope)
        else:
            x = sample(sys, rng, 1, core_width)[0]
            core = list(x.core)
            h = x.origin
            if s == "stable":
                for i in range(h):
                    core[i] = int(rng.integers(sys.k))
                core[h - 1] = (x.core[h - 1] + 1 + int(rng.integers(sys.k - 1))) % sys.k
                tail = tuple(int(c) for c in rng.integers(0, sys.k, size=8))
                y = SymbolSequence(sys.k, tail, tuple(core), x.right, h)
            else:
                for i in range(h + 1, len(core)):
                    core[i] = int(rng.integers(sys.k))
                core[h] = (x.core[h] + 1 + int(rng.integers(sys.k - 1))) % sys.k
                tail = tuple(int(c) for c in rng.integers(0, sys.k, size=8))
                y = SymbolSequence(sys.k, x.left, tuple(core), tail, h)
        out.append((x, y, s))
    return out


@dataclass(frozen=True)
class DisintegrationReport:
    max_distance: float
    mean_distance: float
    resolution: float
    n_pairs: int
    skipped: int
    exponents: tuple
    per_pair: tuple  # (side, distance) per evaluated pair


def disintegration_invariance_test(
    A: CocycleSpec,
    sys: BaseSystem,
    pairs,
    partition: Partition,
    seed: int,
    n_orbits: int = 60,
    n_iter: int = 800,
    zero_tol: float = 1e-2,
    spectrum_n: int = 4000,
    holonomy_tol: float = 1e-8,
    holonomy_n_max: int = 400,
    threads: int = 1,
) -> DisintegrationReport:
    """Holonomy invariance of empirical fiber measures, pair by pair.

    Requires all Lyapunov exponents of A below zero_tol (the hypothesis of
    the disintegration statement); refuses otherwise, naming the offending
    exponent.  For each (y, z, side) pair the per-cell measure at y's cell
    is pushed through the leaf holonomy and compared to the measure at z's
    cell; distances should be read against the reported binning
    resolution.  Pairs whose cells were never visited are skipped and
    counted."""
    rng = np.random.default_rng(seed)
    x0 = sample(sys, rng, 1, core_width=_mc_core_width(A, spectrum_n, 0))[0]
    rep = lyapunov_spectrum(A, sys, x0, spectrum_n)
    for i, lam in enumerate(rep.exponents):
        if abs(lam) >= zero_tol:
            raise RefusalError(
                f"disintegration needs vanishing exponents: |lambda_{i + 1}| = "
                f"{abs(lam):.6g} >= zero_tol = {zero_tol:g}"
            )
    measures = empirical_fiber_measures(A, sys, seed, n_orbits, n_iter, partition, threads)
    per_pair = []
    skipped = 0
    for idx, (y, z, s) in enumerate(pairs):
        if s == "stable":
            hol = stable_holonomy(A, sys, y, z, tol=holonomy_tol, n_max=holonomy_n_max)
        elif s == "unstable":
            hol = unstable_holonomy(A, sys, y, z, tol=holonomy_tol, n_max=holonomy_n_max)
        else:
            raise ConfigError(f"pair {idx}: side must be stable or unstable, got {s!r}")
        if not hol.converged:
            raise NumericalError(
                f"pair {idx}: {s} holonomy did not converge "
                f"(gap {hol.cauchy_gap:.3e} at n_max {holonomy_n_max})"
            )
        cy, cz = partition.cell(y), partition.cell(z)
        if cy not in measures or cz not in measures:
            skipped += 1
            continue
        per_pair.append((s, measure_distance(pushforward(hol.H, measures[cy]), measures[cz])))
    dists = [d for _, d in per_pair]
    return DisintegrationReport(
        max_distance=max(dists) if dists else math.nan,
        mean_distance=float(np.mean(dists)) if dists else math.nan,
        resolution=partition.resolution,
        n_pairs=len(per_pair),
        skipped=skipped,
        exponents=rep.exponents,
        per_pair=tuple(per_pair),
    )
