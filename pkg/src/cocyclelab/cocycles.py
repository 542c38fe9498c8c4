"""Cocycle representations over the hyperbolic base systems.

A cocycle assigns a group element A(x) to every base point x; the orbit
product A^(n)(x) = A(f^(n-1) x) ... A(f x) A(x) drives everything downstream
(Lyapunov spectra, holonomies, transversality data).  Four forms are
supported:

* ``Constant``        -- A(x) = g for a fixed group element.
* ``LocallyConstant`` -- over a full shift, A(x) depends on the symbol
  window x_{-w} ... x_w through a total lookup table.
* ``FourierTorus``    -- over the torus automorphism, A(x) = exp(S(x)) with
  S(x) a trigonometric-polynomial curve in the Lie algebra.
* ``Perturbed``       -- any of the above multiplied on the right by
  compactly supported bump factors exp(a rho(d/r) xi).

Values are produced as plain ndarrays internally; ``evaluate`` wraps them
as GroupElement.  Orbit products renormalize back onto the group every 50
factors and switch to a scaled representation (matrix, log_scale) before
entries can overflow.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from typing import Mapping, NamedTuple, Sequence, Union

import numpy as np
import scipy.linalg

from .base import (
    BasePoint,
    BaseSystem,
    SymbolSequence,
    TorusPoint,
    _wrap_diff,
    orbit_coords,
    point_distance,
    sample,
    step,
)
from .errors import ConfigError, NumericalError
from .groups import GroupDescriptor, GroupElement, contains, lie_residuals, renormalize

log = logging.getLogger(__name__)

RENORM_EVERY = 50
SCALE_LIMIT = 1e150
# silence radius for shift bump distances: beyond this many agreeing symbols
# the distance 2^-m is indistinguishable from 0 at double precision
_SHIFT_AGREE_CUTOFF = 64


@dataclasses.dataclass(frozen=True, eq=False)
class Constant:
    descriptor: GroupDescriptor
    matrix: np.ndarray

    base_kind = None  # either base works


@dataclasses.dataclass(frozen=True, eq=False)
class LocallyConstant:
    """Shift cocycle reading the window x_{-w} .. x_w.

    table maps every word of length 2w+1 over {0..k-1} (as a tuple, listed
    left to right) to a group matrix; _stacked caches the same data as one
    (k^(2w+1), d, d) array indexed by the base-k big-endian word code.
    """

    descriptor: GroupDescriptor
    k: int
    window: int
    table: Mapping[tuple, np.ndarray]
    _stacked: np.ndarray = dataclasses.field(repr=False, compare=False)

    base_kind = "fullshift"


@dataclasses.dataclass(frozen=True, eq=False)
class FourierTerm:
    """One trigonometric monomial: coeff * cos/sin(2 pi (k1 x + k2 y))."""

    k1: int
    k2: int
    kind: str  # "cos" or "sin"
    coeff: np.ndarray


@dataclasses.dataclass(frozen=True, eq=False)
class FourierTorus:
    descriptor: GroupDescriptor
    terms: tuple

    base_kind = "catmap"


@dataclasses.dataclass(frozen=True, eq=False)
class Bump:
    """Right-multiplied factor exp(amplitude * rho(d(x, center)/radius) * xi).

    rho(r) = exp(1 - 1/(1 - r^2)) on [0, 1), zero outside; support is the
    closed metric ball of the given radius around center.
    """

    center: BasePoint
    radius: float
    direction: np.ndarray
    amplitude: float


@dataclasses.dataclass(frozen=True, eq=False)
class Perturbed:
    base: Union[Constant, LocallyConstant, FourierTorus]
    bumps: tuple

    @property
    def descriptor(self):
        return self.base.descriptor

    @property
    def base_kind(self):
        kind = self.base.base_kind
        if kind is None and self.bumps:
            # a constant base takes its kind from the bump centers
            kind = "catmap" if isinstance(self.bumps[0].center, TorusPoint) else "fullshift"
        return kind


CocycleSpec = Union[Constant, LocallyConstant, FourierTorus, Perturbed]


def rho(r):
    """Bump profile: exp(1 - 1/(1 - r^2)) for |r| < 1, else 0.  Smooth,
    rho(0) = 1, all derivatives vanish at |r| = 1.  Accepts arrays."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    ri = r[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ri * ri))
    if out.ndim == 0:
        return float(out)
    return out


def rho_prime(r):
    """Derivative of the bump profile."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    ri = r[inside]
    one = 1.0 - ri * ri
    out[inside] = np.exp(1.0 - 1.0 / one) * (-2.0 * ri / (one * one))
    if out.ndim == 0:
        return float(out)
    return out


def _as_group_matrix(G: GroupDescriptor, m, what: str) -> np.ndarray:
    arr = np.array(m, dtype=G.dtype)
    if arr.shape != (G.d, G.d):
        raise ConfigError(f"{what}: expected shape {(G.d, G.d)}, got {arr.shape}")
    res = contains(G, arr)
    if not res:
        raise ConfigError(
            f"{what}: matrix fails membership in {G.family}({G.d}), "
            f"det residual {res.det_residual:.3g}, form residual {res.form_residual:.3g}"
        )
    arr.setflags(write=False)
    return arr


def _as_lie_matrix(G: GroupDescriptor, m, what: str) -> np.ndarray:
    arr = np.array(m, dtype=G.dtype)
    if arr.shape != (G.d, G.d):
        raise ConfigError(f"{what}: expected shape {(G.d, G.d)}, got {arr.shape}")
    scale = 1.0 + float(np.linalg.norm(arr))
    if max(lie_residuals(G, arr)) > 1e-10 * scale:
        raise ConfigError(f"{what}: matrix is not in the Lie algebra of {G.family}({G.d})")
    arr.setflags(write=False)
    return arr


def constant_cocycle(G: GroupDescriptor, matrix) -> Constant:
    return Constant(G, _as_group_matrix(G, matrix, "constant cocycle"))


def locally_constant(G: GroupDescriptor, k: int, window: int, table: Mapping) -> LocallyConstant:
    """Build a locally constant shift cocycle.  table must be total: one
    entry per word of length 2*window+1 over {0..k-1}."""
    if k < 2:
        raise ConfigError(f"alphabet size must be >= 2, got {k}")
    if window < 0:
        raise ConfigError(f"window must be >= 0, got {window}")
    width = 2 * window + 1
    want = k**width
    norm = {}
    for word, m in table.items():
        key = tuple(int(s) for s in word)
        if len(key) != width or any(s < 0 or s >= k for s in key):
            raise ConfigError(f"table key {word} is not a word of length {width} over 0..{k - 1}")
        if key in norm:
            raise ConfigError(f"duplicate table key {key}")
        norm[key] = _as_group_matrix(G, m, f"table[{key}]")
    if len(norm) != want:
        raise ConfigError(f"table must cover all {want} words of length {width}, got {len(norm)}")
    stacked = np.empty((want, G.d, G.d), dtype=G.dtype)
    for key, m in norm.items():
        code = 0
        for s in key:
            code = code * k + s
        stacked[code] = m
    stacked.setflags(write=False)
    return LocallyConstant(G, k, window, norm, stacked)


def fourier_cocycle(G: GroupDescriptor, terms: Sequence) -> FourierTorus:
    """Build A(x) = exp(sum c_f phi_f(x)) over the torus automorphism.
    terms is a sequence of (k1, k2, kind, coeff) with kind "cos" or "sin"
    and coeff in the Lie algebra of G."""
    out = []
    for i, t in enumerate(terms):
        k1, k2, kind, coeff = t
        if kind not in ("cos", "sin"):
            raise ConfigError(f"terms[{i}]: kind must be 'cos' or 'sin', got {kind!r}")
        if kind == "sin" and (int(k1), int(k2)) == (0, 0):
            raise ConfigError(f"terms[{i}]: sin(0) term is identically zero")
        out.append(
            FourierTerm(int(k1), int(k2), kind, _as_lie_matrix(G, coeff, f"terms[{i}].coeff"))
        )
    return FourierTorus(G, tuple(out))


def perturbed(base: CocycleSpec, bumps: Sequence[Bump]) -> Perturbed:
    if isinstance(base, Perturbed):
        raise ConfigError("nest bumps by extending the bump list, not by wrapping Perturbed twice")
    G = base.descriptor
    checked = []
    kind = base.base_kind
    for i, b in enumerate(bumps):
        if not 0.0 < b.radius:
            raise ConfigError(f"bumps[{i}]: radius must be positive, got {b.radius}")
        ck = "catmap" if isinstance(b.center, TorusPoint) else "fullshift"
        if kind is None:
            kind = ck
        if ck != kind:
            want = "torus point" if kind == "catmap" else "symbol sequence"
            raise ConfigError(f"bumps[{i}]: center must be a {want} for this base")
        direction = _as_lie_matrix(G, b.direction, f"bumps[{i}].direction")
        checked.append(Bump(b.center, float(b.radius), direction, float(b.amplitude)))
    return Perturbed(base, tuple(checked))


def _kind_of_point(x: BasePoint) -> str:
    return "catmap" if isinstance(x, TorusPoint) else "fullshift"


def _check_kind(A: CocycleSpec, x: BasePoint):
    need = A.base_kind
    if need is not None and _kind_of_point(x) != need:
        raise TypeError(f"cocycle over {need} base evaluated at a {_kind_of_point(x)} point")


def _word_code(A: LocallyConstant, x: SymbolSequence) -> int:
    code = 0
    for i in range(-A.window, A.window + 1):
        code = code * A.k + x.get(i)
    return code


def _fourier_angles(A: FourierTorus, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Stack S(x) = sum c_f phi_f(x) over orbit coordinate arrays."""
    n = xs.shape[0]
    d = A.descriptor.d
    S = np.zeros((n, d, d), dtype=A.descriptor.dtype)
    for t in A.terms:
        phase = 2.0 * math.pi * (t.k1 * xs + t.k2 * ys)
        wave = np.cos(phase) if t.kind == "cos" else np.sin(phase)
        S += wave[:, None, None] * t.coeff
    return S


def _expm_traceless2(S: np.ndarray) -> np.ndarray:
    """exp of a batch of traceless 2x2 matrices via the closed form
    exp(S) = cosh(mu) I + (sinh(mu)/mu) S with mu^2 = -det S.  Overflow is
    allowed to produce inf here; product and spectrum callers detect it."""
    with np.errstate(over="ignore", invalid="ignore"):
        musq = S[:, 0, 0] * S[:, 0, 0] + S[:, 0, 1] * S[:, 1, 0]
        mu = np.sqrt(musq.astype(np.complex128))
        cosh = np.cosh(mu)
        small = np.abs(mu) < 1e-6
        ratio = np.empty_like(mu)
        ratio[~small] = np.sinh(mu[~small]) / mu[~small]
        ratio[small] = 1.0 + musq.astype(np.complex128)[small] / 6.0
        out = ratio[:, None, None] * S.astype(np.complex128)
        out[:, 0, 0] += cosh
        out[:, 1, 1] += cosh
    if not np.iscomplexobj(S):
        return np.ascontiguousarray(out.real)
    return out


def _expm_batch(S: np.ndarray) -> np.ndarray:
    if S.shape[0] == 0:
        return np.empty_like(S)
    if S.shape[1] == 2:
        # traceless 2x2 batches (all the classical groups used here) get
        # the closed form; anything else falls through to the generic loop
        tr = np.max(np.abs(S[:, 0, 0] + S[:, 1, 1]))
        if tr < 1e-12 * (1.0 + float(np.max(np.abs(S)))):
            return _expm_traceless2(S)
    out = np.empty_like(S)
    for i in range(S.shape[0]):
        out[i] = scipy.linalg.expm(S[i])
    return out


def _shift_orbit_distances(x: SymbolSequence, n: int, center: SymbolSequence) -> np.ndarray:
    """d(f^i x, center) for i = 0..n-1 on the shift."""
    R = _SHIFT_AGREE_CUTOFF
    sym = np.array(x.window(-R, n - 1 + R), dtype=np.int64)  # sym[j] = x_{j - R}
    cen = np.array([center.get(j) for j in range(-R, R + 1)], dtype=sym.dtype)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        win = sym[i : i + 2 * R + 1]
        if win[R] != cen[R]:
            out[i] = 1.0
            continue
        mism = np.nonzero(win != cen)[0]
        if mism.size == 0:
            out[i] = 2.0 ** (-R)
            continue
        m = int(np.min(np.abs(mism - R)))
        out[i] = 2.0 ** (-m)
    return out


def _torus_orbit_distances(xs: np.ndarray, ys: np.ndarray, center: TorusPoint) -> np.ndarray:
    cx, cy = center.floats()
    dx = np.abs(xs - cx)
    dx = np.minimum(dx, 1.0 - dx)
    dy = np.abs(ys - cy)
    dy = np.minimum(dy, 1.0 - dy)
    return np.hypot(dx, dy)


def _bump_factors(bump: Bump, dists: np.ndarray, dtype) -> np.ndarray:
    """exp(amplitude * rho(d/radius) * xi) for an array of distances."""
    s = bump.amplitude * rho(dists / bump.radius)
    S = s[:, None, None] * bump.direction.astype(dtype, copy=False)
    return _expm_batch(S.astype(dtype, copy=False))


def evaluate_orbit(A: CocycleSpec, sys: BaseSystem, x: BasePoint, n: int) -> np.ndarray:
    """Stack A(x), A(fx), ..., A(f^(n-1) x) as an (n, d, d) array."""
    _check_kind(A, x)
    if n < 0:
        raise ConfigError(f"orbit length must be >= 0, got {n}")
    G = A.descriptor
    if n == 0:
        return np.empty((0, G.d, G.d), dtype=G.dtype)
    if isinstance(A, Constant):
        out = np.empty((n, G.d, G.d), dtype=G.dtype)
        out[:] = A.matrix
        return out
    if isinstance(A, LocallyConstant):
        w = A.window
        sym = np.array(x.window(-w, n - 1 + w), dtype=np.int64)
        width = 2 * w + 1
        powers = A.k ** np.arange(width - 1, -1, -1, dtype=np.int64)
        wins = np.lib.stride_tricks.sliding_window_view(sym, width)
        codes = wins @ powers
        return A._stacked[codes]
    if isinstance(A, FourierTorus):
        coords = orbit_coords(sys, x, n)
        S = _fourier_angles(A, coords[:, 0], coords[:, 1])
        return _expm_batch(S)
    # Perturbed
    vals = np.array(evaluate_orbit(A.base, sys, x, n))
    if A.base_kind == "catmap" or (A.base_kind is None and isinstance(x, TorusPoint)):
        coords = orbit_coords(sys, x, n)
        xs, ys = coords[:, 0], coords[:, 1]
        dist = lambda c: _torus_orbit_distances(xs, ys, c)
    else:
        dist = lambda c: _shift_orbit_distances(x, n, c)
    for b in A.bumps:
        ds = dist(b.center)
        hit = np.nonzero(ds < b.radius)[0]
        if hit.size == 0:
            continue
        factors = _bump_factors(b, ds[hit], G.dtype)
        vals[hit] = vals[hit] @ factors
    return vals


def _value(A: CocycleSpec, x: BasePoint) -> np.ndarray:
    """Single-point value as an ndarray."""
    _check_kind(A, x)
    G = A.descriptor
    if isinstance(A, Constant):
        return A.matrix
    if isinstance(A, LocallyConstant):
        return A._stacked[_word_code(A, x)]
    if isinstance(A, FourierTorus):
        fx, fy = x.floats()
        S = _fourier_angles(A, np.array([fx]), np.array([fy]))
        return _expm_batch(S)[0]
    val = np.array(_value(A.base, x))
    for b in A.bumps:
        d = _bump_distance(x, b.center)
        if d < b.radius:
            val = val @ _bump_factors(b, np.array([d]), G.dtype)[0]
    return val


def _bump_distance(x: BasePoint, center: BasePoint) -> float:
    """Single-point distance routed through the same arithmetic as the
    orbit fast paths, so both produce bitwise identical bump factors."""
    if isinstance(x, TorusPoint):
        fx, fy = x.floats()
        return float(_torus_orbit_distances(np.array([fx]), np.array([fy]), center)[0])
    return float(_shift_orbit_distances(x, 1, center)[0])


def evaluate(A: CocycleSpec, x: BasePoint) -> GroupElement:
    """A(x) as a group element."""
    return GroupElement(_value(A, x), A.descriptor)


class ScaledProduct(NamedTuple):
    """Orbit product too large for direct representation: the true product
    is exp(log_scale) * matrix with matrix of moderate norm."""

    matrix: np.ndarray
    log_scale: float


def product(A: CocycleSpec, sys: BaseSystem, x: BasePoint, n: int):
    """Orbit product A^(n)(x).  For n >= 0 the forward product of n factors;
    A^(0) = I; for n < 0 the inverse of the forward product at f^n x, so the
    cocycle identity A^(m+n)(x) = A^(m)(f^n x) A^(n)(x) holds for all signs.
    Backward products multiply individually inverted factors rather than
    inverting the whole forward product, which would lose all accuracy to
    its squared condition number.

    Returns an ndarray, or a ScaledProduct once entries would leave the
    representable range (entries never silently overflow to inf)."""
    _check_kind(A, x)
    G = A.descriptor
    if n == 0:
        return np.eye(G.d, dtype=G.dtype)
    backward = n < 0
    n = abs(n)
    M = np.eye(G.d, dtype=G.dtype)
    log_scale = 0.0
    chunk = 4096
    done = 0
    y = x
    while done < n:
        m = min(chunk, n - done)
        if backward:
            y = step(sys, y, -m)
        vals = evaluate_orbit(A, sys, y, m)
        if not np.all(np.isfinite(vals)):
            bad = int(np.nonzero(~np.isfinite(vals).all(axis=(1, 2)))[0][0])
            raise NumericalError(f"non-finite cocycle value at orbit step {done + bad}")
        if backward:
            # A^(-n)(x) = A(f^-n x)^-1 ... A(f^-1 x)^-1: this chunk covers
            # f^-(done+m) .. f^-(done+1), applied nearest-first
            vals = np.linalg.inv(vals)[::-1]
        for i in range(m):
            M = vals[i] @ M
            k = done + i + 1
            if k % RENORM_EVERY == 0 and log_scale == 0.0:
                sv = np.linalg.svd(M, compute_uv=False)
                # projection onto the group is only meaningful while the
                # determinant is not pure cancellation noise
                if sv[-1] > 0.0 and sv[0] / sv[-1] < 1e6:
                    before = M
                    M = renormalize(G, M)
                    drift = float(np.linalg.norm(M - before) / max(1.0, np.linalg.norm(before)))
                    if drift > 1e-12:
                        log.debug("renormalization drift %.3e at step %d", drift, k)
            norm = float(np.max(np.abs(M)))
            if norm > SCALE_LIMIT:
                M = M / norm
                log_scale += math.log(norm)
        done += m
        if not backward and done < n:
            y = step(sys, y, m)
    if not np.all(np.isfinite(M)):
        raise NumericalError(f"non-finite orbit product at step {n}")
    if log_scale != 0.0:
        return ScaledProduct(M, log_scale)
    return M


def _pair_stream(A: CocycleSpec, sys: BaseSystem, count: int):
    """Deterministic sample stream for holder_distance: a fixed-seed
    generator so the estimate is reproducible and monotone in count."""
    rng = np.random.default_rng(715517)
    pts = sample(sys, rng, 2 * count)
    return list(zip(pts[0::2], pts[1::2]))


def _torus_derivative(A: CocycleSpec, x: TorusPoint) -> np.ndarray:
    """Partial derivatives of A at a torus point, stacked as (2, d, d).
    Analytic: Frechet derivative of expm along dS/dx_i for Fourier parts,
    product rule with ds * xi * exp(s xi) for bump factors."""
    G = A.descriptor
    fx, fy = x.floats()
    if isinstance(A, Constant):
        return np.zeros((2, G.d, G.d), dtype=G.dtype)
    if isinstance(A, FourierTorus):
        S = np.zeros((G.d, G.d), dtype=G.dtype)
        dS = np.zeros((2, G.d, G.d), dtype=G.dtype)
        for t in A.terms:
            phase = 2.0 * math.pi * (t.k1 * fx + t.k2 * fy)
            if t.kind == "cos":
                wave, dwave = math.cos(phase), -math.sin(phase)
            else:
                wave, dwave = math.sin(phase), math.cos(phase)
            S += wave * t.coeff
            dS[0] += dwave * 2.0 * math.pi * t.k1 * t.coeff
            dS[1] += dwave * 2.0 * math.pi * t.k2 * t.coeff
        out = np.empty((2, G.d, G.d), dtype=G.dtype)
        for i in range(2):
            _, out[i] = scipy.linalg.expm_frechet(S, dS[i])
        return out
    if isinstance(A, Perturbed):
        val = _value(A.base, x)
        dval = _torus_derivative(A.base, x)
        for b in A.bumps:
            d = _bump_distance(x, b.center)
            if d >= b.radius:
                continue
            F = _bump_factors(b, np.array([d]), G.dtype)[0]
            if d == 0.0:
                ds = np.zeros(2)
            else:
                cx, cy = b.center.floats()
                # grad d = (x - c)/d with wrapped signed differences
                grad = np.array([_wrap_diff(cx, fx), _wrap_diff(cy, fy)]) / d
                ds = b.amplitude * rho_prime(d / b.radius) / b.radius * grad
            xiF = b.direction @ F
            new_dval = np.empty_like(dval)
            for i in range(2):
                new_dval[i] = dval[i] @ F + val @ (ds[i] * xiF)
            dval = new_dval
            val = val @ F
        return dval
    raise ConfigError("derivative term is only defined for torus-based cocycles")


def holder_distance(
    A: CocycleSpec,
    B: CocycleSpec,
    sys: BaseSystem,
    r: int,
    nu: float,
    samples: int = 200,
) -> float:
    """Sampled lower bound for the C^{r,nu} distance between two cocycles
    over the same base and group.

    r = 0 or 1; nu in [0, 1] with (r, nu) != (0, 0).  The estimate is the
    max over sampled points of the value gap, plus (nu > 0) the max sampled
    Holder quotient of order nu, plus (r = 1) the max sampled derivative
    gap.  Derivatives are analytic for Fourier and bump parts and zero for
    locally constant cocycles away from cylinder boundaries.  Monotone in
    the sample count; a lower bound for the true distance."""
    if A.descriptor.key() != B.descriptor.key():
        raise ConfigError("holder_distance needs cocycles in the same group")
    if r not in (0, 1):
        raise ConfigError(f"r must be 0 or 1, got {r}")
    if not 0.0 <= nu <= 1.0:
        raise ConfigError(f"nu must be in [0, 1], got {nu}")
    if r == 0 and nu == 0.0:
        raise ConfigError("(r, nu) = (0, 0) is not a Holder class")
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    pairs = _pair_stream(A, sys, samples)
    gap = lambda p: np.linalg.norm(_value(A, p) - _value(B, p), 2)
    sup = 0.0
    quot = 0.0
    dsup = 0.0
    for p, q in pairs:
        gp = gap(p)
        sup = max(sup, gp, gap(q))
        if nu > 0.0:
            d = point_distance(p, q)
            if d > 0.0:
                diff = (_value(A, p) - _value(B, p)) - (_value(A, q) - _value(B, q))
                quot = max(quot, float(np.linalg.norm(diff, 2)) / d**nu)
        if r == 1 and sys.kind == "catmap":
            dgap = _torus_derivative(A, p) - _torus_derivative(B, p)
            dsup = max(dsup, float(max(np.linalg.norm(dgap[i], 2) for i in range(2))))
    return float(sup + quot + dsup)
