"""Domination certificates, stable/unstable holonomies, and their derivatives.

Holonomies are the limits

    H^s_{x,y} = lim_{n->+inf} A^(n)(y)^{-1} A^(n)(x)      y in W^s_loc(x)
    H^u_{x,z} = lim_{n->-inf} A^(n)(z)^{-1} A^(n)(x)      z in W^u_loc(x)

computed by iterating the partial products with a stride-5 Cauchy stopping
rule.  When consecutive factors at the two points are bitwise equal (locally
constant cocycles past their window, shift bumps past the agreement cutoff)
the partial product is left untouched, so the limit is attained as exact
matrix equality rather than to rounding.

The derivative routines evaluate the transported series for d/dh of the
holonomy along the curve B_h(x) = B(x) exp(h s(x) xi) given by a bump
direction.  Truncation is certificate driven: the tail is bounded by a
geometric series with ratio exp(-(tau - 3 theta)) taken from a domination
certificate at the periodic base point.
"""
from __future__ import annotations

import collections
import dataclasses
import logging
import math

import numpy as np

from .base import (
    BOX_RADIUS,
    CAT_LAMBDA,
    STABLE_SLOPE,
    UNSTABLE_SLOPE,
    BasePoint,
    BaseSystem,
    SymbolSequence,
    TorusPoint,
    _wrap_diff,
    distance,
    minimal_period,
    step,
)
from .cocycles import (
    Bump,
    CocycleSpec,
    Constant,
    LocallyConstant,
    ScaledProduct,
    _as_lie_matrix,
    _bump_distance,
    _check_kind,
    _value,
    product,
    rho,
)
from .errors import ConfigError, NumericalError, RefusalError

log = logging.getLogger(__name__)

STRIDE = 5
SEGMENT_TOL = 1e-10  # eigenline membership residual on the torus


@dataclasses.dataclass(frozen=True)
class DominationCertificate:
    """Finite-horizon verification of the domination inequality.

    max_log_ratio is the largest over k <= k_max of the k-block average of
    log(||A^(N)|| * ||A^(N)^-1||) along the orbit; holds means it stays at or
    below theta.  This certifies the inequality up to the horizon only, it is
    not a proof for all k.
    """

    N: int
    theta: float
    k_max: int
    max_log_ratio: float
    holds: bool
    tau: float
    bunched: bool


@dataclasses.dataclass(frozen=True)
class HolonomyResult:
    H: np.ndarray
    n_stop: int
    cauchy_gap: float
    converged: bool
    kind: str  # "stable" | "unstable"


def domination_check(
    A: CocycleSpec,
    sys: BaseSystem,
    x: BasePoint,
    N: int,
    theta: float | None,
    k_max: int,
) -> DominationCertificate:
    """Evaluate the block products of the domination definition literally.

    theta=None fits the bound to the measurement: the certificate records
    theta = max_log_ratio and holds trivially, which is the form the
    derivative routines use to decide bunching.
    """
    if N < 1:
        raise ConfigError(f"block length must be >= 1, got {N}")
    if k_max < 1:
        raise ConfigError(f"k_max must be >= 1, got {k_max}")
    _check_kind(A, x)
    y = x
    total = 0.0
    worst = -math.inf
    for k in range(1, k_max + 1):
        M = product(A, sys, y, N)
        if isinstance(M, ScaledProduct):
            M = M.matrix  # the scale cancels in ||M|| * ||M^-1||
        M = np.asarray(M)
        total += math.log(np.linalg.norm(M, 2) * np.linalg.norm(np.linalg.inv(M), 2))
        worst = max(worst, total / (k * N))
        y = step(sys, y, N)
    fitted = theta is None
    theta_eff = worst if fitted else float(theta)
    return DominationCertificate(
        N=N,
        theta=theta_eff,
        k_max=k_max,
        max_log_ratio=worst,
        holds=worst <= theta_eff,
        tau=sys.tau,
        bunched=3.0 * theta_eff < sys.tau,
    )


# --- local stable/unstable membership --------------------------------------


def _same_leaf_shift(x: SymbolSequence, y: SymbolSequence, side: str) -> bool:
    # agreement is decidable: beyond both cores and one lcm of the periodic
    # tails the sequences repeat, so a finite window settles it
    if x.k != y.k:
        return False
    la_x, ra_x = x._extents()
    la_y, ra_y = y._extents()
    if side == "stable":
        hi = max(ra_x, ra_y) + math.lcm(len(x.right), len(y.right))
        lo = 0
    else:
        lo = -(max(la_x, la_y) + math.lcm(len(x.left), len(y.left)))
        hi = -1
    return all(x.get(n) == y.get(n) for n in range(lo, hi + 1))


def _check_leaf(sys: BaseSystem, x: BasePoint, y: BasePoint, side: str):
    if sys.kind == "fullshift":
        if not (isinstance(x, SymbolSequence) and isinstance(y, SymbolSequence)):
            raise ConfigError("shift holonomies need symbol sequences")
        if not _same_leaf_shift(x, y, side):
            raise ConfigError(
                f"second point is not on the local {side} set of the first "
                f"({'indices >= 0' if side == 'stable' else 'indices <= -1'} must agree)"
            )
        return
    if not (isinstance(x, TorusPoint) and isinstance(y, TorusPoint)):
        raise ConfigError("torus holonomies need torus points")
    d = distance(sys, x, y)
    if d >= BOX_RADIUS:
        raise ConfigError(f"points too far apart for a local leaf (d = {d:.4f})")
    xx, xy = x.floats()
    yx, yy = y.floats()
    dx = _wrap_diff(xx, yx)
    dy = _wrap_diff(xy, yy)
    slope = STABLE_SLOPE if side == "stable" else UNSTABLE_SLOPE
    resid = abs(slope * dx - dy) / math.hypot(1.0, slope)
    if resid > SEGMENT_TOL:
        raise ConfigError(
            f"second point is off the {side} eigenline through the first "
            f"(residual {resid:.2e} > {SEGMENT_TOL:.0e})"
        )


# --- paired factor streams --------------------------------------------------


def _pair_stream(A, sys, x, y, side):
    """Factors and points for both orbits, one step at a time.

    Forward order for the stable side starting at (x, y); backward order for
    the unstable side starting at (f^-1 x, f^-1 y).  On the torus the second
    orbit is synthesized from the first plus an exactly contracted eigenline
    displacement: stepping the two float orbits independently would inject
    roundoff into the expanding direction and the pair would stop
    approaching after some 30 steps.
    """
    if sys.kind == "fullshift":
        qx, qy = x, y
        if side == "stable":
            while True:
                yield _value(A, qx), _value(A, qy), qx, qy
                qx = step(sys, qx, 1)
                qy = step(sys, qy, 1)
        else:
            while True:
                qx = step(sys, qx, -1)
                qy = step(sys, qy, -1)
                yield _value(A, qx), _value(A, qy), qx, qy
        return
    xx, _ = x.floats()
    yx, _ = y.floats()
    slope = STABLE_SLOPE if side == "stable" else UNSTABLE_SLOPE
    t = _wrap_diff(xx, yx)  # displacement in the (1, slope) parameterization
    shrink = 1.0 / CAT_LAMBDA
    qx = x
    if side == "stable":
        while True:
            fx, fy = qx.floats()
            qy = TorusPoint(fx + t, fy + t * slope)
            yield _value(A, qx), _value(A, qy), qx, qy
            qx = step(sys, qx, 1)
            t *= shrink
    else:
        while True:
            qx = step(sys, qx, -1)
            t *= shrink
            fx, fy = qx.floats()
            qy = TorusPoint(fx + t, fy + t * slope)
            yield _value(A, qx), _value(A, qy), qx, qy


def _freeze_index(A: CocycleSpec, side: str):
    # index past which all factor pairs provably coincide on a common leaf
    if isinstance(A, Constant):
        return 0
    if isinstance(A, LocallyConstant):
        return A.window if side == "stable" else max(A.window, 1)
    return None


def _holonomy(A, sys, x, y, tol, n_max, side) -> HolonomyResult:
    _check_kind(A, x)
    _check_kind(A, y)
    if tol < 0.0:
        raise ConfigError(f"tol must be >= 0, got {tol}")
    if n_max < 0:
        raise ConfigError(f"n_max must be >= 0, got {n_max}")
    _check_leaf(sys, x, y, side)
    G = A.descriptor
    eye = np.eye(G.d, dtype=G.dtype)
    if x == y:
        return HolonomyResult(eye.copy(), 0, 0.0, True, side)
    freeze = _freeze_index(A, side)
    if freeze == 0:
        return HolonomyResult(eye.copy(), 0, 0.0, True, side)
    stream = _pair_stream(A, sys, x, y, side)
    Lx = eye.copy()
    Ly = eye.copy()
    P = eye.copy()
    hist = collections.deque([P], maxlen=STRIDE + 1)
    gap = math.inf
    for n in range(1, n_max + 1):
        ax, ay, _, _ = next(stream)
        if side == "stable":
            Lx = ax @ Lx
            Ly = ay @ Ly
        else:
            Lx = np.linalg.solve(ax, Lx)
            Ly = np.linalg.solve(ay, Ly)
        if not (np.all(np.isfinite(Lx)) and np.all(np.isfinite(Ly))):
            raise NumericalError(f"holonomy partial product overflowed at step {n}")
        if not np.array_equal(ax, ay):
            # a bitwise equal pair cancels adjacently, so P is kept as is
            # (this is what freezes shift holonomies exactly); the factors
            # must still enter both partial products, or a later unequal
            # pair would be conjugated by a truncated inner product
            P = np.linalg.solve(Ly, Lx)
        hist.append(P)
        if freeze is not None and n >= freeze:
            return HolonomyResult(P, n, 0.0, True, side)
        if len(hist) == STRIDE + 1:
            gap = float(np.linalg.norm(hist[-1] - hist[0], 2))
            log.debug("%s holonomy n=%d gap=%.3e", side, n, gap)
            if gap < tol:
                return HolonomyResult(P, n, gap, True, side)
    return HolonomyResult(P, n_max, gap if gap < math.inf else math.nan, False, side)


def stable_holonomy(
    A: CocycleSpec,
    sys: BaseSystem,
    x: BasePoint,
    y: BasePoint,
    tol: float = 1e-10,
    n_max: int = 400,
) -> HolonomyResult:
    """H^s_{x,y} for y on the local stable set of x.

    Membership is checked exactly on the shift (agreement at indices >= 0)
    and to residual 1e-10 against the stable eigenline on the torus.
    Non-convergence by n_max is reported in the flag, not raised.
    """
    return _holonomy(A, sys, x, y, tol, n_max, "stable")


def unstable_holonomy(
    A: CocycleSpec,
    sys: BaseSystem,
    x: BasePoint,
    z: BasePoint,
    tol: float = 1e-10,
    n_max: int = 400,
) -> HolonomyResult:
    """H^u_{x,z} for z on the local unstable set of x (shift: agreement at
    indices <= -1), via backward partial products of individually inverted
    factors."""
    return _holonomy(A, sys, x, z, tol, n_max, "unstable")


# --- derivatives along bump directions --------------------------------------


def _profile(center, radius, w) -> float:
    d = _bump_distance(w, center)
    return rho(d / radius) if d < radius else 0.0


def _direction_parts(B, sys, direction):
    if not isinstance(direction, Bump):
        raise ConfigError("direction must be a Bump tangent vector")
    if direction.radius <= 0.0:
        raise ConfigError(f"direction radius must be positive, got {direction.radius}")
    want = TorusPoint if sys.kind == "catmap" else SymbolSequence
    if not isinstance(direction.center, want):
        raise ConfigError(f"direction center must be a {want.__name__} for this base")
    xi = _as_lie_matrix(B.descriptor, direction.direction, "direction.direction")
    return xi, float(direction.amplitude)


def _bunched_certificate(B, sys, p, kappa, certificate) -> DominationCertificate:
    cert = certificate
    if cert is None:
        cert = domination_check(B, sys, p, N=kappa, theta=None, k_max=16)
    if not (cert.holds and cert.bunched):
        raise RefusalError(
            "holonomy derivative needs a bunched domination certificate: "
            f"3*theta = {3.0 * cert.theta:.4f} vs tau = {cert.tau:.4f}, "
            f"holds = {cert.holds}"
        )
    return cert


def stable_holonomy_derivative(
    B: CocycleSpec,
    sys: BaseSystem,
    p: BasePoint,
    y: BasePoint,
    direction: Bump,
    tol: float = 1e-8,
    n_max: int = 400,
    certificate: DominationCertificate | None = None,
) -> np.ndarray:
    """Derivative of H^s_{p,y} along B_h(x) = B(x) exp(h s(x) xi).

    Evaluates

        sum_{i>=0} B^(i)(y)^{-1} [H_i u(f^i p) - u(f^i y) H_i] B^(i)(p)

    with u(w) = B(w)^{-1} Bdot(w) = amplitude * rho(d(w, center)/radius) * xi
    and H_i the inner holonomy at (f^i p, f^i y).  p must be periodic and the
    cocycle bunched (certificate computed at p when not supplied); the tail
    is bounded geometrically with ratio exp(-(tau - 3 theta)).  The inner
    holonomies are transported along the orbit by the holonomy cocycle
    relation, so the periodic orbit is walked once rather than re-solved at
    every i.  No support restriction is imposed on the bump: the series
    converges under bunching alone.
    """
    _check_kind(B, p)
    xi, amp = _direction_parts(B, sys, direction)
    G = B.descriptor
    if amp == 0.0:
        return np.zeros((G.d, G.d), dtype=G.dtype)
    kappa = minimal_period(sys, p)
    _check_leaf(sys, p, y, "stable")
    cert = _bunched_certificate(B, sys, p, kappa, certificate)
    ratio = math.exp(-(cert.tau - 3.0 * cert.theta))
    inner = stable_holonomy(B, sys, p, y, tol=min(tol * 1e-2, 1e-10), n_max=n_max)
    if not inner.converged:
        raise NumericalError("inner stable holonomy did not converge")
    H = inner.H
    c, r = direction.center, direction.radius
    stream = _pair_stream(B, sys, p, y, "stable")
    Wp = np.eye(G.d, dtype=G.dtype)
    Wy = np.eye(G.d, dtype=G.dtype)
    total = np.zeros((G.d, G.d), dtype=G.dtype)
    env = 0.0
    min_terms = max(2 * kappa + 4, 16)
    for i in range(n_max):
        bp, by, qp, qy = next(stream)
        sp = amp * _profile(c, r, qp)
        sy = amp * _profile(c, r, qy)
        tn = 0.0
        if sp != 0.0 or sy != 0.0:
            term = np.linalg.solve(Wy, sp * (H @ xi) - sy * (xi @ H)) @ Wp
            total = total + term
            tn = float(np.linalg.norm(term, 2))
        env = max(tn, env * ratio)
        if tn > 1e6 * (1.0 + abs(amp)):
            raise NumericalError(f"derivative series term growing at i={i}")
        if i + 1 >= min_terms and tn < tol and env * ratio / (1.0 - ratio) < tol:
            return total
        H = by @ H @ np.linalg.inv(bp)
        Wp = bp @ Wp
        Wy = by @ Wy
    raise NumericalError(f"derivative series did not reach tol within {n_max} terms")


def unstable_holonomy_derivative(
    B: CocycleSpec,
    sys: BaseSystem,
    z: BasePoint,
    p: BasePoint,
    direction: Bump,
    tol: float = 1e-8,
    n_max: int = 400,
    certificate: DominationCertificate | None = None,
) -> np.ndarray:
    """Derivative of H^u_{p,z} along the same curve, for periodic p and z on
    its local unstable set.

    Mirror series over the backward orbit,

        sum_{i>=1} B^(-(i-1))(z)^{-1} [v(f^-i z) H_i - H_i v(f^-i p)] B^(-(i-1))(p)

    with v(w) = Bdot(w) B(w)^{-1} and H_i the inner holonomy at
    (f^-(i-1) p, f^-(i-1) z)."""
    _check_kind(B, p)
    xi, amp = _direction_parts(B, sys, direction)
    G = B.descriptor
    if amp == 0.0:
        return np.zeros((G.d, G.d), dtype=G.dtype)
    kappa = minimal_period(sys, p)
    _check_leaf(sys, p, z, "unstable")
    cert = _bunched_certificate(B, sys, p, kappa, certificate)
    ratio = math.exp(-(cert.tau - 3.0 * cert.theta))
    inner = unstable_holonomy(B, sys, p, z, tol=min(tol * 1e-2, 1e-10), n_max=n_max)
    if not inner.converged:
        raise NumericalError("inner unstable holonomy did not converge")
    H = inner.H
    c, r = direction.center, direction.radius
    stream = _pair_stream(B, sys, p, z, "unstable")
    Vz = np.eye(G.d, dtype=G.dtype)  # B^(-m)(z)^{-1}
    Wp = np.eye(G.d, dtype=G.dtype)  # B^(-m)(p)
    total = np.zeros((G.d, G.d), dtype=G.dtype)
    env = 0.0
    min_terms = max(2 * kappa + 4, 16)
    for i in range(1, n_max + 1):
        ap, az, qp, qz = next(stream)
        sp = amp * _profile(c, r, qp)
        sz = amp * _profile(c, r, qz)
        tn = 0.0
        if sp != 0.0 or sz != 0.0:
            vz = sz * (az @ xi @ np.linalg.inv(az))
            vp = sp * (ap @ xi @ np.linalg.inv(ap))
            term = Vz @ (vz @ H - H @ vp) @ Wp
            total = total + term
            tn = float(np.linalg.norm(term, 2))
        env = max(tn, env * ratio)
        if tn > 1e6 * (1.0 + abs(amp)):
            raise NumericalError(f"derivative series term growing at i={i}")
        if i >= min_terms and tn < tol and env * ratio / (1.0 - ratio) < tol:
            return total
        H = np.linalg.solve(az, H) @ ap
        Vz = Vz @ az
        Wp = np.linalg.solve(ap, Wp)
    raise NumericalError(f"derivative series did not reach tol within {n_max} terms")
