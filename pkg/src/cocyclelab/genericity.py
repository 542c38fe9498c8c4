"""Homoclinic loop maps and their transversality.

Builds families of periodic points with homoclinic companions whose bump
supports are pairwise disjoint, evaluates the loop map Phi (period products
and holonomy-conjugated transition products), assembles its Jacobian with
respect to Lie-algebra bump amplitudes in analytic or finite difference
mode, and sweeps random bump perturbations for positive top exponents.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

from .base import (
    BasePoint,
    BaseSystem,
    TorusPoint,
    homoclinic_point,
    minimal_period,
    periodic_point,
    point_distance,
    sample,
    step,
)
from .cocycles import (
    Bump,
    CocycleSpec,
    ScaledProduct,
    holder_distance,
    perturbed,
    product,
)
from .errors import ConfigError, NumericalError, RefusalError
from .groups import contains, lie_basis, lie_coords, lie_from_coords
from .holonomy import (
    domination_check,
    stable_holonomy,
    stable_holonomy_derivative,
    unstable_holonomy,
    unstable_holonomy_derivative,
)
from .spectrum import _mc_core_width, lyapunov_spectrum

__all__ = [
    "HomoclinicSite",
    "HomoclinicData",
    "build_homoclinic_data",
    "phi",
    "PhiJacobian",
    "phi_jacobian",
    "jacobian_mode_agreement",
    "SweepTrial",
    "SweepReport",
    "positivity_sweep",
]

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class HomoclinicSite:
    """One transversality site.

    p is periodic with minimal period kappa; z lies on the local unstable
    set of p and returns to the local stable set after q steps.  p_radius
    and z_radius bound the supports of bump perturbations anchored at p
    and z."""

    p: BasePoint
    kappa: int
    z: BasePoint
    q: int
    p_radius: float
    z_radius: float


@dataclasses.dataclass(frozen=True)
class HomoclinicData:
    """Site family with pairwise disjoint perturbation supports.

    horizon is the largest |n| over which orbit-versus-support disjointness
    was checked.  exact is True when that check covers every n (shift
    supports are cylinders, so a finite window decides membership for the
    whole orbit); on the torus the check is a finite metric sweep."""

    sys: BaseSystem
    sites: tuple
    horizon: int
    exact: bool

    @property
    def l(self) -> int:
        return len(self.sites)


def _site_words(k: int, l: int) -> list:
    """First l aperiodic necklace representatives starting with symbol 0,
    in (length, lex) order: 0, 01, 001, 011, ..."""
    words = []
    for length in range(1, 17):
        for tail in itertools.product(range(k), repeat=length - 1):
            w = (0,) + tail
            if all(w < w[i:] + w[:i] for i in range(1, length)):
                words.append(w)
                if len(words) == l:
                    return words
    raise ConfigError(f"l = {l} exceeds the available site words")  # pragma: no cover


def _shift_violations(sys, ps, kappas, zs, qs, mp, mz):
    """Balls (as cylinder half-widths) that still capture a forbidden orbit
    point.  The distance is 2^-m with m the first half-width of symbol
    disagreement, so the open ball of radius 2^-m is exactly agreement on
    [-m, m]: each check is a finite window comparison and the far tails of
    every z-orbit reduce to pure periodic phases."""
    bad = set()
    l = len(ps)
    phases = [[step(sys, ps[i], a) for a in range(kappas[i])] for i in range(l)]
    for j in range(l):
        M = mp[j]
        wp = ps[j].window(-M, M)
        for i in range(l):
            for a, ph in enumerate(phases[i]):
                if (i, a) != (j, 0) and ph.window(-M, M) == wp:
                    bad.add(("p", j))
        for i in range(l):
            for n in range(-(M + 1), qs[i] + M + 2):
                if step(sys, zs[i], n).window(-M, M) == wp:
                    # tails of z_j may (must) enter the ball at its own
                    # anchor; the transition stretch 0 <= n < q may not
                    if i != j or 0 <= n < qs[i]:
                        bad.add(("p", j))
    for j in range(l):
        M = mz[j]
        wz = zs[j].window(-M, M)
        for i in range(l):
            for ph in phases[i]:
                if ph.window(-M, M) == wz:
                    bad.add(("z", j))
        for i in range(l):
            for n in range(-(M + 1), qs[i] + M + 2):
                if (i, n) != (j, 0) and step(sys, zs[i], n).window(-M, M) == wz:
                    bad.add(("z", j))
    return bad


def _shift_data(sys: BaseSystem, l: int, depth: int) -> HomoclinicData:
    words = _site_words(sys.k, l)
    anchors = [periodic_point(sys, w) for w in words]
    ps = [a.point for a in anchors]
    kappas = [a.period for a in anchors]
    comps = [homoclinic_point(sys, p, depth) for p in ps]
    zs = [c.point for c in comps]
    qs = [c.q for c in comps]
    mp = [depth] * l
    mz = [depth] * l
    while True:
        bad = _shift_violations(sys, ps, kappas, zs, qs, mp, mz)
        if not bad:
            break
        for kind, j in bad:
            (mp if kind == "p" else mz)[j] += 1
        if max(mp + mz) > 60:
            raise ConfigError(
                f"could not separate perturbation supports for l = {l} at "
                f"depth {depth}; increase depth")
    sites = tuple(
        HomoclinicSite(ps[i], kappas[i], zs[i], qs[i], 2.0 ** -mp[i], 2.0 ** -mz[i])
        for i in range(l))
    horizon = max(qs) + max(mp + mz) + 2
    return HomoclinicData(sys, sites, horizon, True)


def _cat_violations(sys, z, p, q, rp, rz, horizon):
    bad = set()
    for n in range(q):
        if point_distance(step(sys, z, n), p) < rp:
            bad.add("p")
    if point_distance(p, z) < rz:
        bad.add("z")
    for n in range(-horizon, horizon + 1):
        if n != 0 and point_distance(step(sys, z, n), z) < rz:
            bad.add("z")
    return bad


def _cat_data(sys: BaseSystem, l: int, depth: int) -> HomoclinicData:
    if l != 1:
        raise ConfigError(
            "the torus base supports a single site (homoclinic companions "
            "exist for the fixed point); use a full shift for l >= 2")
    anchor = periodic_point(sys, (0, 0))
    comp = homoclinic_point(sys, anchor.point, depth)
    p, z, q = anchor.point, comp.point, comp.q
    horizon = 3 * (q + depth) + 48
    rp = rz = 0.1
    for _ in range(60):
        bad = _cat_violations(sys, z, p, q, rp, rz, horizon)
        if not bad:
            site = HomoclinicSite(p, anchor.period, z, q, rp, rz)
            return HomoclinicData(sys, (site,), horizon, False)
        if "p" in bad:
            rp /= 2.0
        if "z" in bad:
            rz /= 2.0
    raise ConfigError(
        f"could not separate perturbation supports at depth {depth}; increase depth")


def build_homoclinic_data(sys: BaseSystem, l: int, depth: int = 1) -> HomoclinicData:
    """Periodic anchors with homoclinic companions and disjoint supports.

    Shift bases use the first l aperiodic words starting with 0 (so l = 1
    anchors at the fixed point 0^inf and l = 2 adds the 2-cycle of 01); the
    torus base anchors at the origin.  Support radii start at 2^-depth
    (0.1 on the torus) and shrink until no ball captures an orbit point it
    must exclude: every ball sees exactly one point of the anchored orbit
    family, except that the tails of z_i may enter the ball at p_i, which
    is what the holonomies transport through.
    """
    if l < 1:
        raise ConfigError(f"need at least one site, got l = {l}")
    if depth < 1:
        raise ConfigError(f"depth must be >= 1, got {depth}")
    if sys.kind == "fullshift":
        return _shift_data(sys, l, depth)
    return _cat_data(sys, l, depth)


def _site_certificates(B, data: HomoclinicData):
    certs = []
    for i, site in enumerate(data.sites):
        cert = domination_check(B, data.sys, site.p, N=site.kappa, theta=None, k_max=16)
        if not (cert.holds and cert.bunched):
            raise RefusalError(
                f"site {i}: the loop map needs a bunched domination "
                f"certificate at p_{i}: 3*theta = {3.0 * cert.theta:.4f} vs "
                f"tau = {cert.tau:.4f}, holds = {cert.holds}")
        certs.append(cert)
    return certs


def _plain_product(B, sys, x, n, what):
    v = product(B, sys, x, n)
    if isinstance(v, ScaledProduct):
        raise NumericalError(f"{what}: orbit product overflowed (log scale {v.log_scale:.3g})")
    return v


def _site_maps(B, data, i, tol, n_max):
    """(g1, g2, Hs, Hu, P, y) at site i.  Hs maps the fiber at f^q z to the
    fiber at p, Hu maps the fiber at p to the fiber at z, so g2 = Hs P Hu
    is an automorphism of the fiber at p."""
    site = data.sites[i]
    sys = data.sys
    g1 = _plain_product(B, sys, site.p, site.kappa, f"site {i}")
    y = step(sys, site.z, site.q)
    hs = stable_holonomy(B, sys, y, site.p, tol=tol, n_max=n_max)
    if not hs.converged:
        raise NumericalError(
            f"site {i}: stable holonomy did not converge "
            f"(cauchy gap {hs.cauchy_gap:.3g} after {hs.n_stop} steps)")
    hu = unstable_holonomy(B, sys, site.p, site.z, tol=tol, n_max=n_max)
    if not hu.converged:
        raise NumericalError(
            f"site {i}: unstable holonomy did not converge "
            f"(cauchy gap {hu.cauchy_gap:.3g} after {hu.n_stop} steps)")
    P = _plain_product(B, sys, site.z, site.q, f"site {i}")
    g2 = hs.H @ P @ hu.H
    return g1, g2, hs.H, hu.H, P, y


def phi(B: CocycleSpec, data: HomoclinicData, tol: float = 1e-10, n_max: int = 400):
    """Loop map values [g_{1,1}, ..., g_{l,1}, g_{1,2}, ..., g_{l,2}].

    g_{i,1} is the period product of B at p_i; g_{i,2} conjugates the
    transition product along z_i back to the fiber at p_i through the
    unstable holonomy out and the stable holonomy back.  Requires a bunched
    domination certificate at every anchor (refusal otherwise); every
    output must pass group membership at 1e-6.
    """
    _site_certificates(B, data)
    G = B.descriptor
    firsts, seconds = [], []
    for i in range(data.l):
        g1, g2, _, _, _, _ = _site_maps(B, data, i, tol, n_max)
        for name, g in (("g1", g1), ("g2", g2)):
            res = contains(G, g, tol=1e-6)
            if not res.ok:
                raise NumericalError(
                    f"site {i}: {name} leaves the group (det residual "
                    f"{res.det_residual:.3g}, form residual {res.form_residual:.3g})")
        firsts.append(g1)
        seconds.append(g2)
    return firsts + seconds


@dataclasses.dataclass(frozen=True)
class PhiJacobian:
    """Jacobian of the loop map in Lie-algebra bump coordinates.

    Columns are unit-amplitude bump directions (Lie basis order) at
    p_1..p_l then z_1..z_l; rows are left-logarithmic variation coordinates
    (coords of dg g^-1) of g_{1,1}..g_{l,1} then g_{1,2}..g_{l,2}.
    block_norms holds the Frobenius norms of the four (l dim) x (l dim)
    blocks; the upper-right block vanishes identically in analytic mode
    because the period products never see the z-bumps."""

    matrix: np.ndarray
    mode: str
    h: float
    singular_values: np.ndarray
    rank: int
    rank_threshold: float
    block_norms: dict
    l: int
    lie_dim: int


def _right_log(dg, g):
    # dg g^-1 without forming the inverse
    return np.linalg.solve(g.T, dg.T).T


def _with_bump(B, bump):
    if hasattr(B, "bumps"):
        return perturbed(B.base, tuple(B.bumps) + (bump,))
    return perturbed(B, [bump])


def _analytic_jacobian(B, data, tol, n_max, certs):
    G = B.descriptor
    D = G.lie_dim
    l = data.l
    basis = lie_basis(G)
    series_tol = max(10.0 * tol, 1e-12)
    J = np.zeros((2 * l * D, 2 * l * D))
    for i in range(l):
        site = data.sites[i]
        g1, g2, Hs, Hu, P, y = _site_maps(B, data, i, tol, n_max)
        PHu = P @ Hu
        for a, xi in enumerate(basis):
            x = xi.entries
            # period product: only the factor at the anchor moves
            J[i * D:(i + 1) * D, i * D + a] = lie_coords(G, _right_log(g1 @ x, g1))
            # transition product: only the factor at z moves
            dg2 = Hs @ P @ x @ Hu
            J[(l + i) * D:(l + i + 1) * D, (l + i) * D + a] = lie_coords(
                G, _right_log(dg2, g2))
            # holonomies: series along both tails; the transition product
            # itself stays clear of the p-ball by construction
            bump = Bump(site.p, site.p_radius, x, 1.0)
            dHpy = stable_holonomy_derivative(
                B, data.sys, site.p, y, bump, tol=series_tol, n_max=n_max,
                certificate=certs[i])
            dHs = -(Hs @ dHpy @ Hs)
            dHu = unstable_holonomy_derivative(
                B, data.sys, site.z, site.p, bump, tol=series_tol, n_max=n_max,
                certificate=certs[i])
            dg2 = dHs @ PHu + Hs @ P @ dHu
            J[(l + i) * D:(l + i + 1) * D, i * D + a] = lie_coords(
                G, _right_log(dg2, g2))
    return J


def _fd_jacobian(B, data, h, tol, n_max):
    G = B.descriptor
    D = G.lie_dim
    l = data.l
    basis = lie_basis(G)
    base_vals = phi(B, data, tol=tol, n_max=n_max)
    J = np.zeros((2 * l * D, 2 * l * D))
    cols = []
    for site in data.sites:
        cols.append((site.p, site.p_radius))
    for site in data.sites:
        cols.append((site.z, site.z_radius))
    for c, (center, radius) in enumerate(cols):
        for a, xi in enumerate(basis):
            plus = phi(_with_bump(B, Bump(center, radius, xi.entries, h)),
                       data, tol=tol, n_max=n_max)
            minus = phi(_with_bump(B, Bump(center, radius, xi.entries, -h)),
                        data, tol=tol, n_max=n_max)
            for r in range(2 * l):
                dg = (plus[r] - minus[r]) / (2.0 * h)
                J[r * D:(r + 1) * D, c * D + a] = lie_coords(
                    G, _right_log(dg, base_vals[r]))
    return J


def phi_jacobian(
    B: CocycleSpec,
    data: HomoclinicData,
    mode: str = "analytic",
    h: float = 1e-4,
    tol: float = 1e-10,
    n_max: int = 400,
    rank_tol: float | None = None,
) -> PhiJacobian:
    """Jacobian of the loop map at B.

    Analytic mode differentiates the closed forms (the anchor factor for
    g_{i,1}, the z factor for g_{i,2}) and sums the holonomy derivative
    series for the response of g_{i,2} to bumps at the anchor; finite
    difference mode recomputes phi at amplitudes +-h.  Support disjointness
    makes every other entry vanish, so the matrix is lower block
    triangular: the upper-right block is exactly zero in analytic mode.
    """
    if mode not in ("analytic", "finite_difference"):
        raise ConfigError(f"mode must be analytic or finite_difference, got {mode!r}")
    if not h > 0.0:
        raise ConfigError(f"step h must be positive, got {h}")
    certs = _site_certificates(B, data)
    if mode == "analytic":
        J = _analytic_jacobian(B, data, tol, n_max, certs)
    else:
        J = _fd_jacobian(B, data, h, tol, n_max)
    s = np.linalg.svd(J, compute_uv=False)
    if rank_tol is None:
        rank_tol = float(s[0]) * max(J.shape) * np.finfo(np.float64).eps
    rank = int(np.sum(s > rank_tol))
    half = data.l * B.descriptor.lie_dim
    norms = {
        "upper_left": float(np.linalg.norm(J[:half, :half])),
        "upper_right": float(np.linalg.norm(J[:half, half:])),
        "lower_left": float(np.linalg.norm(J[half:, :half])),
        "lower_right": float(np.linalg.norm(J[half:, half:])),
    }
    return PhiJacobian(J, mode, h, s, rank, rank_tol, norms, data.l,
                       B.descriptor.lie_dim)


def jacobian_mode_agreement(a: PhiJacobian, b: PhiJacobian) -> float:
    """Relative gap ||A - B|| / max(||A||, ||B||) between two Jacobians.
    Values above 1e-3 should be flagged to the caller; the modes share no
    code path, so agreement is evidence both are right."""
    scale = max(np.linalg.norm(a.matrix), np.linalg.norm(b.matrix))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a.matrix - b.matrix) / scale)


@dataclasses.dataclass(frozen=True)
class SweepTrial:
    index: int
    amplitude: float        # largest bump amplitude in this trial
    holder_distance: float
    lambda1: float
    n: int
    positive: bool
    bunched: bool


@dataclasses.dataclass(frozen=True)
class SweepReport:
    """Positivity sweep outcome.  fraction is over completed trials;
    failures counts trials excluded by numerical breakdown."""

    fraction: float
    trials: tuple
    failures: int
    epsilon: float
    n: int
    threshold: float
    seed: int
    direction_mode: str


def _coherent_axis(G, rng):
    X = lie_from_coords(G, rng.normal(size=G.lie_dim)).entries
    if G.family == "SL" and G.field == "real":
        # hyperbolic lean: the symmetric part is traceless, hence still in
        # the algebra, and generates growth instead of rotation
        S = (X + X.T) / 2.0
        if np.linalg.norm(S) > 1e-9:
            X = S
    return X / np.linalg.norm(X, 2)


def _trial_directions(G, rng, n_bumps, mode, jitter):
    D = G.lie_dim
    if mode == "isotropic":
        out = []
        for _ in range(n_bumps):
            X = lie_from_coords(G, rng.normal(size=D)).entries
            out.append(X / np.linalg.norm(X, 2))
        return out
    axis = _coherent_axis(G, rng)
    out = []
    for _ in range(n_bumps):
        eta = lie_from_coords(G, rng.normal(size=D) * (jitter / math.sqrt(D))).entries
        E = scipy.linalg.expm(eta)
        out.append(np.linalg.solve(E.T, (E @ axis).T).T)
    return out


def _sweep_trial(A0, sys, epsilon, n, threshold, n_bumps, radius, mode, jitter,
                 holder_args, index, child):
    rng = np.random.default_rng(child)
    # draw order is fixed and independent of n so reruns at other lengths
    # see the same perturbation
    if sys.kind == "catmap":
        centers = [TorusPoint(rng.random(), rng.random()) for _ in range(n_bumps)]
    else:
        centers = sample(sys, rng, n_bumps, core_width=64)
    dirs = _trial_directions(A0.descriptor, rng, n_bumps, mode, jitter)
    amps = rng.uniform(epsilon / 2.0, epsilon, size=n_bumps) if epsilon > 0.0 \
        else np.zeros(n_bumps)
    bumps = [Bump(c, radius, d, float(a)) for c, d, a in zip(centers, dirs, amps)]
    if hasattr(A0, "bumps"):
        A = perturbed(A0.base, tuple(A0.bumps) + tuple(bumps))
    else:
        A = perturbed(A0, bumps)
    if sys.kind == "catmap":
        x0 = TorusPoint(rng.random(), rng.random())
        anchor = periodic_point(sys, (0, 0)).point
    else:
        x0 = sample(sys, rng, 1, core_width=_mc_core_width(A, n, 0))[0]
        anchor = periodic_point(sys, (0,)).point
    cert = domination_check(A, sys, anchor, N=1, theta=None, k_max=8)
    rep = lyapunov_spectrum(A, sys, x0, n)
    lam = float(rep.exponents[0])
    r, nu, samples = holder_args
    hd = holder_distance(A, A0, sys, r, nu, samples=samples) if epsilon > 0.0 else 0.0
    return SweepTrial(index, float(np.max(amps)), hd, lam, n,
                      lam > threshold, bool(cert.holds and cert.bunched))


def positivity_sweep(
    A0: CocycleSpec,
    sys: BaseSystem,
    epsilon: float,
    trials: int,
    seed: int,
    n: int,
    threshold: float = 1e-3,
    n_bumps: int = 8,
    bump_radius: float = 0.3,
    direction_mode: str = "coherent",
    jitter: float = 0.17,
    holder_r: int = 0,
    holder_nu: float = 1.0,
    holder_samples: int = 100,
    threads: int = 1,
) -> SweepReport:
    """Fraction of random bump perturbations of size <= epsilon whose top
    exponent exceeds threshold.

    Each trial draws n_bumps bump centers, Lie-algebra directions and
    amplitudes in [epsilon/2, epsilon] from its own child seed, re-checks
    domination for the perturbed cocycle, estimates the top exponent over
    an orbit of length n and records the Holder distance from A0.  The
    coherent direction mode draws one axis per trial and jitters it per
    bump by a small conjugation, so the bumps reinforce one expansion
    direction; isotropic mode draws every bump direction independently.
    Trials that break down numerically are logged and excluded from the
    fraction.  Deterministic for fixed seed, any thread count.
    """
    if epsilon < 0.0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}")
    if trials < 1:
        raise ConfigError(f"need at least one trial, got {trials}")
    if n < 1:
        raise ConfigError(f"orbit length must be >= 1, got {n}")
    if direction_mode not in ("coherent", "isotropic"):
        raise ConfigError(
            f"direction_mode must be coherent or isotropic, got {direction_mode!r}")
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    children = np.random.SeedSequence(seed).spawn(trials)
    holder_args = (holder_r, holder_nu, holder_samples)

    def run(i):
        try:
            return _sweep_trial(A0, sys, epsilon, n, threshold, n_bumps,
                                bump_radius, direction_mode, jitter,
                                holder_args, i, children[i])
        except NumericalError as e:
            log.warning("sweep trial %d excluded: %s", i, e)
            return None

    if threads == 1:
        results = [run(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, range(trials)))
    kept = tuple(t for t in results if t is not None)
    failures = trials - len(kept)
    positive = sum(1 for t in kept if t.positive)
    fraction = positive / len(kept) if kept else 0.0
    return SweepReport(fraction, kept, failures, epsilon, n, threshold, seed,
                       direction_mode)
