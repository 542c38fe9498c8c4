"""Lyapunov spectrum estimation for orbit products.

The whole spectrum comes from the standard QR re-orthonormalization scheme:
maintain an orthonormal frame Q_k, push it through each factor, re-factor
as Q_(k+1) R_(k+1) with positive diagonal, and average the log diagonal of
R.  Exponents are reported in nonincreasing order together with a
window_drift diagnostic: the largest variation of any running exponent over
the last 10 percent of the run, which is the honest resolution of the
estimate.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
from typing import Optional

import numpy as np

from ._fast import njit
from .base import BasePoint, BaseSystem, sample, step
from .cocycles import CocycleSpec, LocallyConstant, Perturbed, evaluate_orbit
from .errors import ConfigError, NumericalError

_CHUNK = 8192


@njit
def _qr_push(mats, q):
    """Push the frame q through each factor, collecting log diag R.

    mats: (n, d, d) factors, q: (d, d) orthonormal columns.  Returns the
    (n, d) array of log R_ii increments and the final frame.  Modified
    Gram-Schmidt with positive diagonal; a collapsed column produces a
    non-finite increment which the caller turns into an error.
    """
    n = mats.shape[0]
    d = mats.shape[1]
    incs = np.empty((n, d), dtype=np.float64)
    for k in range(n):
        v = mats[k] @ q
        for j in range(d):
            for i in range(j):
                c = v[0, i] - v[0, i]
                for l in range(d):
                    c += np.conj(v[l, i]) * v[l, j]
                for l in range(d):
                    v[l, j] -= c * v[l, i]
            s = 0.0
            for l in range(d):
                s += abs(v[l, j]) ** 2
            r = math.sqrt(s)
            incs[k, j] = math.log(r)
            for l in range(d):
                v[l, j] /= r
        q = v
    return incs, q


@dataclasses.dataclass(frozen=True)
class LyapunovReport:
    """Finite-orbit spectrum estimate.

    exponents are nonincreasing; sum_residual = |sum of exponents| (zero in
    exact arithmetic for determinant-one groups); window_drift bounds how
    much any running exponent still moved over the final 10 percent of the
    orbit and should be read as the resolution of the estimate.
    """

    x0: BasePoint
    n: int
    warmup: int
    exponents: tuple
    sum_residual: float
    window_drift: float


def _collect_increments(A: CocycleSpec, sys: BaseSystem, x: BasePoint, n: int, q0=None):
    d = A.descriptor.d
    if q0 is None:
        q = np.eye(d, dtype=A.descriptor.dtype)
    else:
        q = np.asarray(q0, dtype=A.descriptor.dtype)
    incs = np.empty((n, d), dtype=np.float64)
    done = 0
    y = x
    while done < n:
        m = min(_CHUNK, n - done)
        vals = evaluate_orbit(A, sys, y, m)
        if not np.all(np.isfinite(vals)):
            bad = int(np.nonzero(~np.isfinite(vals).reshape(m, -1).all(axis=1))[0][0])
            raise NumericalError(f"non-finite cocycle value at orbit step {done + bad}")
        part, q = _qr_push(vals, q)
        if not np.all(np.isfinite(part)):
            bad = int(np.nonzero(~np.isfinite(part).all(axis=1))[0][0])
            raise NumericalError(f"orbit product degenerated at step {done + bad}")
        incs[done : done + m] = part
        done += m
        if done < n:
            y = step(sys, y, m)
    return incs, q


def lyapunov_spectrum(
    A: CocycleSpec,
    sys: BaseSystem,
    x: BasePoint,
    n: int,
    warmup: int = 0,
) -> LyapunovReport:
    """Estimate the Lyapunov spectrum along the forward orbit of x.

    warmup steps are run first and discarded; they let the frame align with
    the Oseledets flag so the averages over the measured window are free of
    the O(1/n) misalignment transient.  Non-finite values anywhere raise
    NumericalError naming the offending step.
    """
    if n < 1:
        raise ConfigError(f"orbit length must be >= 1, got {n}")
    if warmup < 0:
        raise ConfigError(f"warmup must be >= 0, got {warmup}")
    q = None
    y = x
    if warmup > 0:
        _, q = _collect_increments(A, sys, x, warmup)
        y = step(sys, x, warmup)
    incs, _ = _collect_increments(A, sys, y, n, q)
    sums = np.cumsum(incs, axis=0)
    lam = sums[-1] / n
    lo = max(0, int(math.ceil(0.9 * n)) - 1)
    ks = np.arange(lo + 1, n + 1, dtype=np.float64)
    running = sums[lo:] / ks[:, None]
    drift = float(np.max(running.max(axis=0) - running.min(axis=0)))
    order = np.argsort(-lam, kind="stable")
    exponents = tuple(float(v) for v in lam[order])
    return LyapunovReport(
        x0=x,
        n=n,
        warmup=warmup,
        exponents=exponents,
        sum_residual=float(abs(lam.sum())),
        window_drift=drift,
    )


@dataclasses.dataclass(frozen=True)
class TopExponentMC:
    mean: float
    std_error: float
    per_trial: tuple
    n: int
    trials: int
    seed: int


def _mc_core_width(A: CocycleSpec, n: int, warmup: int) -> int:
    # sample() centers the origin, so the core must cover [-w, warmup+n-1+w]
    # on the right half alone or the run would read the periodic tail
    w = 1
    spec = A.base if isinstance(A, Perturbed) else A
    if isinstance(spec, LocallyConstant):
        w = spec.window
    return 2 * (n + warmup + w) + 8


def top_exponent_mc(
    A: CocycleSpec,
    sys: BaseSystem,
    n: int,
    trials: int,
    seed: int,
    warmup: int = 0,
    threads: int = 1,
) -> TopExponentMC:
    """Monte Carlo average of the top exponent over random starting points.

    Each trial draws its starting point from an RNG stream derived from
    (seed, trial index), so results do not depend on execution order or on
    the thread count.  On the shift, sampled cores are wide enough to cover
    every symbol the run reads."""
    if trials < 2:
        raise ConfigError(f"trials must be >= 2, got {trials}")
    children = np.random.SeedSequence(seed).spawn(trials)
    width = _mc_core_width(A, n, warmup)

    def one(t: int) -> float:
        rng = np.random.default_rng(children[t])
        x0 = sample(sys, rng, 1, core_width=width)[0]
        rep = lyapunov_spectrum(A, sys, x0, n, warmup=warmup)
        return rep.exponents[0]

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            per = list(ex.map(one, range(trials)))
    else:
        per = [one(t) for t in range(trials)]
    arr = np.array(per)
    return TopExponentMC(
        mean=float(arr.mean()),
        std_error=float(arr.std(ddof=1) / math.sqrt(trials)),
        per_trial=tuple(per),
        n=n,
        trials=trials,
        seed=seed,
    )
