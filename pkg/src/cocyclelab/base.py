"""Uniformly hyperbolic base systems: the cat map and the two-sided full shift.

Points are exact where possible: torus points carry Fractions when built from
rational data, and shift points are eventually periodic bi-infinite symbol
sequences with decidable equality.  Brackets, periodic points and homoclinic
points follow the local-product-structure conventions

    W^s_loc(x) = {y : agreement at indices n >= 0}   (shift)
    W^u_loc(x) = {z : agreement at indices n <= -1}  (shift)

so a homoclinic companion may deviate starting at index 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

from ._fast import njit
from .errors import ConfigError, NumericalError

SQRT5 = math.sqrt(5.0)
CAT_TAU = math.log((3.0 + SQRT5) / 2.0)  # ln of the expanding eigenvalue
CAT_LAMBDA = (3.0 + SQRT5) / 2.0
UNSTABLE_SLOPE = (SQRT5 - 1.0) / 2.0
STABLE_SLOPE = -(1.0 + SQRT5) / 2.0
BOX_RADIUS = 0.2  # below the injectivity radius of the eigenline chart

Coord = Union[Fraction, float]


def _mod1(v: Coord) -> Coord:
    if isinstance(v, Fraction):
        return v - (v // 1)
    r = float(v) % 1.0
    return 0.0 if r >= 1.0 else r


@dataclass(frozen=True)
class TorusPoint:
    """A point of T^2; coordinates are Fractions (exact) or floats."""

    x: Coord
    y: Coord

    def __post_init__(self):
        object.__setattr__(self, "x", _mod1(self.x))
        object.__setattr__(self, "y", _mod1(self.y))

    @property
    def exact(self) -> bool:
        return isinstance(self.x, Fraction) and isinstance(self.y, Fraction)

    def floats(self) -> tuple[float, float]:
        return float(self.x), float(self.y)


class SymbolSequence:
    """Eventually periodic bi-infinite sequence over {0, ..., k-1}.

    Represents ...(left)^inf . core . (right)^inf... with core[origin] at
    index 0.  Equality is decided exactly by comparison over the join of the
    cores and one full lcm of the periods on each side.
    """

    __slots__ = ("k", "left", "core", "right", "origin")

    def __init__(self, k, left, core, right, origin=0):
        left = tuple(int(s) for s in left)
        core = tuple(int(s) for s in core)
        right = tuple(int(s) for s in right)
        if k < 2:
            raise ConfigError(f"alphabet size must be >= 2, got {k}")
        if not left or not right:
            raise ConfigError("periodic tails must be nonempty words")
        if not core:
            raise ConfigError("core must be a nonempty word")
        if not (0 <= origin < len(core)):
            raise ConfigError(
                f"origin {origin} outside core of length {len(core)}")
        for s in left + core + right:
            if not (0 <= s < k):
                raise ConfigError(f"symbol {s} outside alphabet of size {k}")
        self.k = int(k)
        self.left = left
        self.core = core
        self.right = right
        self.origin = int(origin)

    def get(self, n: int) -> int:
        """Symbol at index n."""
        i = n + self.origin
        if i < 0:
            return self.left[i % len(self.left)]
        if i >= len(self.core):
            return self.right[(i - len(self.core)) % len(self.right)]
        return self.core[i]

    def window(self, lo: int, hi: int) -> tuple[int, ...]:
        """Symbols at indices lo..hi inclusive."""
        return tuple(self.get(n) for n in range(lo, hi + 1))

    def shifted(self, n: int) -> "SymbolSequence":
        """The sequence with new index 0 at old index n (shift map, n steps).

        The core is unrolled as needed so the origin stays inside it; the
        represented sequence is exact, so shifted(m).shifted(n) equals
        shifted(m+n) as sequences.
        """
        left, core, right, origin = self.left, self.core, self.right, self.origin + n
        if origin < 0:
            m = (-origin + len(left) - 1) // len(left)
            core = left * m + core
            origin += m * len(left)
        elif origin >= len(core):
            m = (origin - len(core)) // len(right) + 1
            core = core + right * m
        # contents come from a validated sequence, so skip __init__ checks
        out = SymbolSequence.__new__(SymbolSequence)
        out.k, out.left, out.core, out.right, out.origin = self.k, left, core, right, origin
        return out

    def _extents(self):
        # core occupies indices [-origin, len(core)-1-origin]
        return self.origin, len(self.core) - self.origin

    def __eq__(self, other):
        if not isinstance(other, SymbolSequence):
            return NotImplemented
        if self.k != other.k:
            return False
        la = max(self.origin, other.origin)
        ra = max(len(self.core) - self.origin, len(other.core) - other.origin)
        lper = math.lcm(len(self.left), len(other.left))
        rper = math.lcm(len(self.right), len(other.right))
        return all(self.get(n) == other.get(n)
                   for n in range(-(la + lper), ra + rper + 1))

    __hash__ = None

    def __repr__(self):
        w = "".join(str(s) for s in self.window(-4, 4))
        return f"SymbolSequence(k={self.k}, [-4..4]={w!r})"

    def text(self) -> str:
        j = "".join
        return (f"{j(map(str, self.left))}|{j(map(str, self.core))}"
                f"@{self.origin}|{j(map(str, self.right))}")


BasePoint = Union[TorusPoint, SymbolSequence]


@dataclass(frozen=True)
class BaseSystem:
    """CatMap on T^2 with Lebesgue, or FullShift(k) with Bernoulli weights.

    tau is the declared hyperbolicity rate (nats/iteration), K_hyp the
    distortion constant; both systems are uniformly hyperbolic so every
    point lies in a hyperbolic block with these constants.
    """

    kind: str  # "catmap" | "fullshift"
    k: int | None
    tau: float
    K_hyp: float
    measure: str  # "lebesgue" | "bernoulli"
    weights: tuple[float, ...] | None


def cat_map() -> BaseSystem:
    return BaseSystem("catmap", None, CAT_TAU, 1.0, "lebesgue", None)


def full_shift(k: int = 2, weights=None) -> BaseSystem:
    if k < 2:
        raise ConfigError(f"full shift needs k >= 2 symbols, got {k}")
    if weights is None:
        weights = tuple(1.0 / k for _ in range(k))
    else:
        weights = tuple(float(w) for w in weights)
        if len(weights) != k:
            raise ConfigError(f"expected {k} Bernoulli weights, got {len(weights)}")
        if any(w <= 0 for w in weights):
            raise ConfigError("Bernoulli weights must be positive")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ConfigError(f"Bernoulli weights sum to {sum(weights)!r}, not 1")
    return BaseSystem("fullshift", int(k), math.log(2.0), 1.0, "bernoulli", weights)


def _check_point(sys: BaseSystem, p: BasePoint):
    if sys.kind == "catmap":
        if not isinstance(p, TorusPoint):
            raise ConfigError(f"CatMap acts on TorusPoint, got {type(p).__name__}")
    else:
        if not isinstance(p, SymbolSequence):
            raise ConfigError(f"FullShift acts on SymbolSequence, got {type(p).__name__}")
        if p.k != sys.k:
            raise ConfigError(f"sequence over {p.k} symbols fed to FullShift({sys.k})")


def step(sys: BaseSystem, p: BasePoint, n: int) -> BasePoint:
    """n-fold application of the base map (n may be negative).

    CatMap: (x,y) -> (2x+y, x+y) mod 1, inverse (x,y) -> (x-y, -x+2y) mod 1;
    exact on rational points.  FullShift: index shift.
    """
    _check_point(sys, p)
    if sys.kind == "fullshift":
        return p if n == 0 else p.shifted(n)
    x, y = p.x, p.y
    if n >= 0:
        for _ in range(n):
            x, y = _mod1(2 * x + y), _mod1(x + y)
    else:
        for _ in range(-n):
            x, y = _mod1(x - y), _mod1(-x + 2 * y)
    return TorusPoint(x, y)


def _wrap_diff(a: float, b: float) -> float:
    """Signed difference b - a wrapped to [-1/2, 1/2)."""
    d = (b - a) % 1.0
    return d - 1.0 if d >= 0.5 else d


def point_distance(a: BasePoint, b: BasePoint) -> float:
    """Metric dispatching on point type: Euclidean on T^2 for torus points,
    2^(-m) on sequences with m the largest half-width of symbol agreement
    around index 0 (equal sequences: 0)."""
    if isinstance(a, TorusPoint):
        ax, ay = a.floats()
        bx, by = b.floats()
        return math.hypot(_wrap_diff(ax, bx), _wrap_diff(ay, by))
    if a.get(0) != b.get(0):
        return 1.0
    if a == b:
        return 0.0
    m = 1
    while all(a.get(i) == b.get(i) for i in (-m, m)):
        m += 1
    return 2.0 ** (-m)


def distance(sys: BaseSystem, a: BasePoint, b: BasePoint) -> float:
    """The base metric of sys (see point_distance)."""
    _check_point(sys, a)
    _check_point(sys, b)
    return point_distance(a, b)


def bracket(sys: BaseSystem, y: BasePoint, z: BasePoint) -> BasePoint:
    """[y, z] = W^u_loc(y) cap W^s_loc(z).

    CatMap: intersection of the unstable eigenline through y (slope
    (sqrt(5)-1)/2) with the stable eigenline through z, in the chart of y.
    FullShift: the splice taking coordinates from y for n <= 0 and from z
    for n >= 0 (requires y_0 = z_0).
    """
    _check_point(sys, y)
    _check_point(sys, z)
    if sys.kind == "fullshift":
        if y.get(0) != z.get(0):
            raise ConfigError("points not in a common product box (y_0 != z_0)")
        la, _ = y._extents()
        _, rb = z._extents()
        # Include one full right period so the tail phase is aligned exactly.
        core = y.window(-la, 0) + z.window(1, rb - 1 + len(z.right))
        return SymbolSequence(sys.k, y.left, core, z.right, origin=la)
    if distance(sys, y, z) >= BOX_RADIUS:
        raise ConfigError("points not in a common product box "
                          f"(d = {distance(sys, y, z):.4f} >= {BOX_RADIUS})")
    yx, yy = y.floats()
    zx, zy = z.floats()
    dx = _wrap_diff(yx, zx)
    dy = _wrap_diff(yy, zy)
    # y + t(1,u) = z' + r(1,s): Cramer with determinant u - s = sqrt(5).
    t = (-STABLE_SLOPE * dx + dy) / SQRT5
    return TorusPoint(_mod1(yx + t), _mod1(yy + t * UNSTABLE_SLOPE))


class PeriodicPoint(NamedTuple):
    point: BasePoint
    period: int
    corrected: bool  # True when the requested spec was not minimal


def periodic_point(sys: BaseSystem, spec) -> PeriodicPoint:
    """Exact periodic point from a rational pair (CatMap) or word (FullShift).

    The returned period is minimal; a non-minimal spec (e.g. word "0101")
    yields the primitive period with corrected=True.
    """
    if sys.kind == "catmap":
        try:
            p = TorusPoint(Fraction(spec[0]), Fraction(spec[1]))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"CatMap periodic spec must be a rational pair: {e}")
        q = p
        for kappa in range(1, 2 * (p.x.denominator * p.y.denominator) ** 2 + 2):
            q = step(sys, q, 1)
            if q == p:
                return PeriodicPoint(p, kappa, False)
        raise NumericalError("periodic orbit search did not close")  # pragma: no cover
    word = tuple(int(s) for s in spec)
    if not word:
        raise ConfigError("periodic word must be nonempty")
    kappa = len(word)
    for cand in range(1, len(word)):
        if len(word) % cand == 0 and word == word[cand:] + word[:cand]:
            kappa = cand
            break
    prim = word[:kappa]
    p = SymbolSequence(sys.k if sys.k else 2, prim, prim, prim, origin=0)
    _check_point(sys, p)
    return PeriodicPoint(p, kappa, kappa != len(word))


class HomoclinicPoint(NamedTuple):
    point: BasePoint
    q: int


def minimal_period(sys: BaseSystem, p: BasePoint, bound: int = 64) -> int:
    for kappa in range(1, bound + 1):
        if step(sys, p, kappa) == p:
            return kappa
    raise ConfigError(f"point is not periodic with period <= {bound}")


def homoclinic_point(sys: BaseSystem, p: BasePoint, depth: int = 1) -> HomoclinicPoint:
    """A homoclinic companion z of the periodic point p.

    z lies in W^u_loc(p) (agreement with p at n <= -1 on the shift), deviates
    from the orbit of p, and step(z, q) lies in W^s_loc(p).

    FullShift: the deviating core occupies indices 0..q-1 with q the smallest
    multiple of the period that is >= depth; the deviation flips the symbol
    at index 0.  CatMap: supported for the fixed point (0,0) only — z is the
    exact intersection of the projected unstable and stable eigenlines
    (lattice translate (0,1)), pulled back until it enters the local unstable
    segment, with q the first forward time landing in the local stable
    segment; depth pulls z further down the unstable segment.
    """
    if depth < 1:
        raise ConfigError("depth too small to deviate from p (need depth >= 1)")
    if sys.kind == "fullshift":
        kappa = minimal_period(sys, p)
        word = p.window(0, kappa - 1)
        q = kappa * ((depth + kappa - 1) // kappa)
        dev = ((word[0] + 1) % sys.k,) + tuple(word[(j % kappa)] for j in range(1, q))
        z = SymbolSequence(sys.k, word, dev, word, origin=0)
        return HomoclinicPoint(z, q)
    if not (p == TorusPoint(Fraction(0), Fraction(0))):
        raise ConfigError("CatMap homoclinic construction is defined for the "
                          "fixed point (0,0) only")
    u = UNSTABLE_SLOPE
    # Intersection of t(1,u) with (0,1) + s(1,STABLE_SLOPE): t = s = 1/sqrt(5).
    t = 1.0 / SQRT5
    s = 1.0 / SQRT5
    len_u = math.hypot(1.0, UNSTABLE_SLOPE)
    len_s = math.hypot(1.0, STABLE_SLOPE)
    pulls = 0
    while abs(t) * len_u > BOX_RADIUS or pulls < depth:
        t /= CAT_LAMBDA
        s *= CAT_LAMBDA
        pulls += 1
    z = TorusPoint(_mod1(t), _mod1(t * u))
    q = 0
    while abs(s) * len_s > BOX_RADIUS:
        s /= CAT_LAMBDA
        q += 1
    return HomoclinicPoint(z, max(q, 1))


def dist_to_stable_line(p: TorusPoint) -> float:
    """Distance from p to the projected stable eigenline through (0,0)."""
    x, y = p.floats()
    nrm = math.hypot(1.0, STABLE_SLOPE)
    best = math.inf
    for mx in (-1, 0, 1):
        for my in (-1, 0, 1):
            # distance from lift (x+mx, y+my) to the line y = s*x
            lx, ly = x + mx, y + my
            best = min(best, abs(STABLE_SLOPE * lx - ly) / nrm)
    return best


def dist_to_unstable_line(p: TorusPoint) -> float:
    x, y = p.floats()
    nrm = math.hypot(1.0, UNSTABLE_SLOPE)
    best = math.inf
    for mx in (-1, 0, 1):
        for my in (-1, 0, 1):
            lx, ly = x + mx, y + my
            best = min(best, abs(UNSTABLE_SLOPE * lx - ly) / nrm)
    return best


def sample(sys: BaseSystem, rng, n: int, core_width: int = 64) -> list[BasePoint]:
    """n i.i.d. draws from the system's measure.

    FullShift draws are an approximation: a random core of width core_width
    around the origin with random periodic tails of length 8 (the far tails
    are periodic, not i.i.d.); orbit computations that consume more than
    core_width symbols should request a wider core.
    """
    if n < 1:
        raise ConfigError("sample size must be >= 1")
    if sys.kind == "catmap":
        pts = rng.random((n, 2))
        return [TorusPoint(float(x), float(y)) for x, y in pts]
    w = np.asarray(sys.weights)
    out = []
    for _ in range(n):
        core = rng.choice(sys.k, size=core_width, p=w)
        left = rng.choice(sys.k, size=8, p=w)
        right = rng.choice(sys.k, size=8, p=w)
        out.append(SymbolSequence(sys.k, left, core, right, origin=core_width // 2))
    return out


# --- fast orbit materialization (consumed by the cocycle engine) ------------

@njit
def _cat_orbit_kernel(x0: float, y0: float, n: int):
    xs = np.empty(n)
    ys = np.empty(n)
    x, y = x0, y0
    for i in range(n):
        xs[i] = x
        ys[i] = y
        x, y = (2.0 * x + y) % 1.0, (x + y) % 1.0
        if x >= 1.0:
            x = 0.0
        if y >= 1.0:
            y = 0.0
    return xs, ys


def orbit_coords(sys: BaseSystem, p: TorusPoint, n: int) -> np.ndarray:
    """(n, 2) array of the forward orbit p, f(p), ..., f^(n-1)(p) (floats).

    Exact (Fraction) points are stepped in exact arithmetic and cast to
    float per step, so any two computations through the same exact point
    see bitwise identical coordinates.  The cat matrix is integral, so
    denominators never grow and the cost stays linear.  Float points use
    the compiled float recurrence."""
    _check_point(sys, p)
    if sys.kind != "catmap":
        raise ConfigError("orbit_coords applies to CatMap only")
    n = int(n)
    if p.exact:
        out = np.empty((n, 2))
        q = p
        for i in range(n):
            out[i, 0], out[i, 1] = q.floats()
            if i + 1 < n:
                q = step(sys, q, 1)
        return out
    x0, y0 = p.floats()
    xs, ys = _cat_orbit_kernel(x0, y0, int(n))
    return np.column_stack((xs, ys))


def orbit_symbols(sys: BaseSystem, p: SymbolSequence, lo: int, hi: int) -> np.ndarray:
    """Symbols of p at indices lo..hi inclusive, as an int64 array."""
    _check_point(sys, p)
    return np.array(p.window(lo, hi), dtype=np.int64)


# --- text encodings ---------------------------------------------------------

def parse_point(text: str) -> BasePoint:
    """Parse "torus:x,y" (rational like 1/5 or decimal) or
    "seq:k:left|core@origin|right" (digit symbols, k <= 10)."""
    if text.startswith("torus:"):
        parts = text[len("torus:"):].split(",")
        if len(parts) != 2:
            raise ConfigError(f"torus point needs two coordinates: {text!r}")
        coords = []
        for part in parts:
            part = part.strip()
            try:
                if "/" in part or part.lstrip("+-").isdigit():
                    coords.append(Fraction(part))
                else:
                    coords.append(float(part))
            except (ValueError, ZeroDivisionError) as e:
                raise ConfigError(f"bad torus coordinate {part!r}: {e}")
        return TorusPoint(*coords)
    if text.startswith("seq:"):
        try:
            _, k_str, body = text.split(":", 2)
            k = int(k_str)
            left, rest = body.split("|", 1)
            core_origin, right = rest.rsplit("|", 1)
            core, origin_str = core_origin.split("@")
            if k > 10:
                raise ConfigError("text encoding supports digit symbols (k <= 10)")
            return SymbolSequence(k, [int(c) for c in left], [int(c) for c in core],
                                  [int(c) for c in right], origin=int(origin_str))
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"bad sequence encoding {text!r}: {e}")
    raise ConfigError(f"unknown point encoding {text!r} "
                      "(expected torus:... or seq:...)")


def format_point(p: BasePoint) -> str:
    if isinstance(p, TorusPoint):
        def fmt(c):
            return str(c) if isinstance(c, Fraction) else repr(c)
        return f"torus:{fmt(p.x)},{fmt(p.y)}"
    return f"seq:{p.k}:{p.text()}"
