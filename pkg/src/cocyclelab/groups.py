"""Descriptors and Lie-algebra plumbing for the noncompact classical groups.

Supported families: SL(d,K) for K in {R,C}, Sp(d,R) with d even, SO(p,q),
SU(p,q).  A group is described by its field, matrix size and (except for SL)
the preserved form J; membership is checked through the determinant and form
residuals.  Lie-algebra bases are built explicitly from integer/unit-imaginary
entries so that basis elements satisfy their defining constraints exactly.

Norm conventions (the underlying estimates are norm-independent, so a choice
has to be made): operator 2-norm for membership and constraint residuals,
Frobenius norm for distances between matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np
import scipy.linalg

from .errors import ConfigError

FAMILIES = ("SL", "Sp", "SO_pq", "SU_pq")
FIELDS = ("real", "complex")

DEFAULT_MEMBERSHIP_TOL = 1e-9


def _opnorm(M):
    """Operator 2-norm (largest singular value)."""
    return float(np.linalg.norm(np.asarray(M), 2))


@dataclass(frozen=True)
class GroupDescriptor:
    """A classical matrix group G inside SL(d,K).

    Fields:
        family: one of FAMILIES.
        field: "real" or "complex".
        d: matrix size, >= 2.
        form: the preserved d x d form J, or None for SL.
        signature: (p, q) for SO_pq/SU_pq, else None.
        membership_tol: default residual tolerance for contains().
    """

    family: str
    field: str
    d: int
    form: np.ndarray | None = None
    signature: tuple[int, int] | None = None
    membership_tol: float = DEFAULT_MEMBERSHIP_TOL

    @property
    def dtype(self):
        return np.complex128 if self.field == "complex" else np.float64

    @property
    def lie_dim(self) -> int:
        """Real dimension of the Lie algebra (closed form per family)."""
        d = self.d
        if self.family == "SL":
            return d * d - 1 if self.field == "real" else 2 * (d * d - 1)
        if self.family == "Sp":
            return d * (d + 1) // 2
        if self.family == "SO_pq":
            return d * (d - 1) // 2
        return d * d - 1  # SU_pq, real dimension

    def key(self):
        return (self.family, self.field, self.d, self.signature)

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, GroupDescriptor) and self.key() == other.key()


@dataclass(frozen=True)
class GroupElement:
    entries: np.ndarray
    descriptor: GroupDescriptor


@dataclass(frozen=True)
class LieVector:
    entries: np.ndarray
    descriptor: GroupDescriptor


@dataclass(frozen=True)
class MembershipResult:
    ok: bool
    det_residual: float
    form_residual: float

    def __bool__(self):
        return self.ok


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


def make_group(family, field, d, signature=None,
               membership_tol=DEFAULT_MEMBERSHIP_TOL) -> GroupDescriptor:
    """Build a validated descriptor with its canonical form J.

    Canonical forms: J = diag(I_p, -I_q) for SO_pq and SU_pq,
    J = [[0, I_n], [-I_n, 0]] for Sp(2n, R).  SL carries no form.

    Raises ConfigError naming the violated constraint on inconsistent input.
    """
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}, expected one of {FAMILIES}")
    if field not in FIELDS:
        raise ConfigError(f"unknown field {field!r}, expected one of {FIELDS}")
    if not (isinstance(d, (int, np.integer)) and d >= 2):
        raise ConfigError(f"matrix size d must be an integer >= 2, got {d!r}")
    if membership_tol < 0:
        raise ConfigError("membership_tol must be nonnegative")

    if family == "Sp":
        if field != "real":
            raise ConfigError("Sp descriptors are real (Sp(d,R) only)")
        if d % 2 != 0:
            raise ConfigError(f"Sp requires even d, got d={d}")
        if signature is not None:
            raise ConfigError("Sp takes no signature")
        n = d // 2
        J = np.zeros((d, d))
        J[:n, n:] = np.eye(n)
        J[n:, :n] = -np.eye(n)
        return GroupDescriptor("Sp", field, int(d), _frozen(J, np.float64),
                               None, membership_tol)

    if family in ("SO_pq", "SU_pq"):
        if signature is None:
            raise ConfigError(f"{family} requires a signature (p, q)")
        p, q = signature
        if p < 1 or q < 1 or p + q != d:
            raise ConfigError(
                f"signature must satisfy p,q >= 1 and p+q=d, got (p,q)=({p},{q}), d={d}")
        want = "real" if family == "SO_pq" else "complex"
        if field != want:
            raise ConfigError(f"{family} requires field={want!r}")
        J = np.diag([1.0] * p + [-1.0] * q)
        dtype = np.float64 if want == "real" else np.complex128
        return GroupDescriptor(family, field, int(d), _frozen(J, dtype),
                               (int(p), int(q)), membership_tol)

    if signature is not None:
        raise ConfigError("SL takes no signature")
    return GroupDescriptor("SL", field, int(d), None, None, membership_tol)


def identity(G: GroupDescriptor) -> GroupElement:
    return GroupElement(_frozen(np.eye(G.d), G.dtype), G)


def contains(G: GroupDescriptor, M, tol=None) -> MembershipResult:
    """Membership test with residual diagnostics.

    True iff |det M - 1| <= tol and, when J is present,
    ||M^H J M - J|| <= tol (operator norm; H is plain transpose for real
    groups, conjugate transpose for SU).  A singular M yields infinite
    residual rather than an exception.
    """
    if tol is None:
        tol = G.membership_tol
    M = np.asarray(M, dtype=G.dtype)
    if M.shape != (G.d, G.d):
        raise ConfigError(f"expected a {G.d}x{G.d} matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        return MembershipResult(False, np.inf, np.inf)
    det = np.linalg.det(M)
    det_res = float(abs(det - 1.0))
    if G.form is None:
        form_res = 0.0
    else:
        J = G.form
        form_res = _opnorm(M.conj().T @ J @ M - J)
    ok = det_res <= tol and form_res <= tol
    return MembershipResult(bool(ok), det_res, form_res)


# Basis cache keyed by descriptor key; bases are immutable and reused freely.
_BASIS_CACHE: dict = {}
_GRAM_CACHE: dict = {}


def _unit(d, i, j, val, dtype):
    X = np.zeros((d, d), dtype=dtype)
    X[i, j] = val
    return X


def _sl_basis(d, dtype):
    out = []
    for i in range(d):
        for j in range(d):
            if i != j:
                out.append(_unit(d, i, j, 1.0, dtype))
    for i in range(d - 1):
        X = np.zeros((d, d), dtype=dtype)
        X[i, i] = 1.0
        X[i + 1, i + 1] = -1.0
        out.append(X)
    return out


def _sp_basis(d):
    # X = [[A, B], [C, -A^T]] with B, C symmetric; J = [[0,I],[-I,0]].
    n = d // 2
    out = []
    for i in range(n):
        for j in range(n):
            X = np.zeros((d, d))
            X[i, j] = 1.0
            X[n + j, n + i] = -1.0
            out.append(X)
    for i in range(n):
        for j in range(i, n):
            X = np.zeros((d, d))
            X[i, n + j] = 1.0
            X[j, n + i] = 1.0
            out.append(X)
    for i in range(n):
        for j in range(i, n):
            X = np.zeros((d, d))
            X[n + i, j] = 1.0
            X[n + j, i] = 1.0
            out.append(X)
    return out


def _so_pq_basis(p, q):
    # X = [[A, B], [B^T, D]] with A, D skew; J = diag(I_p, -I_q).
    d = p + q
    out = []
    for i in range(p):
        for j in range(i + 1, p):
            X = np.zeros((d, d))
            X[i, j] = 1.0
            X[j, i] = -1.0
            out.append(X)
    for i in range(q):
        for j in range(i + 1, q):
            X = np.zeros((d, d))
            X[p + i, p + j] = 1.0
            X[p + j, p + i] = -1.0
            out.append(X)
    for i in range(p):
        for j in range(q):
            X = np.zeros((d, d))
            X[i, p + j] = 1.0
            X[p + j, i] = 1.0
            out.append(X)
    return out


def _su_pq_basis(p, q):
    # X = [[A, B], [B*, D]], A and D anti-Hermitian, tr X = 0;
    # J = diag(I_p, -I_q).  All entries are 0, +-1 or +-1j, so the
    # constraints hold exactly.
    d = p + q
    out = []
    for j in range(d - 1):
        X = np.zeros((d, d), dtype=np.complex128)
        X[j, j] = 1j
        X[j + 1, j + 1] = -1j
        out.append(X)

    def diag_block(lo, hi):
        for i in range(lo, hi):
            for j in range(i + 1, hi):
                Y = np.zeros((d, d), dtype=np.complex128)
                Y[i, j] = 1.0
                Y[j, i] = -1.0
                out.append(Y)
                Z = np.zeros((d, d), dtype=np.complex128)
                Z[i, j] = 1j
                Z[j, i] = 1j
                out.append(Z)

    diag_block(0, p)
    diag_block(p, d)
    for i in range(p):
        for j in range(p, d):
            Y = np.zeros((d, d), dtype=np.complex128)
            Y[i, j] = 1.0
            Y[j, i] = 1.0
            out.append(Y)
            Z = np.zeros((d, d), dtype=np.complex128)
            Z[i, j] = 1j
            Z[j, i] = -1j
            out.append(Z)
    return out


def lie_basis(G: GroupDescriptor) -> list[LieVector]:
    """Ordered Lie-algebra basis; length equals G.lie_dim.

    Entries are drawn from {0, +-1, +-i} so trace and form constraints are
    satisfied exactly, not merely to rounding.  Cached per descriptor.
    """
    key = G.key()
    if key in _BASIS_CACHE:
        return _BASIS_CACHE[key]
    if G.family == "SL":
        mats = _sl_basis(G.d, G.dtype)
        if G.field == "complex":
            mats = mats + [1j * X for X in mats]
    elif G.family == "Sp":
        mats = _sp_basis(G.d)
    elif G.family == "SO_pq":
        mats = _so_pq_basis(*G.signature)
    else:
        mats = _su_pq_basis(*G.signature)
    assert len(mats) == G.lie_dim
    basis = [LieVector(_frozen(X, G.dtype), G) for X in mats]
    _BASIS_CACHE[key] = basis
    return basis


def _gram_factor(G: GroupDescriptor):
    """Cholesky factor of the basis Gram matrix under Re tr(X^H Y)."""
    key = G.key()
    if key not in _GRAM_CACHE:
        B = [X.entries for X in lie_basis(G)]
        n = len(B)
        gram = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                gram[i, j] = np.real(np.vdot(B[i], B[j]))
        _GRAM_CACHE[key] = (scipy.linalg.cho_factor(gram), B)
    return _GRAM_CACHE[key]


def lie_coords(G: GroupDescriptor, X) -> np.ndarray:
    """Real coordinates of matrix X in the lie_basis ordering.

    X need not lie exactly in the algebra; the orthogonal projection
    coefficients are returned (least squares in the Frobenius inner product).
    """
    cho, B = _gram_factor(G)
    X = np.asarray(X, dtype=G.dtype)
    rhs = np.array([np.real(np.vdot(Bk, X)) for Bk in B])
    return scipy.linalg.cho_solve(cho, rhs)


def lie_from_coords(G: GroupDescriptor, coords) -> LieVector:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape != (G.lie_dim,):
        raise ConfigError(
            f"expected {G.lie_dim} coordinates for {G.family}, got shape {coords.shape}")
    X = np.zeros((G.d, G.d), dtype=G.dtype)
    for c, Bk in zip(coords, lie_basis(G)):
        if c != 0.0:
            X = X + c * Bk.entries
    return LieVector(_frozen(X, G.dtype), G)


def lie_residuals(G: GroupDescriptor, X) -> tuple[float, float]:
    """(trace residual, form residual ||X^H J + J X||) of a candidate matrix."""
    X = np.asarray(X, dtype=G.dtype)
    tr = float(abs(np.trace(X)))
    if G.form is None:
        return tr, 0.0
    J = G.form
    return tr, _opnorm(X.conj().T @ J + J @ X)


EXP_RANGE_LIMIT = 10.0


def exp_retract(G: GroupDescriptor, X: LieVector, t: float) -> GroupElement:
    """exp(t X) as a GroupElement via scaling-and-squaring.

    The scaling-and-squaring contract is relied on for relative error
    <= 1e-12 only when ||tX|| <= 10; larger arguments raise rather than
    silently losing precision.
    """
    tX = t * np.asarray(X.entries, dtype=G.dtype)
    nrm = _opnorm(tX)
    if nrm > EXP_RANGE_LIMIT:
        raise ConfigError(
            f"||t X|| = {nrm:.3g} exceeds the exp range limit {EXP_RANGE_LIMIT}; "
            "split the retraction into smaller steps")
    M = scipy.linalg.expm(tX)
    return GroupElement(_frozen(M, G.dtype), G)


def random_element(G: GroupDescriptor, rng, scale: float) -> GroupElement:
    """exp of a random Lie-algebra combination.

    Coefficients are i.i.d. uniform in [-scale, scale] over lie_basis(G);
    the result is a deterministic function of the rng state.
    """
    if scale < 0:
        raise ConfigError("scale must be >= 0")
    coeffs = rng.uniform(-scale, scale, size=G.lie_dim)
    X = lie_from_coords(G, coeffs)
    return exp_retract(G, X, 1.0)


def renormalize(G: GroupDescriptor, M) -> np.ndarray:
    """Project a near-group matrix back onto the group constraints.

    For form groups: Newton iteration g <- (g + J^-1 g^-H J)/2, whose fixed
    points are exactly the J-unitary matrices; quadratically convergent near
    the constraint set, capped at 5 steps.  Determinant is then corrected by
    a scalar (phase for complex, d-th root for real).  For SL only the
    determinant correction applies.
    """
    M = np.array(M, dtype=G.dtype)
    if G.form is not None:
        J = G.form
        Jinv = np.linalg.inv(J)
        target = np.finfo(np.float64).eps * 64 * G.d
        for _ in range(5):
            K = Jinv @ np.linalg.inv(M).conj().T @ J
            M = 0.5 * (M + K)
            if _opnorm(M.conj().T @ J @ M - J) <= target:
                break
    det = np.linalg.det(M)
    if G.field == "complex":
        phase = det / abs(det)
        M = M * phase ** (-1.0 / G.d)
        if G.form is None:
            M = M * abs(det) ** (-1.0 / G.d)
    else:
        M = M * float(det) ** (-1.0 / G.d)
    return M


# --- two exact rationals used throughout the tests and demos ----------------

def cat_matrix():
    """The hyperbolic matrix [[2,1],[1,1]] inducing the cat map."""
    return np.array([[2.0, 1.0], [1.0, 1.0]])


def cat_matrix_fractions():
    return [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(1)]]
