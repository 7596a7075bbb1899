"""Spectral projections on the circle, parity, relative index and the d-functional."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import fourier
from .errors import (
    AdmissibilityError,
    CapabilityError,
    GeometryError,
    NumericalInconsistencyError,
    OrderError,
    PairingError,
    PreconditionError,
    SpectralCutError,
    UnsupportedClassError,
)
from .symbols import (
    BoundaryCondition,
    BvpProblem,
    CollarOperator,
    MatrixSymbol,
    ModelManifold,
    alpha_pullback,
    block_diag,
    hstack,
)

TOL_CUT = 1e-10
TOL_PARITY = 1e-10


# ---------------------------------------------------------------------------
# Dyadic rationals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DyadicRational:
    """``numerator / 2**exponent`` in canonical form (odd numerator or zero)."""

    numerator: int
    exponent: int = 0

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("exponent must be nonnegative")
        n, e = int(self.numerator), int(self.exponent)
        if n == 0:
            e = 0
        while e > 0 and n % 2 == 0:
            n //= 2
            e -= 1
        object.__setattr__(self, "numerator", n)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def from_fraction(cls, value) -> "DyadicRational":
        f = Fraction(value)
        d = f.denominator
        e = d.bit_length() - 1
        if d != 1 << e:
            raise ValueError(f"{value} is not dyadic")
        return cls(f.numerator, e)

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def __add__(self, other):
        return DyadicRational.from_fraction(self.to_fraction() + _frac(other))

    __radd__ = __add__

    def __sub__(self, other):
        return DyadicRational.from_fraction(self.to_fraction() - _frac(other))

    def __rsub__(self, other):
        return DyadicRational.from_fraction(_frac(other) - self.to_fraction())

    def __neg__(self):
        return DyadicRational(-self.numerator, self.exponent)

    def __mul__(self, other):
        return DyadicRational.from_fraction(self.to_fraction() * _frac(other))

    __rmul__ = __mul__

    def half(self):
        return DyadicRational(self.numerator, self.exponent + 1)

    def __eq__(self, other):
        try:
            return self.to_fraction() == _frac(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash(self.to_fraction())

    def __float__(self):
        return self.numerator / (1 << self.exponent)

    def __str__(self):
        return str(self.numerator) if self.exponent == 0 else f"{self.numerator}/{1 << self.exponent}"


def _frac(v):
    if isinstance(v, DyadicRational):
        return v.to_fraction()
    if isinstance(v, (int, np.integer, Fraction)):
        return Fraction(v)
    raise TypeError(f"cannot combine DyadicRational with {type(v).__name__}")


# ---------------------------------------------------------------------------
# Projector helpers
# ---------------------------------------------------------------------------

def riesz_projector(M: np.ndarray, select) -> np.ndarray:
    """Projection onto the invariant subspace of ``select``-ed eigenvalues along the rest."""
    n = M.shape[0]
    _, Z1, k = scipy.linalg.schur(M, output="complex", sort=select)
    _, Z2, _ = scipy.linalg.schur(M, output="complex", sort=lambda z: not select(z))
    if k == 0:
        return np.zeros((n, n), dtype=complex)
    if k == n:
        return np.eye(n, dtype=complex)
    S = np.hstack([Z1[:, :k], Z2[:, :n - k]])
    D = np.zeros(n)
    D[:k] = 1
    return (S * D) @ np.linalg.inv(S)


def projector_batch(A: np.ndarray, cond_max: float = 1e8) -> np.ndarray:
    """Projections onto the Re >= 0 invariant subspaces of a stack of matrices.

    Uses an eigendecomposition where it is well conditioned and falls back
    to ordered Schur forms elsewhere.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[-1]
    if A.size == 0:
        return np.zeros_like(A)
    w, V = np.linalg.eig(A)
    cond = np.linalg.cond(V)
    good = np.isfinite(cond) & (cond < cond_max)
    sel = (w.real >= 0).astype(complex)
    Vinv = np.linalg.inv(np.where(good[..., None, None], V, np.eye(n)))
    P = np.einsum("...ij,...j,...jk->...ik", V, sel, Vinv)
    if not np.all(good):
        flat_P = P.reshape(-1, n, n)
        flat_A = A.reshape(-1, n, n)
        for k in np.flatnonzero(~good.ravel()):
            flat_P[k] = riesz_projector(flat_A[k], lambda z: z.real >= 0)
        P = flat_P.reshape(A.shape)
    return P


def _batched(fn, arr):
    """Apply ``fn`` to each trailing square matrix of ``arr``."""
    flat = arr.reshape((-1,) + arr.shape[-2:])
    out = np.stack([fn(m) for m in flat]) if flat.shape[0] else flat
    return out.reshape(arr.shape)


def range_basis(P: np.ndarray, tol: float = 1e-8):
    """Orthonormal basis of Im P and the singular values used to find it."""
    u, s, _ = np.linalg.svd(P)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return u[:, :r], s


# ---------------------------------------------------------------------------
# Projection symbols and their quantizations
# ---------------------------------------------------------------------------

class ProjectionSymbol(MatrixSymbol):
    """Idempotent degree-0 symbol together with a rule for quantizing it.

    ``construction`` is one of ``"pullback"``, ``"spectral"``, ``"finite"``
    (zero symbol) or ``"modified"``; modifications are ledgers of Fourier
    modes added to or removed from the range.
    """

    def __init__(self, func, rank, quantizer, construction, generator=None,
                 modifications=(), source=None):
        super().__init__(func, rank, rank, 0, quantizer=None, source=source)
        self._base_quantizer = quantizer
        self.construction = construction
        self.generator = generator
        self.modifications = tuple(modifications)
        self._cache = {}
        self.quantizer = self._cached_quantize

    def _cached_quantize(self, N):
        if N not in self._cache:
            self._cache[N] = self._base_quantizer(N)
        return self._cache[N]

    @classmethod
    def pullback(cls, p: MatrixSymbol) -> "ProjectionSymbol":
        """Symbol independent of xi; quantized as a pointwise multiplier."""
        f = p._func

        def func(x, t, xi, lam, absxi):
            return f(x, np.zeros_like(t), np.ones_like(xi), np.zeros_like(lam), np.ones_like(absxi))

        def quantizer(N):
            vals = p(fourier.grid(N), 0.0, 1.0, 0.0, 1.0)
            return fourier.multiplier(vals)

        return cls(func, p.rows, quantizer, "pullback", source=p.source)

    @classmethod
    def constant(cls, matrix) -> "ProjectionSymbol":
        return cls.pullback(MatrixSymbol.constant(matrix))

    @classmethod
    def identity(cls, rank: int) -> "ProjectionSymbol":
        return cls.constant(np.eye(rank))

    @classmethod
    def finite(cls, rank: int, modes_added: Sequence = ()) -> "ProjectionSymbol":
        """Zero symbol plus a finite set of added modes."""
        return cls.constant(np.zeros((rank, rank))).modified([("+",) + _as_tuple(m) for m in modes_added])

    @classmethod
    def spectral(cls, A: MatrixSymbol) -> "ProjectionSymbol":
        """Nonnegative spectral projection of a first-order circle operator."""
        principal = principal_part(A)
        pf = principal._func

        def func(x, t, xi, lam, absxi):
            sigma = np.asarray(pf(x, t, xi, lam, absxi))
            shape = np.broadcast_shapes(x.shape, t.shape, xi.shape, lam.shape, absxi.shape)
            sigma = np.broadcast_to(sigma, shape + (A.rows, A.rows))
            return projector_batch(sigma)

        def quantizer(N):
            return spectral_projection(discretize_circle_op(A, N)).matrix

        return cls(func, A.rows, quantizer, "spectral", generator=A)

    def modified(self, modifications) -> "ProjectionSymbol":
        mods = self.modifications + tuple(_normalize_mod(m) for m in modifications)
        base = self

        def quantizer(N):
            P = base.discretize(N)
            return finite_rank_modify(P, [m for m in modifications]).matrix

        return ProjectionSymbol(self._func, self.rows, quantizer,
                                "modified" if self.construction != "pullback" or mods else self.construction,
                                generator=self, modifications=mods, source=self.source)

    def complement(self) -> "ProjectionSymbol":
        f = self._func
        n = self.rows
        return ProjectionSymbol(lambda *a: np.eye(n) - np.asarray(f(*a)), n,
                                lambda N: np.eye((2 * N + 1) * n) - self.quantize(N),
                                "complement", generator=self)

    def discretize(self, N: int) -> "DiscreteProjection":
        return DiscreteProjection(self.quantize(N), self, N)

    @property
    def is_pullback(self):
        return not self.depends_on("xi")

    @property
    def parity(self):
        return parity_classify(self)


def _as_tuple(m):
    return tuple(m) if isinstance(m, (tuple, list)) else (m,)


def _normalize_mod(m):
    m = _as_tuple(m)
    sign = m[0]
    if sign in ("+", 1, "add"):
        sign = "+"
    elif sign in ("-", -1, "remove"):
        sign = "-"
    else:
        raise GeometryError(f"modification sign must be + or -, got {sign!r}")
    return (sign,) + tuple(m[1:])


@dataclass
class DiscreteProjection:
    matrix: np.ndarray
    symbol: Optional[MatrixSymbol]
    N: int
    ledger: list = field(default_factory=list)
    base: Optional[np.ndarray] = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.base is None:
            self.base = self.matrix.copy()

    @property
    def rank(self):
        """Bundle rank (not the rank of the matrix)."""
        return self.matrix.shape[0] // (2 * self.N + 1)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def idempotency_residual(self):
        return float(np.abs(self.matrix @ self.matrix - self.matrix).max()) if self.dim else 0.0

    def trace_rank(self):
        return float(np.trace(self.matrix).real)

    def complement(self):
        sym = self.symbol.complement() if isinstance(self.symbol, ProjectionSymbol) else None
        return DiscreteProjection(np.eye(self.dim) - self.matrix, sym, self.N,
                                  [("complement",)] + list(self.ledger))

    def mode_vector(self, mode: int, component: int = 0):
        if abs(mode) > self.N:
            raise GeometryError(f"mode {mode} outside |n| <= {self.N}")
        v = np.zeros(self.dim, dtype=complex)
        v[(mode + self.N) * self.rank + component] = 1.0
        return v


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def principal_part(A: MatrixSymbol) -> MatrixSymbol:
    """Degree-one part ``a1(x) xi + a2(x) |xi|`` of a first-order circle symbol."""
    f = A._func

    def func(x, t, xi, lam, absxi):
        z = np.zeros_like(np.asarray(xi, dtype=float))
        a0 = np.asarray(f(x, t, z, lam, z))
        return np.asarray(f(x, t, xi, lam, absxi)) - a0

    return MatrixSymbol(func, A.rows, A.cols, 1)


def _check_first_order(A: MatrixSymbol):
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 2 * np.pi, 4)
    vals = {}
    for a in (0.0, 1.0, 2.0, 3.0):
        for b in (0.0, 1.0, 2.0):
            vals[a, b] = A(x, 0.0, a, 0.0, b)
    scale = max(1.0, max(np.abs(v).max() for v in vals.values()))
    second = [vals[2, 0] - 2 * vals[1, 0] + vals[0, 0], vals[3, 0] - 2 * vals[2, 0] + vals[1, 0],
              vals[0, 2] - 2 * vals[0, 1] + vals[0, 0],
              vals[1, 1] - vals[1, 0] - vals[0, 1] + vals[0, 0]]
    if max(np.abs(s).max() for s in second) > 1e-10 * scale:
        raise OrderError("circle operator must be of degree <= 1 in xi")


def discretize_circle_op(A: MatrixSymbol, N: int) -> np.ndarray:
    """Fourier-collocation matrix of ``a0(x) + a1(x)(-i d/dx) + a2(x) Lambda`` on modes ``|n| <= N``."""
    if A.rows != A.cols:
        raise OrderError("circle operator must be square")
    _check_first_order(A)
    return A.quantize(N)


def spectral_projection(A_disc: np.ndarray, symbol: Optional[MatrixSymbol] = None,
                        tol: float = TOL_CUT) -> DiscreteProjection:
    """Projection onto the generalized eigenspaces with Re >= 0 along the rest."""
    A_disc = np.asarray(A_disc, dtype=complex)
    eigs = np.linalg.eigvals(A_disc)
    on_cut = eigs[(np.abs(eigs.real) < tol) & (np.abs(eigs) >= tol)]
    if on_cut.size:
        raise SpectralCutError(f"eigenvalue {on_cut[0]:.3g} on the spectral cut", complex(on_cut[0]))

    def select(z):
        return z.real >= 0 or abs(z) < tol

    P = riesz_projector(A_disc, select)
    N = (A_disc.shape[0] - 1) // 2
    if symbol is not None and not isinstance(symbol, ProjectionSymbol):
        symbol = ProjectionSymbol.spectral(symbol)
    rank = 1 if symbol is None else symbol.rows
    N = (A_disc.shape[0] // rank - 1) // 2
    return DiscreteProjection(P, symbol, N)


def parity_classify(P: MatrixSymbol, nx: int = 16, tol: float = TOL_PARITY) -> str:
    """``"Even"``, ``"Odd"`` or ``"Neither"`` under the antipodal map."""
    x = 2 * np.pi * np.arange(nx) / nx
    a = P(x, 0.0, 1.0)
    b = alpha_pullback(P)(x, 0.0, 1.0)
    if np.abs(a - b).max() <= tol:
        return "Even"
    if np.abs(a + b - np.eye(P.rows)).max() <= tol:
        return "Odd"
    return "Neither"


@dataclass
class RelativeIndexReport:
    index: int
    trace_value: float
    dim_ker: int
    dim_coker: int
    gap: float

    def to_dict(self):
        return dict(self.__dict__)


def relative_index_report(P1: DiscreteProjection, P2: DiscreteProjection,
                          tol: float = 1e-8) -> RelativeIndexReport:
    if P1.matrix.shape != P2.matrix.shape:
        raise PreconditionError("projections act on different spaces")
    if P1.symbol is not None and P2.symbol is not None:
        x = fourier.grid(8)
        for xi in (1.0, -1.0):
            if not np.allclose(P1.symbol(x, 0.0, xi), P2.symbol(x, 0.0, xi), atol=1e-9):
                raise PreconditionError("relative index needs equal principal symbols")
    tr = float(np.trace(P1.matrix - P2.matrix).real)
    by_trace = int(round(tr))
    if abs(tr - by_trace) > 1e-6:
        raise NumericalInconsistencyError(f"trace {tr} is not an integer")
    Q1, _ = range_basis(P1.matrix)
    Q2, _ = range_basis(P2.matrix)
    M = Q2.conj().T @ P2.matrix @ Q1
    s = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    smax = s[0] if s.size else 1.0
    small = s <= tol * max(smax, 1.0)
    rank = int(np.sum(~small))
    big = s[~small]
    lo = s[small]
    gap = float((big.min() if big.size else np.inf) / max(lo.max() if lo.size else tol * max(smax, 1.0), 1e-300))
    ker = M.shape[1] - rank
    coker = M.shape[0] - rank
    if ker - coker != by_trace:
        raise NumericalInconsistencyError(
            f"trace gives {by_trace}, kernel/cokernel count gives {ker - coker}")
    return RelativeIndexReport(by_trace, tr, ker, coker, gap)


def relative_index(P1: DiscreteProjection, P2: DiscreteProjection, tol: float = 1e-8) -> int:
    """Index of ``P2 : Im P1 -> Im P2``, by trace and by SVD (which must agree)."""
    return relative_index_report(P1, P2, tol).index


def canonical_quantization(P: DiscreteProjection) -> DiscreteProjection:
    """Multiplier quantization of the (pullback) symbol of ``P``."""
    sym = P.symbol
    vals = sym(fourier.grid(P.N), 0.0, 1.0)
    return DiscreteProjection(fourier.multiplier(vals), sym, P.N)


def d_value(P: DiscreteProjection, max_rank_fraction: float = 0.25) -> DyadicRational:
    """The d-functional, normalized by ``d(P_sigma) = 0`` for multiplier quantizations."""
    if P.symbol is None:
        raise AdmissibilityError("projection carries no symbol")
    parity = parity_classify(P.symbol)
    if parity != "Even":
        raise AdmissibilityError(f"{parity} projection is not admissible on a circle boundary")
    if P.symbol.depends_on("xi"):
        raise UnsupportedClassError("even symbol without a canonical multiplier quantization")
    Psig = canonical_quantization(P)
    diff = P.matrix - Psig.matrix
    s = np.linalg.svd(diff, compute_uv=False)
    r = int(np.sum(s > 1e-8))
    if r > max_rank_fraction * P.dim:
        raise UnsupportedClassError(f"difference from the canonical quantization has rank {r}")
    return DyadicRational(relative_index(P, Psig))


def _mod_vector(P: DiscreteProjection, item):
    if isinstance(item[1], np.ndarray) or isinstance(item[1], (list, tuple)) and len(item) == 2 \
            and np.ndim(item[1]) == 1 and len(item[1]) == P.dim:
        v = np.asarray(item[1], dtype=complex)
        return v / np.linalg.norm(v)
    mode = int(item[1])
    comp = int(item[2]) if len(item) > 2 else 0
    return P.mode_vector(mode, comp)


def finite_rank_modify(P: DiscreteProjection, modes) -> DiscreteProjection:
    """Add (``+``) or remove (``-``) vectors/modes from Im P, keeping a ledger.

    Entries are ``(sign, mode)``, ``(sign, mode, component)`` or
    ``(sign, vector)``.  Removing a previously added vector restores the
    matrix exactly.
    """
    ledger = list(P.ledger)
    for raw in modes:
        item = _normalize_mod(raw)
        v = _mod_vector(P, item)
        sign = item[0]
        match = next((k for k, (s, w) in enumerate(ledger)
                      if s != sign and np.allclose(w, v, atol=1e-14)), None)
        if match is not None:
            ledger.pop(match)
        else:
            ledger.append((sign, v))
    M = P.base.copy()
    for sign, v in ledger:
        M = _apply_mod(M, sign, v)
    return DiscreteProjection(M, P.symbol, P.N, ledger, P.base)


def _apply_mod(M, sign, v, tol=1e-10):
    if sign == "+":
        if np.linalg.norm(M @ v) > tol:
            raise GeometryError("added vector is not in the kernel of the projection")
        Q, _ = range_basis(M)
        if Q.size and np.linalg.norm(Q.conj().T @ v) > tol:
            raise GeometryError("added vector is not orthogonal to the range")
        w = (v.conj() @ (np.eye(len(v)) - M))
        return M + np.outer(v, w) / (w @ v)
    if np.linalg.norm(M @ v - v) > tol:
        raise GeometryError("removed vector is not in the range of the projection")
    return M - np.outer(v, v.conj() @ M) / (v.conj() @ v)


# ---------------------------------------------------------------------------
# Doubling constructions
# ---------------------------------------------------------------------------

def alpha_operator(D: CollarOperator) -> CollarOperator:
    """Normalized collar form of the operator with symbol ``alpha^* sigma(D)``."""
    coeffs = []
    for k, c in enumerate(D.coefficients):
        f = c._func
        sign = (-1) ** k
        coeffs.append(MatrixSymbol(lambda x, t, xi, lam, absxi, f=f, sign=sign:
                                   sign * np.asarray(f(x, t, -xi, lam, absxi)), c.rows, c.cols, c.degree))
    return CollarOperator(coeffs, normalize=False)


def alpha_inverse_operator(D: CollarOperator) -> CollarOperator:
    """First-order operator in the class of ``alpha^* sigma(D)^{-1}``.

    For ``sigma(D) = lam - i A`` with flattened tangential part ``A_f``
    (``A_f^2 = |xi|^2``), ``(lam^2 + |xi|^2) sigma(D)^{-1} = lam + i A_f``;
    pulling back by the antipodal map and normalizing gives
    ``lam - i A_f(-xi)``.
    """
    if D.order != 1:
        raise OrderError("alpha^* D^{-1} is built for first-order operators")
    f1 = D.coefficients[1]._func
    n = D.rank

    def d1(x, t, xi, lam, absxi):
        A = 1j * np.asarray(f1(x, t, -xi, lam, absxi))
        shape = np.broadcast_shapes(x.shape, t.shape, xi.shape, absxi.shape)
        A = np.array(np.broadcast_to(A, shape + (n, n)))
        P = projector_batch(A)
        Af = absxi[..., None, None] * (2 * P - np.eye(n))
        return -1j * Af

    return CollarOperator([MatrixSymbol.identity(n), MatrixSymbol(d1, n, n, 1)], normalize=False)


def _check_projection(P):
    if not isinstance(P, MatrixSymbol) or P.rows != P.cols:
        raise AdmissibilityError("expected a square projection symbol")


def _doubled(D, second, P, manifold, far_conditions):
    n = D.rank
    op = CollarOperator([block_diag(a, b) for a, b in zip(D.coefficients, second.coefficients)],
                        normalize=False)
    # the doubled condition is classical: quantize the symbol itself, not P
    P = MatrixSymbol(P._func, n, n, 0, source=P.source)
    one_minus = MatrixSymbol.identity(n) - P
    cond = BoundaryCondition([hstack(P, one_minus)])
    conds = [cond]
    if manifold.n_collars == 2:
        if far_conditions is None:
            raise CapabilityError("doubling on a two-collar manifold needs far conditions")
        conds.append(far_conditions)
    return BvpProblem(manifold, op, conds)


def double_even(D: CollarOperator, P: MatrixSymbol, manifold: Optional[ModelManifold] = None,
                far_conditions=None) -> BvpProblem:
    """Classical problem ``(D + alpha^*D, P u|_X + (1-P) v|_X = g)``."""
    _check_projection(P)
    parity = parity_classify(P)
    if parity != "Even":
        raise AdmissibilityError(f"double_even needs an even projection, got {parity}")
    manifold = manifold or ModelManifold("Disk")
    prob = _doubled(D, alpha_operator(D), P, manifold, far_conditions)
    prob.name = "double_even"
    return prob


def double_odd(D: CollarOperator, P: MatrixSymbol, manifold: Optional[ModelManifold] = None,
               far_conditions=None) -> BvpProblem:
    """Classical problem ``(D + alpha^*D^{-1}, P u|_X + (1-P) v|_X = g)``."""
    _check_projection(P)
    parity = parity_classify(P)
    if parity != "Odd":
        raise AdmissibilityError(f"double_odd needs an odd projection, got {parity}")
    manifold = manifold or ModelManifold("Disk")
    prob = _doubled(D, alpha_inverse_operator(D), P, manifold, far_conditions)
    prob.name = "double_odd"
    return prob


@dataclass
class OddPair:
    """Two operators with complementary spectral conditions ``P u = g1, (1-P) v = g2``."""

    D1: CollarOperator
    D2: CollarOperator
    P: MatrixSymbol
    Q: MatrixSymbol
    manifold: ModelManifold = field(default_factory=lambda: ModelManifold("Disk"))

    def __post_init__(self):
        x = fourier.grid(6)
        for xi in (1.0, -1.0):
            if not np.allclose(self.P(x, 0.0, xi) + self.Q(x, 0.0, xi), np.eye(self.P.rows), atol=1e-10):
                raise PairingError("projections are not complementary")
        if self.P.quantizer is not None or self.Q.quantizer is not None:
            for N in (4,):
                if not np.allclose(self.P.quantize(N) + self.Q.quantize(N),
                                   np.eye((2 * N + 1) * self.P.rows), atol=1e-10):
                    raise PairingError("quantized projections are not complementary")
        if self.manifold.n_collars != 1:
            raise CapabilityError("odd pairs are packaged on single-collar manifolds")

    def spectral_problem(self) -> BvpProblem:
        n = self.D1.rank
        op = CollarOperator([block_diag(a, b) for a, b in
                             zip(self.D1.coefficients, self.D2.coefficients)], normalize=False)
        cond = BoundaryCondition([MatrixSymbol.identity(2 * n)])
        return BvpProblem(self.manifold, op, [cond], [block_diag(self.P, self.Q)], name="odd_pair")


def unfold_odd_pair(problem):
    """Repackage between the two-condition spectral form and the classical form."""
    if isinstance(problem, OddPair):
        op = CollarOperator([block_diag(a, b) for a, b in
                             zip(problem.D1.coefficients, problem.D2.coefficients)], normalize=False)
        cond = BoundaryCondition([hstack(problem.P, problem.Q)])
        return BvpProblem(problem.manifold, op, [cond], name="odd_classical",
                          meta={"odd_pair": problem})
    if isinstance(problem, BvpProblem) and "odd_pair" in problem.meta:
        return problem.meta["odd_pair"]
    raise PairingError("not an odd pair or its classical packaging")
