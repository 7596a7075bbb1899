"""Principal symbols, collar-form operators, model manifolds and problems.

Conventions: the normal derivative enters as ``-i d/dt -> lam``; trial
solutions are ``exp(i lam t)``, so a solution is bounded as ``t -> +oo``
exactly when ``Im lam > 0``.  Every boundary component carries its own
inward collar coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import fourier
from .errors import (
    IncompatibleSumError,
    MalformedSymbolError,
    ShapeError,
)
from .expr import Expression, cutoff

MANIFOLD_KINDS = ("Interval", "Cylinder", "Disk", "Annulus")


# ---------------------------------------------------------------------------
# MatrixSymbol
# ---------------------------------------------------------------------------

def _prepare(x, t, xi, lam, absxi):
    x, t, xi, lam = (np.asarray(v) for v in (x, t, xi, lam))
    if absxi is None:
        absxi = np.abs(xi)
    absxi = np.asarray(absxi)
    shape = np.broadcast_shapes(x.shape, t.shape, xi.shape, lam.shape, absxi.shape)
    return x, t, xi, lam, absxi, shape


class MatrixSymbol:
    """Matrix-valued function of (x, t, xi, lam), homogeneous of ``degree``.

    ``func(x, t, xi, lam, absxi)`` receives broadcastable arrays and returns
    an array of shape ``(*S, rows, cols)``.  ``absxi`` stands for |xi| in
    the principal symbol and for its invertible quantization on Fourier
    modes (see :func:`fourier.bracket`).

    An optional ``quantizer(N)`` overrides the default collocation
    quantization; it is how finite-rank data (which has no symbol) rides
    along with symbol algebra.
    """

    def __init__(self, func: Callable, rows: int, cols: int, degree: int = 0,
                 quantizer: Optional[Callable[[int], np.ndarray]] = None,
                 source=None):
        if rows < 0 or cols < 0:
            raise ShapeError("negative symbol shape")
        self._func = func
        self.rows = int(rows)
        self.cols = int(cols)
        self.degree = int(degree)
        self.quantizer = quantizer
        self.source = source

    # -- construction -------------------------------------------------------
    @classmethod
    def from_expr(cls, entries, degree: int = 0):
        """Build from an expression string or a nested list of them."""
        if isinstance(entries, (str, int, float, complex)):
            entries = [[entries]]
        if not isinstance(entries, (list, tuple)) or not entries:
            raise MalformedSymbolError("symbol entries must be a string or nested list")
        if not all(isinstance(row, (list, tuple)) for row in entries):
            raise MalformedSymbolError("matrix symbol rows must be lists")
        ncols = len(entries[0])
        if any(len(row) != ncols for row in entries):
            raise MalformedSymbolError("ragged matrix symbol")
        compiled = [[Expression(str(e)) for e in row] for row in entries]
        nrows = len(compiled)

        def func(x, t, xi, lam, absxi):
            env = {"x": x, "t": t, "xi": xi, "lam": lam, "absxi": absxi}
            shape = np.broadcast_shapes(x.shape, t.shape, xi.shape, lam.shape, absxi.shape)
            out = np.empty(shape + (nrows, ncols), dtype=complex)
            for a, row in enumerate(compiled):
                for b, ex in enumerate(row):
                    out[..., a, b] = np.broadcast_to(ex(env), shape)
            return out

        source = [[e.source for e in row] for row in compiled]
        return cls(func, nrows, ncols, degree, source=source)

    @classmethod
    def constant(cls, matrix, degree: int = 0):
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(lambda x, t, xi, lam, absxi: m, m.shape[0], m.shape[1], degree,
                   source=m.tolist())

    @classmethod
    def identity(cls, n: int):
        return cls.constant(np.eye(n))

    @classmethod
    def zeros(cls, rows: int, cols: int, degree: int = 0):
        return cls.constant(np.zeros((rows, cols)), degree)

    # -- evaluation ---------------------------------------------------------
    def __call__(self, x=0.0, t=0.0, xi=1.0, lam=0.0, absxi=None) -> np.ndarray:
        x, t, xi, lam, absxi, shape = _prepare(x, t, xi, lam, absxi)
        out = self._func(x, t, xi, lam, absxi)
        out = np.broadcast_to(np.asarray(out, dtype=complex), shape + (self.rows, self.cols))
        return np.array(out)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def quantize(self, N: int, t: float = 0.0) -> np.ndarray:
        """Collocation matrix on modes ``-N..N`` (lam = 0, |xi| -> <n>)."""
        if self.quantizer is not None:
            return self.quantizer(N)
        n = fourier.modes(N)
        x = fourier.grid(N)
        vals = self(x[:, None], t, n[None, :].astype(float), 0.0, fourier.bracket(n)[None, :])
        return fourier.left_quantize(vals)

    def depends_on(self, variable: str, rng=None, samples: int = 5) -> bool:
        rng = np.random.default_rng(0) if rng is None else rng
        base = dict(x=rng.uniform(0, 2 * np.pi, samples), t=rng.uniform(0, 1, samples),
                    xi=rng.choice([-1.0, 1.0], samples) * rng.uniform(0.5, 2, samples),
                    lam=rng.normal(size=samples))
        other = dict(base)
        if variable == "x":
            other["x"] = base["x"] + rng.uniform(0.3, 3.0, samples)
        elif variable == "t":
            other["t"] = rng.uniform(0, 1, samples)
        else:
            other[variable] = base[variable] * 1.7
        return not np.allclose(self(**base), self(**other), atol=1e-13, rtol=1e-12)

    def homogeneity_defect(self, rng=None, samples: int = 20) -> float:
        """Max relative deviation from degree-homogeneity in (xi, lam)."""
        rng = np.random.default_rng(0) if rng is None else rng
        x = rng.uniform(0, 2 * np.pi, samples)
        t = rng.uniform(0, 1, samples)
        xi = rng.normal(size=samples)
        lam = rng.normal(size=samples)
        s = rng.uniform(0.2, 5.0, samples)
        a = self(x, t, s * xi, s * lam)
        b = self(x, t, xi, lam) * (s ** self.degree)[:, None, None]
        scale = np.maximum(np.abs(b).max(axis=(1, 2)), 1e-300)
        return float((np.abs(a - b).max(axis=(1, 2)) / scale).max())

    # -- algebra ------------------------------------------------------------
    def _binary_quantizer(self, other, op):
        if self.quantizer is None and other.quantizer is None:
            return None
        return lambda N: op(self.quantize(N), other.quantize(N))

    def __add__(self, other):
        other = _as_symbol(other, self)
        if other.shape != self.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        f, g = self._func, other._func
        return MatrixSymbol(lambda *a: f(*a) + g(*a), self.rows, self.cols, self.degree,
                            self._binary_quantizer(other, np.add))

    __radd__ = __add__

    def __neg__(self):
        f = self._func
        q = None if self.quantizer is None else (lambda N: -self.quantizer(N))
        return MatrixSymbol(lambda *a: -f(*a), self.rows, self.cols, self.degree, q)

    def __sub__(self, other):
        return self + (-_as_symbol(other, self))

    def __rsub__(self, other):
        return _as_symbol(other, self) + (-self)

    def __mul__(self, scalar):
        if isinstance(scalar, MatrixSymbol):
            raise TypeError("use @ for symbol products")
        c = complex(scalar)
        f = self._func
        q = None if self.quantizer is None else (lambda N: c * self.quantizer(N))
        return MatrixSymbol(lambda *a: c * f(*a), self.rows, self.cols, self.degree, q)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if self.cols != other.rows:
            raise ShapeError(f"cannot multiply {self.shape} by {other.shape}")
        f, g = self._func, other._func
        return MatrixSymbol(lambda *a: np.asarray(f(*a)) @ np.asarray(g(*a)), self.rows,
                            other.cols, self.degree + other.degree,
                            self._binary_quantizer(other, np.matmul))

    def scaled_by(self, fn: Callable, degree_shift: int = 0):
        """Multiply by a scalar function ``fn(x, t, xi, lam, absxi)``."""
        f = self._func
        return MatrixSymbol(lambda *a: np.asarray(fn(*a))[..., None, None] * f(*a),
                            self.rows, self.cols, self.degree + degree_shift)

    def with_quantizer(self, quantizer):
        return MatrixSymbol(self._func, self.rows, self.cols, self.degree, quantizer,
                            self.source)

    def __repr__(self):
        src = "" if self.source is None else f", source={self.source!r}"
        return f"MatrixSymbol({self.rows}x{self.cols}, degree={self.degree}{src})"


def _as_symbol(value, like: MatrixSymbol) -> MatrixSymbol:
    if isinstance(value, MatrixSymbol):
        return value
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        arr = arr * np.eye(like.rows, like.cols)
    return MatrixSymbol.constant(arr, like.degree)


def block_diag(*syms: MatrixSymbol) -> MatrixSymbol:
    rows = sum(s.rows for s in syms)
    cols = sum(s.cols for s in syms)
    funcs = [s._func for s in syms]
    shapes = [s.shape for s in syms]

    def func(x, t, xi, lam, absxi):
        shape = np.broadcast_shapes(x.shape, t.shape, xi.shape, lam.shape, absxi.shape)
        out = np.zeros(shape + (rows, cols), dtype=complex)
        r = c = 0
        for f, (a, b) in zip(funcs, shapes):
            out[..., r:r + a, c:c + b] = np.broadcast_to(f(x, t, xi, lam, absxi), shape + (a, b))
            r, c = r + a, c + b
        return out

    quantizer = None
    if any(s.quantizer is not None for s in syms):
        def quantizer(N):
            return _interleave_block_diag([s.quantize(N) for s in syms], shapes, N)
    return MatrixSymbol(func, rows, cols, max((s.degree for s in syms), default=0), quantizer)


def hstack(*syms: MatrixSymbol) -> MatrixSymbol:
    rows = syms[0].rows
    if any(s.rows != rows for s in syms):
        raise ShapeError("hstack needs equal row counts")
    cols = sum(s.cols for s in syms)
    funcs = [s._func for s in syms]
    widths = [s.cols for s in syms]

    def func(x, t, xi, lam, absxi):
        shape = np.broadcast_shapes(x.shape, t.shape, xi.shape, lam.shape, absxi.shape)
        parts = [np.broadcast_to(f(x, t, xi, lam, absxi), shape + (rows, w))
                 for f, w in zip(funcs, widths)]
        return np.concatenate(parts, axis=-1)

    quantizer = None
    if any(s.quantizer is not None for s in syms):
        def quantizer(N):
            M = 2 * N + 1
            blocks = [s.quantize(N).reshape(M, rows, M, s.cols) for s in syms]
            return np.concatenate(blocks, axis=3).reshape(M * rows, M * cols)
    return MatrixSymbol(func, rows, cols, syms[0].degree, quantizer)


def _interleave_block_diag(mats, shapes, N):
    """Block-diagonal sum in the mode-major layout."""
    M = 2 * N + 1
    rows = sum(a for a, _ in shapes)
    cols = sum(b for _, b in shapes)
    out = np.zeros((M, rows, M, cols), dtype=complex)
    r = c = 0
    for mat, (a, b) in zip(mats, shapes):
        out[:, r:r + a, :, c:c + b] = mat.reshape(M, a, M, b)
        r, c = r + a, c + b
    return out.reshape(M * rows, M * cols)


def eval_symbol(sym: MatrixSymbol, point) -> np.ndarray:
    """Evaluate ``sym`` at ``point = (x, t, xi, lam)``."""
    x, t, xi, lam = point
    return sym(x, t, xi, lam)


def alpha_pullback(sym: MatrixSymbol) -> MatrixSymbol:
    """Compose with the antipodal map (xi, lam) -> (-xi, -lam)."""
    f = sym._func
    return MatrixSymbol(lambda x, t, xi, lam, absxi: f(x, t, -xi, -lam, absxi),
                        sym.rows, sym.cols, sym.degree)


# ---------------------------------------------------------------------------
# Manifolds, operators, conditions, problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelManifold:
    kind: str

    def __post_init__(self):
        if self.kind not in MANIFOLD_KINDS:
            raise ValueError(f"unknown manifold kind {self.kind!r}")

    @property
    def boundary_components(self):
        return {"Interval": ("PointPair",), "Disk": ("Circle",)}.get(
            self.kind, ("Circle", "Circle"))

    @property
    def dimension(self):
        return 1 if self.kind == "Interval" else 2

    @property
    def n_collars(self):
        """Number of boundary pieces carrying their own collar coordinate."""
        return 1 if self.kind == "Disk" else 2


class CollarOperator:
    """Collar form ``sum_k D_k(t) (-i d/dt)^(m-k)`` with ``D_0 = Id``.

    ``coefficients[k]`` is a square MatrixSymbol in (x, t, xi) of degree k.
    Non-identity leading coefficients are normalized away by left
    multiplication with their inverse unless ``normalize=False``.
    """

    def __init__(self, coefficients: Sequence[MatrixSymbol], interior: Optional[MatrixSymbol] = None,
                 normalize: bool = True):
        if not coefficients:
            raise ShapeError("a collar operator needs at least D_0")
        n = coefficients[0].rows
        for k, c in enumerate(coefficients):
            if c.rows != n or c.cols != n:
                raise ShapeError(f"coefficient D_{k} has shape {c.shape}, expected {(n, n)}")
        self.rank = n
        self.order = len(coefficients) - 1
        coefficients = list(coefficients)
        if normalize and n and not _is_identity(coefficients[0]):
            coefficients = _normalize(coefficients)
        self.coefficients = coefficients
        self.interior = interior

    def symbol(self) -> MatrixSymbol:
        """Principal symbol ``sum_k D_k lam^(m-k)`` (degree m)."""
        m = self.order
        funcs = [c._func for c in self.coefficients]
        n = self.rank

        def func(x, t, xi, lam, absxi):
            total = 0
            for k, f in enumerate(funcs):
                total = total + np.asarray(f(x, t, xi, lam, absxi)) * (lam ** (m - k))[..., None, None]
            return total

        return MatrixSymbol(func, n, n, m)

    def interior_symbol(self) -> MatrixSymbol:
        return self.interior if self.interior is not None else self.symbol()

    def coefficient_array(self, x=0.0, t=0.0, xi=1.0, absxi=None) -> np.ndarray:
        """Stack of D_k values with shape ``(*S, m+1, n, n)``."""
        return np.stack([c(x, t, xi, 0.0, absxi) for c in self.coefficients], axis=-3)

    def reversed(self) -> "CollarOperator":
        """Same operator in the inward coordinate ``s = 1 - t`` of the far end."""
        new = []
        for k, c in enumerate(self.coefficients):
            f = c._func
            sign = (-1) ** k
            new.append(MatrixSymbol(
                lambda x, t, xi, lam, absxi, f=f, sign=sign: sign * np.asarray(f(x, 1.0 - t, xi, lam, absxi)),
                c.rows, c.cols, c.degree))
        return CollarOperator(new, normalize=False)

    def is_t_independent(self) -> bool:
        return not any(c.depends_on("t") for c in self.coefficients)

    def is_x_independent(self) -> bool:
        return not any(c.depends_on("x") for c in self.coefficients)

    def __repr__(self):
        return f"CollarOperator(order={self.order}, rank={self.rank})"


def _is_identity(sym: MatrixSymbol) -> bool:
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 2 * np.pi, 6)
    t = rng.uniform(0, 1, 6)
    xi = np.array([1.0, -1.0, 2.0, -0.5, 1.0, -1.0])
    return np.allclose(sym(x, t, xi), np.eye(sym.rows), atol=1e-14)


def _normalize(coefficients):
    f0 = coefficients[0]._func
    out = [MatrixSymbol.identity(coefficients[0].rows)]
    for c in coefficients[1:]:
        fk = c._func
        out.append(MatrixSymbol(
            lambda x, t, xi, lam, absxi, fk=fk: np.linalg.solve(
                np.asarray(f0(x, t, xi, lam, absxi)), np.asarray(fk(x, t, xi, lam, absxi))
                * np.ones(np.broadcast_shapes(x.shape, t.shape, xi.shape, absxi.shape) + (1, 1))),
            c.rows, c.cols, c.degree))
    return out


class BoundaryCondition:
    """Jet coefficients ``B_0..B_{m-1}``, each a ``(G, n)`` symbol in (x, xi)."""

    def __init__(self, jets: Sequence[MatrixSymbol]):
        jets = list(jets)
        if not jets:
            raise ShapeError("boundary condition needs one coefficient per jet order")
        g, n = jets[0].shape
        if any(j.shape != (g, n) for j in jets):
            raise ShapeError("jet coefficients must share one shape")
        self.jets = jets
        self.target_rank = g
        self.rank = n

    @property
    def jet_order(self):
        return len(self.jets) - 1

    @classmethod
    def empty(cls, order: int, rank: int):
        return cls([MatrixSymbol.zeros(0, rank) for _ in range(order)])

    @classmethod
    def dirichlet(cls, order: int, rank: int, select=None):
        """Condition on ``u|_X`` (optionally only the listed components)."""
        select = list(range(rank)) if select is None else list(select)
        sel = np.eye(rank)[select] if select else np.zeros((0, rank))
        return cls([MatrixSymbol.constant(sel)] + [MatrixSymbol.zeros(len(select), rank)
                                                   for _ in range(order - 1)])

    def matrix(self, x=0.0, xi=1.0, absxi=None) -> np.ndarray:
        """``[B_0 | ... | B_{m-1}]`` acting on jets ``(u, -iu', ...)``."""
        return np.concatenate([j(x, 0.0, xi, 0.0, absxi) for j in self.jets], axis=-1)

    def __repr__(self):
        return f"BoundaryCondition(order={len(self.jets)}, target_rank={self.target_rank}, rank={self.rank})"


@dataclass
class BvpProblem:
    """Interior operator with one condition (and optional projection) per collar.

    The operator is written in the inward coordinate of the first collar;
    the far collar of an Interval, Cylinder or Annulus sees it through
    :meth:`CollarOperator.reversed`.
    """

    manifold: ModelManifold
    operator: CollarOperator
    conditions: list
    projections: Optional[list] = None
    name: str = "problem"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.conditions) != self.manifold.n_collars:
            raise ShapeError(f"{self.manifold.kind} needs {self.manifold.n_collars} conditions")
        if self.projections is None:
            self.projections = [None] * len(self.conditions)
        for c in self.conditions:
            if len(c.jets) != max(self.operator.order, 1) and self.operator.order > 0:
                raise ShapeError("jet coefficient count must equal the operator order")
            if c.rank != self.operator.rank:
                raise ShapeError("boundary condition acts on the wrong bundle rank")
        for c, p in zip(self.conditions, self.projections):
            if p is not None and p.shape != (c.target_rank, c.target_rank):
                raise ShapeError("projection rank must match the condition target rank")

    @property
    def order(self):
        return self.operator.order

    @property
    def rank(self):
        return self.operator.rank

    def component_operator(self, i: int) -> CollarOperator:
        return self.operator if i == 0 else self.operator.reversed()

    @property
    def is_spectral(self):
        return any(p is not None for p in self.projections)


def direct_sum(a: BvpProblem, b: BvpProblem) -> BvpProblem:
    """Block-diagonal sum of two problems on the same manifold."""
    if a.manifold != b.manifold:
        raise IncompatibleSumError("problems live on different manifolds")
    if b.rank == 0:
        return a
    if a.rank == 0:
        return b
    if a.order != b.order:
        raise IncompatibleSumError(f"order mismatch: {a.order} vs {b.order}")
    coeffs = [block_diag(p, q) for p, q in zip(a.operator.coefficients, b.operator.coefficients)]
    interior = None
    if a.operator.interior is not None or b.operator.interior is not None:
        interior = block_diag(a.operator.interior_symbol(), b.operator.interior_symbol())
    op = CollarOperator(coeffs, interior=interior, normalize=False)
    conditions = [BoundaryCondition([block_diag(p, q) for p, q in zip(ca.jets, cb.jets)])
                  for ca, cb in zip(a.conditions, b.conditions)]
    projections = []
    for ca, cb, pa, pb in zip(a.conditions, b.conditions, a.projections, b.projections):
        if pa is None and pb is None:
            projections.append(None)
        else:
            pa = pa if pa is not None else MatrixSymbol.identity(ca.target_rank)
            pb = pb if pb is not None else MatrixSymbol.identity(cb.target_rank)
            projections.append(block_diag(pa, pb))
    return BvpProblem(a.manifold, op, conditions, projections, name=f"{a.name}+{b.name}")


# ---------------------------------------------------------------------------
# Model operators
# ---------------------------------------------------------------------------

def model_collar_operator(p: int, q: int) -> CollarOperator:
    """Normalized collar form of ``(-i d/dt + i L) + (i d/dt + i L)`` on E+ and E-."""
    n = p + q
    signs = np.concatenate([np.ones(p), -np.ones(q)])

    def d1(x, t, xi, lam, absxi):
        return 1j * absxi[..., None, None] * np.diag(signs)

    def interior(x, t, xi, lam, absxi):
        # un-normalized symbols of both summands, blended to i|xi| Id inside
        chi = cutoff(np.real(t))[..., None, None]
        collar = np.diag(signs) * lam[..., None, None] + 1j * np.abs(xi)[..., None, None] * np.eye(n)
        full = np.sqrt(np.abs(xi) ** 2 + np.abs(lam) ** 2)[..., None, None]
        return chi * collar + (1 - chi) * 1j * full * np.eye(n)

    coeffs = [MatrixSymbol.identity(n), MatrixSymbol(d1, n, n, 1, source=f"i|xi| diag(+{p},-{q})")]
    return CollarOperator(coeffs, interior=MatrixSymbol(interior, n, n, 1))


def make_model_operator(kind: str, ranks, manifold: ModelManifold) -> BvpProblem:
    """Model problem: D+ (no conditions), D- (full condition) or their sum."""
    p, q = (int(r) for r in ranks)
    if p < 0 or q < 0 or p + q == 0:
        raise ValueError("ranks must be nonnegative and not both zero")
    if kind == "Dplus":
        p, q = p + q, 0
    elif kind == "Dminus":
        p, q = 0, p + q
    elif kind != "Dpm":
        raise ValueError(f"unknown model kind {kind!r}")
    op = model_collar_operator(p, q)
    n = p + q
    # near collar: condition u_-|_X = g; far collar sees the roles swapped
    conditions = [BoundaryCondition.dirichlet(1, n, range(p, n))]
    if manifold.n_collars == 2:
        conditions.append(BoundaryCondition.dirichlet(1, n, range(p)))
    return BvpProblem(manifold, op, conditions, name=kind,
                      meta={"kind": kind, "ranks": (p, q)})


# ---------------------------------------------------------------------------
# Interior ellipticity
# ---------------------------------------------------------------------------

@dataclass
class InteriorReport:
    min_abs_det: float
    elliptic: bool
    tol: float
    samples: int

    def to_dict(self):
        return {"min_abs_det": self.min_abs_det, "elliptic": self.elliptic,
                "tol": self.tol, "samples": self.samples}


def sample_grid(manifold: Optional[ModelManifold] = None, nx: int = 16, nt: int = 5,
                ntheta: int = 64) -> dict:
    """Points of the manifold times the unit covector circle."""
    theta = 2 * np.pi * np.arange(ntheta) / ntheta
    if manifold is not None and manifold.dimension == 1:
        return {"x": np.zeros(1), "t": np.linspace(0, 1, nt), "xi": np.zeros(2),
                "lam": np.array([1.0, -1.0])}
    return {"x": 2 * np.pi * np.arange(nx) / nx, "t": np.linspace(0, 1, nt),
            "xi": np.cos(theta), "lam": np.sin(theta)}


def check_interior_ellipticity(op: CollarOperator, grid: Optional[dict] = None,
                               tol: float = 1e-8) -> InteriorReport:
    """Minimum of |det sigma| over the grid and the unit covector circle."""
    sym = op.interior_symbol()
    if sym.rows != sym.cols:
        raise ShapeError(f"symbol of shape {sym.shape} is not square")
    grid = sample_grid() if grid is None else grid
    x = np.asarray(grid["x"])[:, None, None]
    t = np.asarray(grid["t"])[None, :, None]
    xi = np.asarray(grid["xi"])[None, None, :]
    lam = np.asarray(grid["lam"])[None, None, :]
    if sym.rows == 0:
        return InteriorReport(np.inf, True, tol, 0)
    vals = sym(x, t, xi, lam)
    dets = np.abs(np.linalg.det(vals))
    mn = float(dets.min())
    return InteriorReport(mn, mn > tol, tol, int(dets.size))

