"""Numeric Fredholm index, winding numbers and the index-formula checks."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import fourier
from .boundary import boundary_map, sl_check
from .discretize import DiscreteOperator, discretize_bvp
from .errors import (
    CapabilityError,
    NumericalInconsistencyError,
    PreconditionError,
    ToleranceError,
)
from .spectral import DyadicRational, ProjectionSymbol, d_value, double_even
from .symbols import (
    BoundaryCondition,
    BvpProblem,
    CollarOperator,
    MatrixSymbol,
    ModelManifold,
    make_model_operator,
)

TOL_RANK = 1e-8
GAP_MIN = 1e3
LOCALIZATION = 0.5
GRAY = 1e-2  # relative singular values below this may belong to a null cluster
DECAY_LIMIT = 0.5  # smallest retained singular value may not shrink faster between resolutions


# ---------------------------------------------------------------------------
# SVD analysis
# ---------------------------------------------------------------------------

@dataclass
class SingularAnalysis:
    resolution: dict
    shape: tuple
    singular_values: np.ndarray
    raw_ker: int
    raw_coker: int
    dim_ker: int
    dim_coker: int
    gap: float

    @property
    def index(self):
        return self.dim_ker - self.dim_coker

    @property
    def smallest_retained(self) -> float:
        """Smallest singular value kept in the rank, relative to the largest."""
        rank = self.shape[1] - self.raw_ker
        if rank == 0 or not self.singular_values.size:
            return float("inf")
        return float(self.singular_values[rank - 1] / self.singular_values[0])

    @property
    def clean(self):
        return self.gap >= GAP_MIN

    def to_dict(self):
        return {"resolution": self.resolution, "shape": list(self.shape),
                "raw_ker": self.raw_ker, "raw_coker": self.raw_coker,
                "dim_ker": self.dim_ker, "dim_coker": self.dim_coker, "index": self.index,
                "gap": None if not np.isfinite(self.gap) else float(self.gap)}


def _localized_count(basis: np.ndarray, low: Optional[np.ndarray]) -> int:
    if basis.shape[1] == 0:
        return 0
    if low is None:
        return basis.shape[1]
    w = np.linalg.eigvalsh(basis.conj().T @ low @ basis)
    return int(np.sum(w > LOCALIZATION))


def analyze(op: DiscreteOperator, tol: float = TOL_RANK) -> SingularAnalysis:
    """Kernel and cokernel from the SVD, with ghosts at the Fourier cutoff discarded."""
    A = op.matrix
    rows, cols = A.shape
    if A.size:
        U, s, Vh = np.linalg.svd(A)
    else:
        U, s, Vh = np.eye(rows), np.zeros(0), np.eye(cols)
    smax = s[0] if s.size else 0.0
    thresh = tol * max(smax, 1e-300)
    rank = int(np.sum(s >= thresh)) if smax > 0 else 0
    # a cluster of small values split off by a clear gap is null as well
    # (exponentially small truncation residues of genuine kernel vectors)
    rel = s[:rank] / smax if rank else s[:0]
    cuts = [i for i in range(1, rank) if rel[i] < GRAY and rel[i - 1] >= GAP_MIN * rel[i]]
    if cuts:
        rank = cuts[0]
    small = s[rank:]
    large = s[:rank]
    if small.size and large.size:
        gap = float(large[-1] / max(small[0], 1e-300))
    else:
        gap = float("inf")
    K = Vh[rank:].conj().T
    Cc = U[:, rank:]
    return SingularAnalysis(op.resolution, (rows, cols), s, cols - rank, rows - rank,
                            _localized_count(K, op.col_low), _localized_count(Cc, op.row_low), gap)


@dataclass
class IndexReport:
    analyses: list
    verdict: str
    resolutions: tuple
    warnings: list = field(default_factory=list)

    @property
    def finest(self) -> SingularAnalysis:
        return self.analyses[-1]

    @property
    def dim_ker(self):
        return self.finest.dim_ker

    @property
    def dim_coker(self):
        return self.finest.dim_coker

    @property
    def index(self) -> Optional[int]:
        return self.finest.index if self.verdict == "stable" else None

    @property
    def gap(self):
        return min(a.gap for a in self.analyses)

    def require(self) -> int:
        reason = self.warnings[-1] if self.warnings else ""
        if self.verdict == "indeterminate":
            raise ToleranceError(reason or f"no clean singular-value gap (gap {self.gap:.3g})")
        if self.verdict != "stable":
            raise NumericalInconsistencyError(
                "index differs between resolutions: "
                + ", ".join(str(a.index) for a in self.analyses))
        return self.finest.index

    def to_dict(self):
        g = self.gap
        return {"dim_ker": self.dim_ker, "dim_coker": self.dim_coker, "index": self.index,
                "resolutions": list(self.resolutions),
                "gap": None if not np.isfinite(g) else float(g), "verdict": self.verdict,
                "per_resolution": [a.to_dict() for a in self.analyses],
                "warnings": list(self.warnings)}


def numeric_index(problem: BvpProblem, resolutions: Sequence[int] = (16, 32),
                  tol: float = TOL_RANK, check: bool = True,
                  max_resolution: Optional[int] = None) -> IndexReport:
    """Index at each resolution; ``stable`` iff the two finest agree with clean gaps.

    On the two-dimensional models the smallest retained singular value must
    also have settled: if it still shrinks by more than ``DECAY_LIMIT``
    between the two finest resolutions, a null vector is not yet resolved and
    the verdict is ``indeterminate``.  With ``max_resolution`` the finest
    resolution is doubled until the verdict is stable or the cap is reached.
    """
    notes = []
    if check and problem.manifold.dimension == 2:
        rep = sl_check(problem)
        if not rep.elliptic:
            msg = f"problem is not SL-elliptic ({rep.verdict}): {rep.reason}"
            warnings.warn(msg)
            notes.append(msg)
    resolutions = sorted(int(r) for r in resolutions)
    if max_resolution is not None and max_resolution < resolutions[-1]:
        raise ValueError(f"max_resolution {max_resolution} is below the finest resolution {resolutions[-1]}")
    analyses = [analyze(discretize_bvp(problem, r), tol) for r in resolutions]
    kind = problem.manifold.dimension
    while True:
        verdict, reason = _verdict(analyses[-2:], kind)
        if verdict == "stable" or max_resolution is None or 2 * resolutions[-1] > max_resolution:
            break
        resolutions.append(2 * resolutions[-1])
        analyses.append(analyze(discretize_bvp(problem, resolutions[-1]), tol))
    if reason:
        notes.append(reason)
    return IndexReport(analyses, verdict, tuple(resolutions), notes)


def _verdict(last, dimension):
    if any(not a.clean for a in last):
        return "indeterminate", f"no clean singular-value gap (gap {min(a.gap for a in last):.3g})"
    if len(last) == 2 and dimension == 2:
        before, after = (a.smallest_retained for a in last)
        if np.isfinite(before) and after < DECAY_LIMIT * before:
            return "indeterminate", (f"smallest singular value still decaying with resolution "
                                     f"({before:.3g} -> {after:.3g}); increase the resolution")
    if len({a.index for a in last}) != 1:
        return "unstable", "index differs between resolutions: " + ", ".join(str(a.index) for a in last)
    return "stable", ""


# ---------------------------------------------------------------------------
# Winding numbers
# ---------------------------------------------------------------------------

def _loop_values(loop, x):
    if isinstance(loop, MatrixSymbol):
        return loop(x, 0.0, 1.0)
    vals = np.asarray(loop(x), dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None, None]
    return vals


def _winding_at(loop, n, tol):
    x = 2 * np.pi * np.arange(n) / n
    det = np.linalg.det(_loop_values(loop, x))
    scale = np.abs(det).max()
    if scale == 0 or np.abs(det).min() <= tol * max(scale, 1.0):
        raise ToleranceError("loop is (nearly) singular at a sample")
    ang = np.angle(np.append(det, det[0]))
    steps = np.diff(np.unwrap(ang))
    return int(round(steps.sum() / (2 * np.pi))), float(np.abs(steps).max())


def circle_winding_index(loop, samples: int = 256, tol: float = 1e-10) -> int:
    """Winding number of ``det loop(x)`` over ``[0, 2 pi)``.

    ``loop`` is a MatrixSymbol (evaluated at xi = 1) or a callable of x
    returning scalars or matrices.  The count must agree at ``samples``
    and ``2 * samples`` with argument steps below pi/2; samples are
    doubled (up to 2**16) until that holds.
    """
    n = int(samples)
    while n <= 1 << 16:
        w1, step1 = _winding_at(loop, n, tol)
        w2, step2 = _winding_at(loop, 2 * n, tol)
        if w1 == w2 and step2 < np.pi / 2:
            return w2
        n *= 2
    raise ToleranceError("winding number did not stabilize under sample doubling")


# ---------------------------------------------------------------------------
# Circle operators and cobordism invariance
# ---------------------------------------------------------------------------

def circle_operator_matrix(a_plus, a_minus, N: int) -> DiscreteOperator:
    """Finite section of ``a+ P+ + a- P-`` with P+ the projection onto modes n >= 0."""
    x = fourier.grid(N)
    Ap = fourier.multiplier(_loop_values(a_plus, x))
    Am = fourier.multiplier(_loop_values(a_minus, x))
    r = Ap.shape[0] // (2 * N + 1)
    modes = fourier.mode_labels(N, r)
    plus = (modes >= 0).astype(float)
    T = Ap * plus[None, :] + Am * (1 - plus)[None, :]
    low = np.diag((np.abs(modes) <= N / 2).astype(float))
    labels = [("mode", int(n), c) for n, c in zip(modes, np.tile(np.arange(r), 2 * N + 1))]
    return DiscreteOperator(T, labels, list(labels), {"fourier": N}, "circle", low, low)


@dataclass
class CobordismReport:
    winding_plus: int
    winding_minus: int
    index_formula: int
    index_oracle: list
    extendable: bool
    verdict: str

    def to_dict(self):
        return dict(self.__dict__)


def circle_operator_index(a_plus, a_minus, resolutions=(16, 32), tol=TOL_RANK) -> int:
    vals = [analyze(circle_operator_matrix(a_plus, a_minus, N), tol).index for N in resolutions]
    if len(set(vals)) != 1:
        raise NumericalInconsistencyError(f"circle operator index unstable: {vals}")
    return vals[0]


def cobordism_check(a_plus, a_minus, resolutions=(16, 32), extendable: Optional[bool] = None,
                    samples: int = 256) -> CobordismReport:
    """Index of ``a+ P+ + a- P-``: ``wind(a-) - wind(a+)``, checked against finite sections."""
    wp = circle_winding_index(a_plus, samples)
    wm = circle_winding_index(a_minus, samples)
    formula = wm - wp
    oracle = [analyze(circle_operator_matrix(a_plus, a_minus, N)).index for N in resolutions]
    if any(o != formula for o in oracle):
        raise NumericalInconsistencyError(f"winding formula {formula} vs finite sections {oracle}")
    if extendable is None:
        x = 2 * np.pi * np.arange(samples) / samples
        extendable = bool(np.allclose(_loop_values(a_plus, x), _loop_values(a_minus, x), atol=1e-12))
    if extendable:
        verdict = "index zero (extendable)" if formula == 0 else "violates cobordism invariance"
    else:
        verdict = f"index {formula}"
    return CobordismReport(wp, wm, formula, oracle, extendable, verdict)


def extendable_pair(B: MatrixSymbol):
    """Boundary symbols of the disk problem ``(D-, B u|_X = g)`` at xi = +1 and xi = -1.

    Every solution of D- is bounded on the disk, so L+ is the whole fibre at
    both covector signs and the pair is the restriction of ``sigma(B)``.
    """
    r = B.rows
    base = make_model_operator("Dminus", (0, r), ModelManifold("Disk"))
    prob = BvpProblem(base.manifold, base.operator, [BoundaryCondition([B])])

    def side(xi):
        def loop(x):
            x = np.atleast_1d(x)
            return np.stack([boundary_map(prob, 0, float(a), xi)[0] for a in x])
        return loop

    return side(1.0), side(-1.0)


# ---------------------------------------------------------------------------
# Excision / classification
# ---------------------------------------------------------------------------

def reduced_winding_data(problem: BvpProblem, samples: int = 128) -> tuple:
    """Winding of ``det sigma(B)|L+`` over each boundary circle and covector sign."""
    if problem.manifold.dimension != 2:
        raise CapabilityError("winding data is defined for circle boundaries")
    if problem.is_spectral:
        raise CapabilityError("winding data is computed for classical conditions")
    if not problem.operator.is_x_independent():
        raise CapabilityError("winding data needs x-independent interior coefficients")
    data = []
    for comp in range(problem.manifold.n_collars):
        for xi in (1.0, -1.0):
            def loop(x, comp=comp, xi=xi):
                mats = [boundary_map(problem, comp, float(a), xi)[0] for a in np.atleast_1d(x)]
                if any(m is None for m in mats):
                    raise PreconditionError("boundary symbol is not square")
                return np.stack(mats)
            m0 = loop(np.zeros(1))[0]
            data.append(0 if m0.size == 0 else circle_winding_index(loop, samples))
    return tuple(data)


@dataclass
class ExcisionReport:
    winding_data: tuple
    indices: tuple
    equal_data: bool
    equal_index: bool
    verdict: str

    def to_dict(self):
        return {"winding_data": [list(w) for w in self.winding_data],
                "indices": list(self.indices), "equal_data": self.equal_data,
                "equal_index": self.equal_index, "verdict": self.verdict}


def verify_excision(p1: BvpProblem, p2: BvpProblem, resolutions=(16, 32),
                    max_resolution: Optional[int] = None) -> ExcisionReport:
    """Problems with equal reduced winding data must have equal indices."""
    w1, w2 = reduced_winding_data(p1), reduced_winding_data(p2)
    i1 = numeric_index(p1, resolutions, max_resolution=max_resolution).require()
    i2 = numeric_index(p2, resolutions, max_resolution=max_resolution).require()
    eq_data, eq_index = w1 == w2, i1 == i2
    if eq_data:
        verdict = "consistent" if eq_index else "inconsistent"
    else:
        verdict = "different classes"
    return ExcisionReport((w1, w2), (i1, i2), eq_data, eq_index, verdict)


# ---------------------------------------------------------------------------
# Index formula for spectral problems
# ---------------------------------------------------------------------------

@dataclass
class FormulaReport:
    lhs: int
    doubled_index: int
    d: DyadicRational
    rhs: DyadicRational
    equal: bool

    def to_dict(self):
        return {"lhs": self.lhs, "doubled_index": self.doubled_index, "d": str(self.d),
                "rhs": str(self.rhs), "equal": self.equal}


def spectral_problem(D: CollarOperator, P: MatrixSymbol,
                     manifold: Optional[ModelManifold] = None) -> BvpProblem:
    """First-order problem ``(D, P u|_X = g)`` with ``g`` in the range of P."""
    manifold = manifold or ModelManifold("Disk")
    if D.order != 1:
        raise CapabilityError("spectral problems are built for first-order operators")
    if manifold.n_collars != 1:
        raise CapabilityError("formula checks run on single-boundary manifolds")
    cond = BoundaryCondition([MatrixSymbol.identity(D.rank)])
    return BvpProblem(manifold, D, [cond], [P], name="spectral")


def verify_index_formula(D: CollarOperator, P: ProjectionSymbol, resolutions=(16, 32),
                            manifold: Optional[ModelManifold] = None) -> FormulaReport:
    """``ind(D, P) = 1/2 ind(D + alpha^* D, classical) - d(P)`` as dyadic rationals."""
    manifold = manifold or ModelManifold("Disk")
    d = d_value(P.discretize(max(resolutions)))
    lhs = numeric_index(spectral_problem(D, P, manifold), resolutions).require()
    doubled = numeric_index(double_even(D, P, manifold), resolutions).require()
    rhs = DyadicRational(doubled).half() - d
    return FormulaReport(lhs, doubled, d, rhs, rhs == lhs)
