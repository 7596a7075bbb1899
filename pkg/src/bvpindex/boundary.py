"""Bounded-solution subbundles, boundary symbols and the Atiyah-Bott test.

Jet coordinates at ``t = 0`` are ``(u, -i u', ..., (-i d/dt)^(m-1) u)``.
For a trial solution ``exp(i lam t) v`` the jet is ``(v, lam v, ...)``,
so the companion matrix below acts as ``-i d/dt`` on jets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import (
    DiscontinuityError,
    EllipticityMarginError,
    NormalizationError,
    ShapeError,
)
from .symbols import BoundaryCondition, BvpProblem, CollarOperator

TOL_ROOT = 1e-8
TOL_SL = 1e-8


@dataclass
class SubspaceFrame:
    x: float
    xi: float
    columns: np.ndarray
    side: str

    @property
    def rank(self):
        return self.columns.shape[1]

    @property
    def dim(self):
        return self.columns.shape[0]

    def projector(self):
        return self.columns @ self.columns.conj().T


def companion_matrix(op: CollarOperator, x: float, xi: float, t: float = 0.0,
                     absxi: Optional[float] = None) -> np.ndarray:
    """Block companion matrix whose eigenvalues are the roots of det sigma(D)."""
    coeffs = op.coefficient_array(x, t, xi, absxi)
    return companion_from_coefficients(coeffs)


def companion_from_coefficients(coeffs: np.ndarray) -> np.ndarray:
    """``coeffs``: array (m+1, n, n) of D_0..D_m with D_0 = Id."""
    m = coeffs.shape[0] - 1
    n = coeffs.shape[1]
    if not np.allclose(coeffs[0], np.eye(n), atol=1e-12):
        raise NormalizationError("leading coefficient D_0 is not the identity")
    C = np.zeros((m * n, m * n), dtype=complex)
    for j in range(m - 1):
        C[j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = np.eye(n)
    for j in range(m):
        # last block row: lam^m u = -sum_k D_k lam^(m-k) u, column j <-> lam^j
        C[(m - 1) * n:, j * n:(j + 1) * n] = -coeffs[m - j]
    return C


def canonical_frame(F: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of span(F) in a reproducible canonical form.

    Pivot rows of a column-echelon form are chosen by pivoted Cholesky of
    the orthogonal projector (which depends on the subspace only; near ties
    go to the lowest row index), the echelon basis is orthonormalized and
    phases are fixed so the triangular factor has a positive diagonal.
    """
    F = np.asarray(F, dtype=complex)
    r = F.shape[1]
    if r == 0:
        return F.reshape(F.shape[0], 0)
    U, _, _ = np.linalg.svd(F, full_matrices=False)
    Pr = U @ U.conj().T
    rows = []
    for _ in range(r):
        d = np.real(np.diag(Pr)).copy()
        d[rows] = -np.inf
        i = int(np.flatnonzero(d >= d.max() - 1e-9)[0])
        rows.append(i)
        Pr = Pr - np.outer(Pr[:, i], Pr[i, :]) / Pr[i, i]
    rows = np.sort(rows)
    E = F @ np.linalg.inv(F[rows, :])
    Q, R = np.linalg.qr(E)
    d = np.diag(R)
    phase = d / np.abs(d)
    return Q * phase[None, :]


def _sorted_eigs(C):
    ev = np.linalg.eigvals(C)
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def bounded_subspaces(companion: np.ndarray, tol: float = TOL_ROOT, x: float = 0.0,
                      xi: float = 1.0):
    """Frames of L+ (roots with Im > 0) and L- (Im < 0) from ordered Schur forms."""
    C = np.asarray(companion, dtype=complex)
    eigs = _sorted_eigs(C) if C.size else np.zeros(0, dtype=complex)
    bad = eigs[np.abs(eigs.imag) < tol]
    if bad.size:
        raise EllipticityMarginError(f"root {bad[0]:.3g} within {tol:g} of the real axis",
                                     eigenvalue=complex(bad[0]))
    if C.size == 0:
        empty = np.zeros((0, 0), dtype=complex)
        return SubspaceFrame(x, xi, empty, "plus"), SubspaceFrame(x, xi, empty, "minus")
    _, Zp, kp = scipy.linalg.schur(C, output="complex", sort=lambda z: z.imag > 0)
    _, Zm, km = scipy.linalg.schur(C, output="complex", sort=lambda z: z.imag < 0)
    plus = SubspaceFrame(x, xi, canonical_frame(Zp[:, :kp]), "plus")
    minus = SubspaceFrame(x, xi, canonical_frame(Zm[:, :km]), "minus")
    return plus, minus


def boundary_symbol_matrix(B: BoundaryCondition, frame: SubspaceFrame,
                           xi: Optional[float] = None, x: Optional[float] = None) -> np.ndarray:
    """``sigma(B)`` applied to the columns of an L+ frame: shape (G, rank L+)."""
    if frame.side != "plus":
        raise ShapeError("boundary symbol is taken on L+")
    x = frame.x if x is None else x
    xi = frame.xi if xi is None else xi
    Bm = B.matrix(x, xi)
    if Bm.shape[1] != frame.dim:
        raise ShapeError(f"condition acts on jets of size {Bm.shape[1]}, frame has {frame.dim}")
    return Bm @ frame.columns


def range_frame(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Canonical orthonormal frame of Im P."""
    if P.size == 0:
        return np.zeros((P.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(P)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return canonical_frame(u[:, :r])


@dataclass
class EllipticityReport:
    samples: list
    global_min: float
    verdict: str
    tol: float
    grid: dict
    reason: str = ""

    @property
    def elliptic(self):
        return self.verdict == "elliptic"

    def to_dict(self):
        return {"verdict": self.verdict, "global_min": _finite(self.global_min), "tol": self.tol,
                "reason": self.reason, "grid": self.grid,
                "samples": [{k: _jsonable(v) for k, v in s.items()} for s in self.samples]}


def _finite(v):
    return None if not np.isfinite(v) else float(v)


def _jsonable(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        arr = np.asarray(v)
        if np.iscomplexobj(arr):
            return [[float(z.real), float(z.imag)] for z in arr.ravel()]
        return arr.tolist()
    if isinstance(v, (np.floating, float)):
        return _finite(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def boundary_samples(nx: int = 32):
    x = 2 * np.pi * np.arange(nx) / nx
    return [(float(a), s) for s in (1.0, -1.0) for a in x]


def boundary_map(problem: BvpProblem, component: int, x: float, xi: float,
                 tol_root: float = TOL_ROOT):
    """Boundary symbol at one sample as a square map L+ -> target, or None on rank mismatch.

    Returns ``(matrix, plus_frame, eigenvalues, target_rank)``.
    """
    op = problem.component_operator(component)
    C = companion_matrix(op, x, xi)
    plus, _ = bounded_subspaces(C, tol_root, x, xi)
    eigs = _sorted_eigs(C)
    cond = problem.conditions[component]
    Bm = cond.matrix(x, xi)
    proj = problem.projections[component]
    if proj is not None:
        P = proj(x, 0.0, xi)[..., :, :]
        Q = range_frame(P)
        M = Q.conj().T @ P @ Bm @ plus.columns
        target = Q.shape[1]
    else:
        M = Bm @ plus.columns
        target = cond.target_rank
    if target != plus.rank:
        return None, plus, eigs, target
    return M, plus, eigs, target


def sl_check(problem: BvpProblem, grid: Optional[dict] = None, tol_root: float = TOL_ROOT,
             tol_sl: float = TOL_SL) -> EllipticityReport:
    """Shapiro-Lopatinskii check on every collar over ``grid`` (``{"nx": ...}``)."""
    grid = {"nx": 32} if grid is None else dict(grid)
    if problem.manifold.dimension == 1:
        total = sum(c.target_rank for c in problem.conditions)
        need = problem.order * problem.rank
        ok = total == need
        return EllipticityReport([], np.inf if ok else 0.0, "elliptic" if ok else "rank-mismatch",
                                 tol_sl, {"points": 2},
                                 reason="" if ok else f"{total} conditions for {need} jets")
    samples = []
    gmin = np.inf
    verdict, reason = "elliptic", ""
    for comp in range(problem.manifold.n_collars):
        for x, xi in boundary_samples(grid.get("nx", 32)):
            try:
                M, plus, eigs, target = boundary_map(problem, comp, x, xi, tol_root)
            except EllipticityMarginError as exc:
                samples.append({"component": comp, "x": x, "xi": xi, "min_sv": 0.0,
                                "eigenvalues": [exc.eigenvalue]})
                gmin = 0.0
                verdict, reason = "not-elliptic", f"interior: {exc}"
                continue
            if M is None:
                sv = 0.0
                if verdict == "elliptic" or verdict == "not-elliptic":
                    verdict = "rank-mismatch"
                    reason = f"rank L+ = {plus.rank} but target rank {target} at x={x:.3f}, xi={xi:+.0f}"
            else:
                sv = float(np.linalg.svd(M, compute_uv=False).min()) if M.size else np.inf
            gmin = min(gmin, sv)
            samples.append({"component": comp, "x": x, "xi": xi, "min_sv": sv,
                            "eigenvalues": eigs})
    if verdict == "elliptic" and not gmin > tol_sl:
        verdict, reason = "not-elliptic", f"boundary symbol min singular value {gmin:.3g}"
    return EllipticityReport(samples, gmin, verdict, tol_sl, grid, reason)


@dataclass
class ObstructionReport:
    rank_plus: int
    rank_minus: int
    obstruction: int
    max_adjacent_angle: float
    verdict: str
    per_x: dict = field(default_factory=dict)

    def to_dict(self):
        return {"rank_plus": self.rank_plus, "rank_minus": self.rank_minus,
                "obstruction": self.obstruction, "max_adjacent_angle": self.max_adjacent_angle,
                "verdict": self.verdict}


def ab_obstruction(op: CollarOperator, nx: int = 32, tol_root: float = TOL_ROOT) -> ObstructionReport:
    """Ranks of L+ over the two components xi = +1, -1 of the cosphere bundle of a circle."""
    ranks = {}
    max_angle = 0.0
    for xi in (1.0, -1.0):
        rs = []
        prev = first = None
        for x in 2 * np.pi * np.arange(nx) / nx:
            plus, _ = bounded_subspaces(companion_matrix(op, x, xi), tol_root, x, xi)
            rs.append(plus.rank)
            if prev is not None and prev.rank == plus.rank and plus.rank:
                max_angle = max(max_angle, float(np.max(
                    scipy.linalg.subspace_angles(prev.columns, plus.columns))))
            first = plus if first is None else first
            prev = plus
        if len(set(rs)) != 1:
            raise DiscontinuityError(f"rank of L+ jumps along x at xi={xi:+.0f}: {sorted(set(rs))}")
        ranks[xi] = rs[0]
    obs = ranks[1.0] - ranks[-1.0]
    verdict = "classical boundary conditions possible" if obs == 0 else "Atiyah-Bott obstructed"
    return ObstructionReport(ranks[1.0], ranks[-1.0], obs, max_angle, verdict)
