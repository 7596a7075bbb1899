"""Explicit deformations of boundary value problems with ellipticity certificates.

A path is stored as a coefficient family ``coefficients(s, x, t, xi, absxi)``
(vectorized in ``s``) plus the boundary data at each parameter, so that
the same path can be sampled for certificates, frozen at single
parameters, or pulled into the collar.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .boundary import (
    TOL_ROOT,
    TOL_SL,
    bounded_subspaces,
    companion_from_coefficients,
    companion_matrix,
    range_frame,
)
from .errors import (
    CannotRotateError,
    CapabilityError,
    InvalidCutoffError,
    OrderError,
    PreconditionError,
)
from .discretize import companion_batch
from .expr import smooth_step
from .spectral import projector_batch
from .symbols import (
    BoundaryCondition,
    BvpProblem,
    CollarOperator,
    MatrixSymbol,
    block_diag,
    check_interior_ellipticity,
    hstack,
    sample_grid,
)

DEFAULT_STEPS = 101


# ---------------------------------------------------------------------------
# Paths and certificates
# ---------------------------------------------------------------------------

def _grid_shape(*arrays):
    return np.broadcast_shapes(*(np.shape(a) for a in arrays))


def operator_from_family(family: Callable, s, order: int, rank: int,
                         interior: Optional[MatrixSymbol] = None) -> CollarOperator:
    """Freeze a coefficient family at parameter ``s`` (scalar or function of t)."""
    coeffs = []
    for k in range(order + 1):
        def f(x, t, xi, lam, absxi, k=k):
            sv = s(t) if callable(s) else s
            return family(sv, x, t, xi, absxi)[..., k, :, :]
        coeffs.append(MatrixSymbol(f, rank, rank, k))
    coeffs[0] = MatrixSymbol.identity(rank)
    return CollarOperator(coeffs, interior=interior, normalize=False)


@dataclass
class HomotopyPath:
    """Parameter grid, coefficient family and boundary data along a deformation."""

    kind: str
    params: np.ndarray
    family: Callable
    boundary: Callable  # param -> (conditions, projections)
    manifold: object
    order: int
    rank: int
    start: BvpProblem
    end: Optional[BvpProblem] = None
    meta: dict = field(default_factory=dict)

    def at(self, param) -> BvpProblem:
        if param == self.params[0]:
            return self.start
        if self.end is not None and param == self.params[-1]:
            return self.end
        conds, projs = self.boundary(param)
        op = operator_from_family(self.family, param, self.order, self.rank)
        return BvpProblem(self.manifold, op, conds, projs, name=f"{self.kind}@{param:.4g}")

    @property
    def problems(self):
        return [self.at(p) for p in self.params]

    def __len__(self):
        return len(self.params)


@dataclass
class PathCertificate:
    params: np.ndarray
    interior_margin: np.ndarray
    boundary_margin: np.ndarray
    max_angle: np.ndarray
    verdict: str
    failure: Optional[dict] = None
    tol_interior: float = 1e-8
    tol_sl: float = TOL_SL

    @property
    def valid(self):
        return self.verdict == "valid"

    def rows(self):
        return [(i, float(p), float(a), float(b), float(c)) for i, (p, a, b, c) in
                enumerate(zip(self.params, self.interior_margin, self.boundary_margin, self.max_angle))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "parameter", "interior_margin", "boundary_margin", "max_principal_angle"])
        for r in self.rows():
            w.writerow([r[0]] + [f"{v:.12e}" for v in r[1:]])
        return buf.getvalue()

    def to_dict(self):
        return {"verdict": self.verdict, "steps": len(self.params),
                "min_interior_margin": float(np.min(self.interior_margin)),
                "min_boundary_margin": float(np.min(self.boundary_margin)),
                "max_principal_angle": float(np.max(self.max_angle)),
                "failure": self.failure}


def _orth_batch(P, k):
    """First ``k`` left singular vectors of each matrix in a stack."""
    u, _, _ = np.linalg.svd(P)
    return u[..., :, :k]


def _step_samples(problem: BvpProblem, xs, tol_root):
    """Boundary-symbol minimum and L+ frames on ``xs`` x {+1, -1} for every collar.

    Vectorized counterpart of :func:`sl_check` used along paths.
    Returns ``(margin, frames, reason)``.
    """
    margin, frames, reason = np.inf, [], ""
    for comp in range(problem.manifold.n_collars):
        op = problem.component_operator(comp)
        cond = problem.conditions[comp]
        proj = problem.projections[comp]
        for xi in (1.0, -1.0):
            xiv = np.full_like(xs, xi)
            C = companion_batch(op.coefficient_array(xs, 0.0 * xs, xiv, np.abs(xiv)))
            ev = np.linalg.eigvals(C)
            if np.any(np.abs(ev.imag) < tol_root):
                return 0.0, None, "root within tolerance of the real axis"
            k = np.sum(ev.imag > 0, axis=-1)
            if len(set(k.tolist())) != 1:
                return 0.0, None, "rank of L+ varies along the boundary"
            k = int(k[0])
            F = _orth_batch(projector_batch(-1j * C), k)
            frames.append(F)
            B = cond.matrix(xs, xiv)
            if proj is not None:
                P = proj(xs, 0.0, xiv)
                ranks = np.linalg.matrix_rank(P, tol=1e-10)
                if len(set(np.atleast_1d(ranks).tolist())) != 1:
                    return 0.0, None, "projection rank varies"
                Q = _orth_batch(P, int(np.atleast_1d(ranks)[0]))
                M = np.swapaxes(Q.conj(), -1, -2) @ P @ B @ F
            else:
                M = B @ F
            if M.shape[-1] != M.shape[-2]:
                return 0.0, None, f"rank L+ = {M.shape[-1]} but target rank {M.shape[-2]}"
            if M.shape[-1]:
                margin = min(margin, float(np.linalg.svd(M, compute_uv=False).min()))
    return margin, frames, reason


def _max_angle(frames, ref):
    worst = 0.0
    for a, b in zip(frames, ref):
        if a.shape != b.shape:
            return np.pi / 2
        if a.shape[-1]:
            resid = a - b @ (np.swapaxes(b.conj(), -1, -2) @ a)
            s = np.linalg.norm(resid, ord=2, axis=(-2, -1))
            worst = max(worst, float(np.arcsin(np.clip(s, 0, 1)).max()))
    return worst


def certify_path(path: HomotopyPath, grid: Optional[dict] = None, tol_root: float = TOL_ROOT,
                 tol_sl: float = TOL_SL, tol_interior: float = 1e-8) -> PathCertificate:
    """Interior margin, boundary-symbol margin and L+ frame drift at every step."""
    grid = {"nx": 16} if grid is None else dict(grid)
    nx = grid.get("nx", 16)
    xs = 2 * np.pi * np.arange(nx) / nx
    igrid = sample_grid(path.manifold, nx=4, nt=3, ntheta=32)
    interior, bmargin, angles = [], [], []
    failure = None
    ref = None
    for i, p in enumerate(path.params):
        prob = path.at(p)
        rep = check_interior_ellipticity(prob.operator, igrid, tol_interior)
        interior.append(rep.min_abs_det)
        margin, frames, reason = _step_samples(prob, xs, tol_root)
        bmargin.append(margin)
        if frames is None:
            angles.append(np.pi / 2)
        else:
            ref = frames if ref is None else ref
            angles.append(_max_angle(frames, ref))
        ok = frames is not None and margin > tol_sl
        if not ok and not reason:
            reason = f"boundary symbol min singular value {margin:.3g}"
        if failure is None and (not ok or not rep.elliptic):
            failure = {"step": i, "parameter": float(p),
                       "reason": reason if not ok else f"interior |det| {rep.min_abs_det:.3g}"}
    verdict = "valid" if failure is None else "invalid"
    return PathCertificate(np.asarray(path.params, dtype=float), np.array(interior), np.array(bmargin),
                           np.array(angles), verdict, failure, tol_interior, tol_sl)


# ---------------------------------------------------------------------------
# Flattening
# ---------------------------------------------------------------------------

def _tangential(op: CollarOperator):
    """``A = i D_1`` so that the collar form is ``-i d/dt - i A``."""
    f1 = op.coefficients[1]._func
    return lambda x, t, xi, absxi: 1j * np.asarray(f1(x, t, xi, np.zeros(np.shape(xi)), absxi))


def flatten_family(op: CollarOperator):
    if op.order != 1:
        raise OrderError("flattening is defined for first-order operators")
    A = _tangential(op)
    n = op.rank

    def family(s, x, t, xi, absxi):
        x, t, xi, absxi = (np.asarray(v, dtype=float) for v in (x, t, xi, absxi))
        s = np.asarray(s, dtype=float)
        shape = _grid_shape(s, x, t, xi, absxi)
        Av = np.broadcast_to(A(x, t, xi, absxi), shape + (n, n))
        P = projector_batch(Av)
        a = np.broadcast_to(absxi, shape)[..., None, None]
        sv = np.broadcast_to(s, shape)[..., None, None]
        As = (1 - sv) * Av + sv * a * (2 * P - np.eye(n))
        out = np.zeros(shape + (2, n, n), dtype=complex)
        out[..., 0, :, :] = np.eye(n)
        out[..., 1, :, :] = -1j * As
        return out

    return family


def flatten_path(problem: BvpProblem, steps: int = DEFAULT_STEPS, certify: bool = True):
    """``A_tau = (1 - tau) A + tau |xi| (2 P - 1)``, P the spectral projection of A."""
    if problem.order != 1:
        raise OrderError("flatten_path needs a first-order problem")
    fam = flatten_family(problem.operator)
    params = np.linspace(0.0, 1.0, steps)
    path = HomotopyPath("flatten", params, fam,
                        lambda s: (list(problem.conditions), list(problem.projections)),
                        problem.manifold, 1, problem.rank, problem)
    return path, (certify_path(path) if certify else None)


def is_flat(op: CollarOperator, nx: int = 8, tol: float = 1e-8) -> bool:
    """Whether ``A^2 = |xi|^2`` on sampled covectors."""
    if op.order != 1:
        return False
    A = _tangential(op)
    x = 2 * np.pi * np.arange(nx) / nx
    for xi in (1.0, -1.0):
        v = np.broadcast_to(A(x, np.zeros_like(x), np.full_like(x, xi), np.ones_like(x)),
                            (nx, op.rank, op.rank))
        if not np.allclose(v @ v, np.eye(op.rank), atol=tol):
            return False
    return True


# ---------------------------------------------------------------------------
# Rotation of the boundary condition
# ---------------------------------------------------------------------------

def rotation_data(problem: BvpProblem, target: Optional[MatrixSymbol] = None):
    """Symbol-level pieces of the rotation: ``p``, ``beta p``, ``beta^{-1}``, ``T``.

    Returns a function of one covector sample ``(x, xi)``.
    """
    op = problem.operator
    n = op.rank
    cond = problem.conditions[0]
    G = cond.target_rank
    PG = target if target is not None else problem.projections[0]
    A = _tangential(op)

    def data(x, xi):
        Av = np.broadcast_to(A(np.float64(x), np.float64(0.0), np.float64(xi), np.float64(abs(xi))), (n, n))
        p = projector_batch(Av[None])[0]
        F = range_frame(p)
        B = cond.matrix(x, xi)
        Pg = np.eye(G) if PG is None else PG(x, 0.0, xi)
        Q = range_frame(Pg)
        M = Q.conj().T @ Pg @ B @ F
        if M.shape[0] != M.shape[1]:
            raise CannotRotateError(f"rank L+ = {F.shape[1]} but target rank {Q.shape[1]}")
        if M.size and np.linalg.svd(M, compute_uv=False).min() < TOL_SL:
            raise CannotRotateError(f"boundary symbol not invertible at x={x:.3f}, xi={xi:+.0f}")
        binv = F @ np.linalg.solve(M, Q.conj().T) if M.size else np.zeros((n, G), dtype=complex)
        bp = Q @ Q.conj().T @ Pg @ B @ p
        T = Q @ Q.conj().T
        return p, bp, binv, T

    return data


def rotated_projection(p, bp, binv, T, phi):
    """``c^2 P + s^2 T + cs (beta P + beta^{-1} T)`` on ``E + G`` (an exact projection)."""
    c, s = _cs(phi)
    n, G = p.shape[0], T.shape[0]
    out = np.zeros((n + G, n + G), dtype=complex)
    out[:n, :n] = c * c * p
    out[n:, n:] = s * s * T
    out[n:, :n] = c * s * bp
    out[:n, n:] = c * s * binv
    return out


def _cs(phi):
    if phi == np.pi / 2:
        return 0.0, 1.0
    return np.cos(phi), np.sin(phi)


def rotate_family(problem: BvpProblem, target=None):
    data = rotation_data(problem, target)
    n = problem.rank
    G = problem.conditions[0].target_rank
    cache = {}

    def pi_at(phi, x, xi):
        key = (round(float(x), 14), float(np.sign(xi)) if xi != 0 else 0.0)
        if key not in cache:
            cache[key] = data(float(x), key[1] if key[1] != 0 else 1.0)
        return rotated_projection(*cache[key], float(phi))

    def family(phi, x, t, xi, absxi):
        phi, x, t, xi, absxi = (np.asarray(v, dtype=float) for v in (phi, x, t, xi, absxi))
        shape = _grid_shape(phi, x, t, xi, absxi)
        ph, xx, xv, av = (np.broadcast_to(v, shape).ravel() for v in (phi, x, xi, absxi))
        out = np.zeros((ph.size, 2, n + G, n + G), dtype=complex)
        out[:, 0] = np.eye(n + G)
        for k in range(ph.size):
            Pi = pi_at(ph[k], xx[k], xv[k])
            out[k, 1] = -1j * av[k] * (2 * Pi - np.eye(n + G))
        return out.reshape(shape + (2, n + G, n + G))

    return family


def rotate_path(problem: BvpProblem, target_projection: Optional[MatrixSymbol] = None,
                steps: int = DEFAULT_STEPS, certify: bool = True):
    """Rotate ``(L+, B)`` into the target projection on the stabilized bundle ``E + C^G``.

    Along the path the operator is ``-i d/dt - i |xi| (2 Pi_phi - 1)`` and the
    condition is ``P_G [cos(phi) B, sin(phi) Id] w|_X = g``.  In the frame
    ``f -> (cos(phi) f, sin(phi) beta f)`` of L+ its boundary symbol is
    ``beta`` at every phi.
    """
    if problem.manifold.n_collars != 1:
        raise CapabilityError("rotation is implemented on single-boundary models")
    if problem.order != 1:
        raise OrderError("rotate_path needs a first-order problem")
    if not is_flat(problem.operator):
        raise PreconditionError("rotate_path needs a flattened operator; run flatten_path first")
    n, G = problem.rank, problem.conditions[0].target_rank
    PG = target_projection if target_projection is not None else problem.projections[0]
    fam = rotate_family(problem, target_projection)
    B0 = problem.conditions[0].jets[0]

    def boundary(phi):
        c, s = _cs(float(phi))
        cond = BoundaryCondition([hstack(c * B0, s * MatrixSymbol.identity(G))])
        return [cond], [PG]

    params = np.linspace(0.0, np.pi / 2, steps)
    start = _stabilized(problem, G, PG)
    conds, projs = boundary(np.pi / 2)
    end_op = operator_from_family(fam, np.pi / 2, 1, n + G)
    end = BvpProblem(problem.manifold, end_op, conds, projs, name="rotated")
    path = HomotopyPath("rotate", params, fam, boundary, problem.manifold, 1, n + G, start, end,
                        meta={"target_rank": G})
    return path, (certify_path(path) if certify else None)


def _stabilized(problem: BvpProblem, G: int, PG) -> BvpProblem:
    """``(D + D_+ on C^G, [B, 0])``: the rotation's starting point."""
    op = problem.operator
    dplus = MatrixSymbol(lambda x, t, xi, lam, absxi: 1j * np.asarray(absxi)[..., None, None]
                         * np.eye(G), G, G, 1)
    new = CollarOperator([MatrixSymbol.identity(op.rank + G), block_diag(op.coefficients[1], dplus)],
                         normalize=False)
    B0 = problem.conditions[0].jets[0]
    cond = BoundaryCondition([hstack(B0, MatrixSymbol.zeros(B0.rows, G))])
    return BvpProblem(problem.manifold, new, [cond], [PG], name="stabilized")


# ---------------------------------------------------------------------------
# Reduction to spectral form
# ---------------------------------------------------------------------------

def reduce_to_spectral(problem: BvpProblem, steps: int = DEFAULT_STEPS):
    """Flatten, then rotate; the endpoint is ``(-i d/dt - i|xi|(2P - 1), P w|_X = g)``.

    Returns ``(spectral_problem, certificate, paths)``.
    """
    if problem.order != 1:
        raise OrderError("reduce_to_spectral needs a first-order problem")
    if _is_model_spectral(problem):
        path = HomotopyPath("to-spectral", np.zeros(1), flatten_family(problem.operator),
                            lambda s: (list(problem.conditions), list(problem.projections)),
                            problem.manifold, 1, problem.rank, problem)
        return problem, certify_path(path), [path]
    paths = []
    current = problem
    certs = []
    if not is_flat(problem.operator):
        fpath, fcert = flatten_path(problem, steps)
        paths.append(fpath)
        certs.append(fcert)
        current = BvpProblem(problem.manifold,
                             operator_from_family(fpath.family, 1.0, 1, problem.rank),
                             list(problem.conditions), list(problem.projections), name="flattened")
    rpath, rcert = rotate_path(current, steps=steps)
    paths.append(rpath)
    certs.append(rcert)
    end = rpath.end
    n, G = problem.rank, problem.conditions[0].target_rank
    PG = end.projections[0] if end.projections[0] is not None else MatrixSymbol.identity(G)
    Phat = block_diag(MatrixSymbol.zeros(n, n), PG)
    A = MatrixSymbol(lambda x, t, xi, lam, absxi: -1j * np.asarray(absxi)[..., None, None]
                     * (2 * np.asarray(Phat._func(x, t, xi, lam, absxi)) - np.eye(n + G)),
                     n + G, n + G, 1)
    op = CollarOperator([MatrixSymbol.identity(n + G), A], normalize=False)
    spectral = BvpProblem(problem.manifold, op, [BoundaryCondition([MatrixSymbol.identity(n + G)])],
                          [Phat], name="spectral")
    cert = _merge_certificates(certs)
    return spectral, cert, paths


def _is_model_spectral(problem):
    P = problem.projections[0]
    cond = problem.conditions[0]
    if P is None or cond.target_rank != problem.rank or not is_flat(problem.operator):
        return False
    x = np.linspace(0, 2 * np.pi, 7)
    A = _tangential(problem.operator)
    for xi in (1.0, -1.0):
        Pv = P(x, 0.0, xi)
        Av = np.broadcast_to(A(x, np.zeros_like(x), np.full_like(x, xi), np.ones_like(x)), Pv.shape)
        if not np.allclose(Av, 2 * Pv - np.eye(problem.rank), atol=1e-10):
            return False
        if not np.allclose(cond.matrix(x, xi), np.eye(problem.rank), atol=1e-14):
            return False
    return True


def _merge_certificates(certs):
    params = np.concatenate([c.params + k for k, c in enumerate(certs)])
    failure = next((c.failure for c in certs if c.failure is not None), None)
    return PathCertificate(params, np.concatenate([c.interior_margin for c in certs]),
                           np.concatenate([c.boundary_margin for c in certs]),
                           np.concatenate([c.max_angle for c in certs]),
                           "valid" if failure is None else "invalid", failure)


# ---------------------------------------------------------------------------
# Collar pullback
# ---------------------------------------------------------------------------

def default_cutoff(t):
    """Equal to 1 on [0, 0.1] and to 0 on [0.4, oo)."""
    return 1.0 - smooth_step((np.asarray(t, dtype=float) - 0.1) / 0.3)


def _check_cutoff(psi):
    near = np.linspace(0.0, 0.05, 11)
    far = np.linspace(0.5, 1.0, 11)
    if not np.allclose(psi(near), 1.0, atol=1e-12):
        raise InvalidCutoffError("cutoff must equal 1 near t = 0")
    if not np.allclose(psi(far), 0.0, atol=1e-12):
        raise InvalidCutoffError("cutoff must vanish for t >= 1/2")


def collar_pull(path: HomotopyPath, tau: float, psi: Optional[Callable] = None) -> BvpProblem:
    """Coefficients ``D(t - psi(t) tau)``, with negative collar times running along the path.

    Collar time ``-s`` carries the path at normalized parameter ``s``; at
    ``tau = 1`` the operator at ``t = 0`` is the endpoint operator and the
    boundary data are those of the endpoint.
    """
    psi = default_cutoff if psi is None else psi
    _check_cutoff(psi)
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    base = path.start
    if tau == 0.0:
        return base
    scale = float(path.params[-1])
    base_coeffs = base.operator
    fam = path.family
    m, n = path.order, path.rank
    if base_coeffs.order != m or base_coeffs.rank != n:
        raise CapabilityError("path start does not match the family shape")
    base_arr = base_coeffs.coefficient_array

    def coeff(k):
        def f(x, t, xi, lam, absxi):
            shape = _grid_shape(x, t, xi, absxi)
            tt = np.broadcast_to(np.asarray(t, dtype=float), shape)
            shifted = tt - np.asarray(psi(tt)) * tau
            s = np.clip(-shifted, 0.0, 1.0) * scale
            inside = base_arr(x, np.maximum(shifted, 0.0), xi, absxi)
            along = fam(s, x, np.zeros(shape), xi, absxi)
            inside = np.broadcast_to(inside, shape + inside.shape[-3:])
            along = np.broadcast_to(along, shape + along.shape[-3:])
            return np.where((shifted < 0)[..., None, None, None], along, inside)[..., k, :, :]
        return MatrixSymbol(f, n, n, k)

    op = CollarOperator([MatrixSymbol.identity(n)] + [coeff(k) for k in range(1, m + 1)],
                        normalize=False)
    conds, projs = path.boundary(tau * scale) if tau < 1.0 or path.end is None else (
        list(path.end.conditions), list(path.end.projections))
    conds = list(conds)
    projs = list(projs)
    if base.manifold.n_collars == 2:
        conds = conds[:1] + list(base.conditions[1:])
        projs = projs[:1] + list(base.projections[1:])
    return BvpProblem(base.manifold, op, conds, projs, name=f"collar-pulled@{tau:.3g}")


# ---------------------------------------------------------------------------
# Order reduction
# ---------------------------------------------------------------------------

def _basis_constants(m):
    """``C[j, k]`` = coefficient of ``lam^(m-j)`` in ``(lam - 1)^k (lam + 1)^(m-k)``."""
    C = np.zeros((m + 1, m + 1))
    for k in range(m + 1):
        poly = np.polynomial.polynomial.polymul(
            np.polynomial.polynomial.polypow([-1.0, 1.0], k),
            np.polynomial.polynomial.polypow([1.0, 1.0], m - k))
        for j in range(m + 1):
            C[j, k] = poly[m - j]
    return C


def _spow(c0, k):
    """Ascending coefficients of ``(lam + c0)^k`` (batched in c0)."""
    c0 = np.asarray(c0)
    return np.stack([comb(k, j) * c0 ** (k - j) for j in range(k + 1)], axis=-1)


def _smul(p, q):
    out = np.zeros(np.broadcast_shapes(p.shape[:-1], q.shape[:-1]) + (p.shape[-1] + q.shape[-1] - 1,),
                   dtype=complex)
    for i in range(p.shape[-1]):
        for j in range(q.shape[-1]):
            out[..., i + j] += p[..., i] * q[..., j]
    return out


def _mpoly(M, s):
    """Constant matrix times scalar polynomial: ``(..., d+1, a, b)``."""
    return s[..., :, None, None] * M[..., None, :, :]


@dataclass
class OrderReductionTrace:
    order: int
    rank: int
    decomposition: Callable  # (x, t, xi, absxi) -> (..., m+1, n, n)
    family: Callable  # (tau, x, t, xi, absxi) -> big polynomial coefficients
    boundary_decomposition: Callable
    samples: list
    coefficient_sum_residual: float
    factorization_residual: float
    boundary_residual: float
    lu_factors: tuple
    rank_plus: list = field(default_factory=list)
    pr_angles: list = field(default_factory=list)
    factored: bool = False

    def to_dict(self):
        return {"order": self.order, "rank": self.rank,
                "coefficient_sum_residual": self.coefficient_sum_residual,
                "factorization_residual": self.factorization_residual,
                "boundary_residual": self.boundary_residual,
                "rank_plus": [int(r) for r in self.rank_plus], "factored": self.factored,
                "max_pr_angle": float(max(self.pr_angles)) if self.pr_angles else 0.0}


class OrderReducer:
    """Decomposition and tau-family for a collar operator of order ``m >= 2``."""

    def __init__(self, op: CollarOperator):
        self.op = op
        self.m = op.order
        self.n = op.rank
        self.Cinv = np.linalg.inv(_basis_constants(self.m))
        self.Cbinv = np.linalg.inv(_basis_constants(self.m - 1)[::-1, :])

    def decomposition(self, x, t, xi, absxi):
        """``frakD_k`` with ``D(lam) = sum_k frakD_k (lam - i|xi|)^k (lam + i|xi|)^(m-k)``."""
        m = self.m
        D = self.op.coefficient_array(x, t, xi, absxi)
        z = 1j * np.asarray(absxi, dtype=float)
        scaled = np.stack([D[..., j, :, :] / (z ** j)[..., None, None] if j else D[..., j, :, :]
                           for j in range(m + 1)], axis=-3)
        return np.einsum("kj,...jab->...kab", self.Cinv, scaled)

    def factored_through_dplus(self, x, t, xi, absxi, tol: float = 1e-12) -> bool:
        """Whether ``D = D' D_+^(m-1)`` with ``D'`` of order one (``frakD_k = 0`` for k >= 2)."""
        dec = self.decomposition(x, t, xi, absxi)
        return bool(np.abs(dec[..., 2:, :, :]).max(initial=0.0) <= tol)

    def big_polynomial(self, tau, x, t, xi, absxi):
        """Ascending lam-coefficients of ``D'_tau``: shape ``(..., m+1, m n, m n)``."""
        m, n = self.m, self.n
        dec = self.decomposition(x, t, xi, absxi)
        D = self.op.coefficient_array(x, t, xi, absxi)
        shape = _grid_shape(tau, dec[..., 0, 0, 0])
        z = 1j * np.broadcast_to(np.asarray(absxi, dtype=float), shape)
        tau = np.broadcast_to(np.asarray(tau, dtype=float), shape)
        dec = np.broadcast_to(dec, shape + dec.shape[-3:])
        Dp = _spow(z, m)  # D+^m
        Dpm1 = _spow(z, m - 1)
        Dm = _spow(-z, 1)
        DmDp = _smul(Dm, Dpm1)
        Dpoly = np.zeros(shape + (m + 1, n, n), dtype=complex)
        for k in range(m + 1):
            Dpoly[..., m - k, :, :] = D[..., k, :, :]
        eye = np.eye(n)
        big = np.zeros(shape + (m + 1, m * n, m * n), dtype=complex)
        tt = tau[..., None, None, None]
        big[..., :, :n, :n] = Dpoly + tt ** m * (_mpoly(dec[..., 0, :, :], Dp) - Dpoly)
        for j in range(1, m):
            big[..., :, :n, j * n:(j + 1) * n] += tt ** (m - j) * _mpoly(dec[..., j, :, :], Dp)
        big[..., :, :n, (m - 1) * n:] += tt * _mpoly(dec[..., m, :, :], DmDp)
        for j in range(1, m):
            big[..., :, j * n:(j + 1) * n, (j - 1) * n:j * n] = -tt * _mpoly(np.broadcast_to(eye, shape + (n, n)), DmDp)
            big[..., :, j * n:(j + 1) * n, j * n:(j + 1) * n] = _mpoly(np.broadcast_to(eye, shape + (n, n)), Dp)
        return big

    def normalized_family(self, tau, x, t, xi, absxi):
        """Collar coefficients of ``D_tau`` (leading coefficient inverted)."""
        big = self.big_polynomial(tau, x, t, xi, absxi)
        m = self.m
        lead = big[..., m, :, :]
        return np.stack([np.linalg.solve(lead, big[..., m - k, :, :]) for k in range(m + 1)], axis=-3)

    def first_order_factor(self, x, t, xi, absxi):
        """``F(lam)`` with ``D'_1 = F(lam) (lam + i|xi|)^(m-1)``: ascending ``(..., 2, mn, mn)``."""
        m, n = self.m, self.n
        dec = self.decomposition(x, t, xi, absxi)
        shape = dec.shape[:-3]
        z = 1j * np.broadcast_to(np.asarray(absxi, dtype=float), shape)
        Dp = _spow(z, 1)
        Dm = _spow(-z, 1)
        eye = np.broadcast_to(np.eye(n), shape + (n, n))
        F = np.zeros(shape + (2, m * n, m * n), dtype=complex)
        for j in range(m):
            F[..., :, :n, j * n:(j + 1) * n] = _mpoly(dec[..., j, :, :], Dp)
        F[..., :, :n, (m - 1) * n:] += _mpoly(dec[..., m, :, :], Dm)
        for j in range(1, m):
            F[..., :, j * n:(j + 1) * n, (j - 1) * n:j * n] = -_mpoly(eye, Dm)
            F[..., :, j * n:(j + 1) * n, j * n:(j + 1) * n] = _mpoly(eye, Dp)
        return F

    def boundary_decomposition(self, cond: BoundaryCondition, x, xi, absxi):
        """``b_k`` with ``B(lam) = sum_k b_k (lam - i|xi|)^k (lam + i|xi|)^(m-1-k)``."""
        m = self.m
        z = 1j * np.asarray(absxi, dtype=float)
        Bj = [j(x, 0.0, xi, 0.0, absxi) for j in cond.jets]
        scaled = np.stack([Bj[j] / (z ** (m - 1 - j))[..., None, None] for j in range(m)], axis=-3)
        return np.einsum("kj,...jab->...kab", self.Cbinv, scaled)


def reduce_order(problem: BvpProblem, steps: int = DEFAULT_STEPS, certify: bool = True):
    """Stabilize by ``D_+^m`` copies and deform to a first-order problem composed with ``D_+^(m-1)``.

    Returns ``(first_order_problem, trace, certificate, path)``; for ``m = 1``
    the input is returned with an empty trace.
    """
    m, n = problem.order, problem.rank
    if m <= 1:
        return problem, None, None, None
    if problem.manifold.n_collars != 1:
        raise CapabilityError("order reduction is implemented on single-boundary models")
    if problem.manifold.dimension != 2:
        raise CapabilityError("order reduction needs a tangential covariable")
    red = OrderReducer(problem.operator)
    cond = problem.conditions[0]
    G = cond.target_rank
    proj = problem.projections[0]

    def family(tau, x, t, xi, absxi):
        return red.normalized_family(tau, x, t, xi, absxi)

    stab_jets = [hstack(b, MatrixSymbol.zeros(G, (m - 1) * n)) for b in cond.jets]
    stab_cond = BoundaryCondition(stab_jets)

    def boundary(tau):
        return [stab_cond], [proj]

    params = np.linspace(0.0, 1.0, steps)
    start_op = operator_from_family(family, 0.0, m, m * n)
    start = BvpProblem(problem.manifold, start_op, [stab_cond], [proj], name="stabilized")
    path = HomotopyPath("order-reduce", params, family, boundary, problem.manifold, m, m * n,
                        start, meta={"input_order": m})

    # samples at |xi| = 1 for the identities
    xs = 2 * np.pi * np.arange(8) / 8
    pts = [(x, xi) for x in xs for xi in (1.0, -1.0)]
    X = np.array([p[0] for p in pts])
    XI = np.array([p[1] for p in pts])
    A1 = np.ones_like(X)
    dec = red.decomposition(X, 0.0 * X, XI, A1)
    sum_res = float(np.abs(dec.sum(axis=-3) - np.eye(n)).max())
    big1 = red.big_polynomial(1.0, X, 0.0 * X, XI, A1)
    F = red.first_order_factor(X, 0.0 * X, XI, A1)
    Dpm1 = _spow(1j * A1, m - 1)
    prod = np.zeros_like(big1)
    for i in range(2):
        for j in range(m):
            prod[..., i + j, :, :] += F[..., i, :, :] * Dpm1[..., j, None, None]
    scale = max(1.0, float(np.abs(big1).max()))
    fact_res = float(np.abs(prod - big1).max()) / scale
    b = red.boundary_decomposition(cond, X, XI, A1)
    Bpoly = np.zeros((len(X), m, G, n), dtype=complex)
    for k in range(m):
        e = _smul(_spow(-1j * A1, k), _spow(1j * A1, m - 1 - k))
        Bpoly += e[..., :, None, None] * b[..., k, None, :, :]
    Bj = np.stack([j(X, 0.0, XI, 0.0, A1) for j in cond.jets], axis=-3)
    bnd_res = float(np.abs(Bpoly - Bj).max()) if G else 0.0
    lead = big1[0, m]
    lu = scipy.linalg.lu(lead)

    # first-order endpoint problem (F, B')
    def f_coeff(x, t, xi, lam, absxi):
        Fv = red.first_order_factor(x, t, xi, absxi)
        return np.linalg.solve(Fv[..., 1, :, :], Fv[..., 0, :, :])

    def bprime(x, t, xi, lam, absxi):
        bv = red.boundary_decomposition(cond, x, xi, absxi)
        return np.concatenate([bv[..., k, :, :] for k in range(m)], axis=-1)

    lead_F = MatrixSymbol(lambda x, t, xi, lam, absxi: red.first_order_factor(x, t, xi, absxi)[..., 1, :, :],
                          m * n, m * n, 0)
    first = BvpProblem(problem.manifold,
                       CollarOperator([MatrixSymbol.identity(m * n), MatrixSymbol(f_coeff, m * n, m * n, 1)],
                                      normalize=False),
                       [BoundaryCondition([MatrixSymbol(bprime, G, m * n, 0)])], [proj], name="first-order",
                       meta={"leading_coefficient": lead_F})

    trace = OrderReductionTrace(m, n, red.decomposition, red.big_polynomial,
                                red.boundary_decomposition, pts, sum_res, fact_res, bnd_res, lu,
                                factored=red.factored_through_dplus(X, 0.0 * X, XI, A1))
    # L+ of D_tau projects isomorphically onto L+ of D
    for tau in params:
        ranks, angles = [], []
        for x, xi in pts[:4]:
            plus_D, _ = bounded_subspaces(companion_matrix(problem.operator, x, xi), TOL_ROOT, x, xi)
            coeffs = family(tau, np.float64(x), np.float64(0.0), np.float64(xi), np.float64(1.0))
            plus_T, _ = bounded_subspaces(companion_from_coefficients(coeffs), TOL_ROOT, x, xi)
            ranks.append(plus_T.rank == plus_D.rank)
            idx = np.concatenate([np.arange(j * m * n, j * m * n + n) for j in range(m)])
            pr = plus_T.columns[idx]
            if plus_D.rank:
                angles.append(float(np.max(scipy.linalg.subspace_angles(pr, plus_D.columns))))
        trace.rank_plus.append(plus_T.rank if all(ranks) else -1)
        trace.pr_angles.append(max(angles) if angles else 0.0)
    cert = certify_path(path) if certify else None
    return first, trace, cert, path
