"""Finite-dimensional realizations of boundary value problems.

On the Interval the full system is assembled in a Chebyshev basis:
interior equations are collocated at ``n - m`` first-kind points and the
boundary jets add one row per condition.

On the two-dimensional models the interior coefficients must not depend
on ``x``; each Fourier mode then carries an ODE in ``t`` that is solved
exactly (up to the integrator), and the problem reduces to the boundary
map on the space of interior solutions.  Since the interior operator is
surjective with kernel of dimension ``m * rank`` per mode on a finite
cylinder, this reduced map has the same index as the full problem.

* Cylinder / Annulus: ``t in [0, 1]``; the solution space of each mode is
  propagated as the graph ``{(w(0), w(1))}`` of jets, re-orthonormalized
  after every step so both growing and decaying solutions stay resolved.
* Disk: the punctured disk is the half-infinite cylinder ``t = -log r``;
  admissible solutions are those bounded as ``t -> oo`` (roots with
  ``Im lam > 0``, plus semisimple zero roots, i.e. functions regular at the
  centre).  This needs ``t``-independent coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from numpy.polynomial import chebyshev

from . import fourier
from .errors import CapabilityError, EllipticityMarginError
from .spectral import range_basis
from .symbols import BvpProblem, CollarOperator

TOL_ZERO_ROOT = 1e-9


@dataclass
class DiscreteOperator:
    """Rectangular matrix with row/column bookkeeping.

    ``row_low`` / ``col_low`` are the compressions of the projector onto
    Fourier modes ``|n| <= N/2`` to the row/column coordinates; they are
    used to tell genuine kernel vectors from truncation ghosts.  They are
    ``None`` when there is no Fourier direction.
    """

    matrix: np.ndarray
    row_labels: list
    col_labels: list
    resolution: dict
    kind: str
    row_low: Optional[np.ndarray] = None
    col_low: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        r, c = self.matrix.shape
        if len(self.row_labels) != r or len(self.col_labels) != c:
            raise ValueError("label counts do not match the matrix shape")

    @property
    def shape(self):
        return self.matrix.shape

    def row_counts(self):
        out = {}
        for lab in self.row_labels:
            out[lab[0]] = out.get(lab[0], 0) + 1
        return out


def discretize_bvp(problem: BvpProblem, resolution: int) -> DiscreteOperator:
    """Assemble the finite system for ``problem`` at ``resolution``.

    ``resolution`` is the number of Chebyshev coefficients on the Interval
    and the Fourier cutoff ``N`` (modes ``|n| <= N``) otherwise.
    """
    kind = problem.manifold.kind
    if kind == "Interval":
        return _interval_system(problem, int(resolution))
    if problem.operator.rank and not problem.operator.is_x_independent():
        raise CapabilityError("interior coefficients depending on x are not supported on "
                              f"{kind}; only boundary data may vary along the boundary")
    if kind in ("Cylinder", "Annulus"):
        return _reduced_system(problem, int(resolution), _cylinder_jets)
    if kind == "Disk":
        if not problem.operator.is_t_independent():
            raise CapabilityError("Disk problems need t-independent collar coefficients")
        return _reduced_system(problem, int(resolution), _disk_jets)
    raise CapabilityError(f"unsupported manifold {kind}")


# ---------------------------------------------------------------------------
# Interval
# ---------------------------------------------------------------------------

def _cheb_derivative(n):
    """Matrix of d/dt on coefficients of T_k(2t - 1), k < n."""
    D = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        d = chebyshev.chebder(e) * 2.0
        D[:len(d), k] = d
    return D


def _interval_system(problem: BvpProblem, n: int) -> DiscreteOperator:
    op = problem.operator
    m, r = op.order, op.rank
    if n < m + 2:
        raise CapabilityError(f"resolution {n} too small for order {m}")
    Dt = _cheb_derivative(n)
    # (-i d/dt)^j on coefficients
    powers = [np.linalg.matrix_power(-1j * Dt, j) for j in range(m + 1)]
    k = np.arange(n - m)
    pts = 0.5 * (1.0 + np.cos((2 * k + 1) * np.pi / (2 * (n - m)))) if n > m else np.zeros(0)
    V = chebyshev.chebvander(2 * pts - 1, n - 1)
    coeffs = op.coefficient_array(0.0, pts, 0.0, 0.0) if pts.size else np.zeros((0, m + 1, r, r))
    rows = []
    for p in range(len(pts)):
        block = np.zeros((r, n * r), dtype=complex)
        for kk in range(m + 1):
            vals = V[p] @ powers[m - kk]  # row over coefficients
            block += np.kron(vals[None, :], coeffs[p, kk])
        rows.append(block)
    labels = [("interior", p, g) for p in range(len(pts)) for g in range(r)]

    def jets_at(s, sign):
        v = chebyshev.chebvander(np.array([2 * s - 1.0]), n - 1)[0]
        return [np.kron((v @ powers[j])[None, :], np.eye(r)) * sign ** j for j in range(max(m, 1))]

    for comp, (s, sign) in enumerate(((0.0, 1), (1.0, -1))):
        cond = problem.conditions[comp]
        if cond.target_rank == 0:
            continue
        jets = jets_at(s, sign)
        B = sum(cond.jets[j](0.0, 0.0, 0.0, 0.0, 0.0) @ jets[j] for j in range(min(len(jets), len(cond.jets))))
        rows.append(B)
        labels += [("boundary", comp, g) for g in range(cond.target_rank)]
    A = np.vstack(rows) if rows else np.zeros((0, n * r), dtype=complex)
    norms = np.linalg.norm(A, axis=1)
    A = A / np.where(norms > 0, norms, 1.0)[:, None]
    cols = [("coef", kk, c) for kk in range(n) for c in range(r)]
    return DiscreteOperator(A, labels, cols, {"chebyshev": n}, "full")


# ---------------------------------------------------------------------------
# Fourier reductions
# ---------------------------------------------------------------------------

def companion_batch(coeffs: np.ndarray) -> np.ndarray:
    """Companion matrices for a stack ``(..., m+1, n, n)`` of normalized coefficients."""
    m = coeffs.shape[-3] - 1
    n = coeffs.shape[-1]
    C = np.zeros(coeffs.shape[:-3] + (m * n, m * n), dtype=complex)
    for j in range(m - 1):
        C[..., j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = np.eye(n)
    for j in range(m):
        C[..., (m - 1) * n:, j * n:(j + 1) * n] = -coeffs[..., m - j, :, :]
    return C


def _mode_coefficients(op: CollarOperator, N: int, t):
    n = fourier.modes(N).astype(float)
    t = np.asarray(t, dtype=float)
    return op.coefficient_array(0.0, t[..., None], n, fourier.bracket(n))


def _cylinder_jets(op: CollarOperator, N: int):
    """Per-mode graph bases: arrays (M, m r, m r) of jets at t = 0 and t = 1."""
    m, r = op.order, op.rank
    M = 2 * N + 1
    d = m * r
    steps = max(64, 4 * N)
    h = 1.0 / steps
    Y0 = np.broadcast_to(np.eye(d, dtype=complex), (M, d, d)).copy()
    Y1 = Y0.copy()
    if op.is_t_independent():
        C = companion_batch(_mode_coefficients(op, N, 0.0))
        Phis = [scipy.linalg.expm(1j * h * C)] * steps
    else:
        g = 0.5 / np.sqrt(3.0)
        Phis = []
        for s in range(steps):
            t1, t2 = (s + 0.5 - g) * h, (s + 0.5 + g) * h
            A1 = 1j * companion_batch(_mode_coefficients(op, N, t1))
            A2 = 1j * companion_batch(_mode_coefficients(op, N, t2))
            Om = 0.5 * h * (A1 + A2) + (np.sqrt(3.0) / 12.0) * h * h * (A2 @ A1 - A1 @ A2)
            Phis.append(scipy.linalg.expm(Om))
    for Phi in Phis:
        Y1 = Phi @ Y1
        Q, _ = np.linalg.qr(np.concatenate([Y0, Y1], axis=1))
        Y0, Y1 = Q[:, :d], Q[:, d:]
    sign = np.repeat((-1.0) ** np.arange(m), r)
    far = Y1 * sign[None, :, None]
    return [Y0, far], [d] * M


def bounded_halfline_frame(C: np.ndarray, tol: float = TOL_ZERO_ROOT) -> np.ndarray:
    """Jets of solutions bounded on [0, oo): roots with Im > 0 plus semisimple zero roots."""
    ev = np.linalg.eigvals(C)
    near_real = ev[np.abs(ev.imag) <= tol]
    if np.any(np.abs(near_real) > tol):
        bad = near_real[np.abs(near_real) > tol][0]
        raise EllipticityMarginError(f"real nonzero root {bad:.3g}", eigenvalue=complex(bad))
    _, Z, k = scipy.linalg.schur(C, output="complex", sort=lambda z: z.imag > tol)
    cols = [Z[:, :k]]
    if near_real.size:
        cols.append(scipy.linalg.null_space(C, rcond=1e-10))
    F = np.hstack(cols)
    if F.shape[1] == 0:
        return F
    u, s, _ = np.linalg.svd(F, full_matrices=False)
    return u[:, s > 1e-10 * s[0]]


def _disk_jets(op: CollarOperator, N: int):
    C = companion_batch(_mode_coefficients(op, N, 0.0))
    frames = [bounded_halfline_frame(c) for c in C]
    return [frames], [f.shape[1] for f in frames]


def _weighted_frames(ends, bracket, m, r):
    """Re-base every mode's solutions to be orthonormal in the ``<n>``-weighted jet norm.

    Jet component ``j`` scales like ``<n>^j``; without the weights the
    singular values of higher-order problems drift with the resolution.
    """
    out = [list(e) for e in ends]
    for k, b in enumerate(bracket):
        if out[0][k].shape[1] == 0:
            continue
        w = np.repeat(b ** -np.arange(m, dtype=float), r)
        _, R = np.linalg.qr(np.vstack([w[:, None] * e[k] for e in ends]))
        Rinv = np.linalg.inv(R)
        for e in out:
            e[k] = e[k] @ Rinv
    return out


def _row_weights(cond, N, bracket):
    """``<n>^-d`` per data row, ``d`` the largest ``degree(B_j) + j`` that acts on the row."""
    M, G = 2 * N + 1, cond.target_rank
    orders = np.zeros(G)
    for j, Bj in enumerate(cond.jets):
        active = np.abs(Bj.quantize(N)).reshape(M, G, -1).max(axis=(0, 2)) > 0
        orders = np.where(active, np.maximum(orders, Bj.degree + j), orders)
    return (bracket[:, None] ** -orders[None, :]).ravel()


def _block_diag_frames(frames):
    return scipy.linalg.block_diag(*frames) if frames else np.zeros((0, 0))


def _reduced_system(problem: BvpProblem, N: int, jets_fn) -> DiscreteOperator:
    op = problem.operator
    m, r = op.order, op.rank
    M = 2 * N + 1
    modes = fourier.modes(N)
    low = np.abs(modes) <= N / 2
    if m == 0:
        ends, counts = [[np.zeros((0, 0))] * M] * problem.manifold.n_collars, [0] * M
    else:
        ends, counts = jets_fn(op, N)
    bracket = fourier.bracket(modes.astype(float))
    if m > 1:
        ends = _weighted_frames(ends, bracket, m, r)
    col_modes = np.repeat(modes, counts)
    col_labels = [("solution", int(n), j) for n, c in zip(modes, counts) for j in range(c)]
    ncols = len(col_labels)
    rows, row_labels, lows = [], [], []
    for comp in range(problem.manifold.n_collars):
        cond = problem.conditions[comp]
        G = cond.target_rank
        if G == 0:
            continue
        if m == 0:
            R = np.zeros((M * G, 0), dtype=complex)
        else:
            per_mode = ends[comp] if comp < len(ends) else ends[0]
            J = _block_diag_frames(list(per_mode))  # (M m r, ncols), mode-major jets
            J = J.reshape(M, m, r, ncols)
            R = np.zeros((M * G, ncols), dtype=complex)
            for j in range(m):
                R += cond.jets[j].quantize(N) @ J[:, j].reshape(M * r, ncols)
        proj = problem.projections[comp]
        if m > 1 and proj is None:
            R = _row_weights(cond, N, bracket)[:, None] * R
        row_low_full = np.repeat(low, G).astype(float)
        if proj is not None:
            Pq = proj.quantize(N)
            Q, _ = range_basis(Pq)
            R = Q.conj().T @ Pq @ R
            lows.append((Q.conj().T * row_low_full[None, :]) @ Q)
            row_labels += [("boundary", comp, "projected", i) for i in range(Q.shape[1])]
        else:
            lows.append(np.diag(row_low_full))
            row_labels += [("boundary", comp, int(n), g) for n in modes for g in range(G)]
        rows.append(R)
    A = np.vstack(rows) if rows else np.zeros((0, ncols), dtype=complex)
    row_low = scipy.linalg.block_diag(*lows) if lows else np.zeros((0, 0))
    col_low = np.diag((np.abs(col_modes) <= N / 2).astype(float))
    return DiscreteOperator(A, row_labels, col_labels, {"fourier": N}, "boundary-map",
                            row_low, col_low, meta={"solutions_per_mode": counts})
