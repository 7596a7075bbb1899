"""Fourier-collocation helpers on the circle.

Vectors on the circle are stored as Fourier coefficients of modes
``-N..N``; a bundle of rank ``r`` uses mode-major ordering, i.e. entry
``(k, c)`` lives at ``k * r + c`` where ``k`` indexes ``modes(N)``.
"""
from __future__ import annotations

import numpy as np


def modes(N):
    return np.arange(-N, N + 1)


def grid(N):
    """Collocation points matching ``modes(N)``."""
    M = 2 * N + 1
    return 2.0 * np.pi * np.arange(M) / M


def bracket(n):
    """Quantization of |xi| on mode n: an invertible first-order multiplier."""
    return np.sqrt(1.0 + np.asarray(n, dtype=float) ** 2)


def mode_labels(N, rank):
    return np.repeat(modes(N), rank)


def left_quantize(values):
    """Matrix of the operator u -> sum_n b(x, n) u_n e^{inx}, collocated.

    ``values`` has shape (M, M, r_out, r_in): values[j, k] = b(x_j, n_k).
    """
    M = values.shape[0]
    N = (M - 1) // 2
    n = modes(N)
    x = grid(N)
    E = np.exp(1j * np.outer(x, n))  # E[j, k] = e^{i n_k x_j}
    # M[(m,g),(k,c)] = 1/M sum_j conj(E[j,m]) b[j,k,g,c] E[j,k]
    Q = np.einsum("jm,jkgc,jk->mgkc", E.conj(), values, E) / M
    r_out, r_in = values.shape[2], values.shape[3]
    return Q.reshape(M * r_out, M * r_in)


def multiplier(values):
    """Collocation matrix of multiplication by a matrix function of x.

    ``values`` has shape (M, r_out, r_in) with values[j] = a(x_j).
    """
    M = values.shape[0]
    return left_quantize(np.broadcast_to(values[:, None], (M, M) + values.shape[1:]))


def fourier_multiplier(diag_values):
    """Block-diagonal matrix acting mode by mode; diag_values: (M, r_out, r_in)."""
    M, r_out, r_in = diag_values.shape
    out = np.zeros((M * r_out, M * r_in), dtype=complex)
    for k in range(M):
        out[k * r_out:(k + 1) * r_out, k * r_in:(k + 1) * r_in] = diag_values[k]
    return out
