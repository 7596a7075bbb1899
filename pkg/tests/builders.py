"""Seeded generators of symbols, conditions and problems for the tests."""
import numpy as np

from bvpindex.boundary import sl_check
from bvpindex.spectral import ProjectionSymbol, finite_rank_modify
from bvpindex.symbols import BoundaryCondition, BvpProblem, CollarOperator, MatrixSymbol, ModelManifold


def cstr(z):
    z = complex(z)
    return f"({z.real:.15g}{z.imag:+.15g}*i)"


def fourier_entry(rng, max_mode=2, terms=2, const=0.0):
    parts = [cstr(const)] if const else []
    for _ in range(terms):
        c = 0.3 * (rng.standard_normal() + 1j * rng.standard_normal())
        k = int(rng.integers(-max_mode, max_mode + 1))
        parts.append(f"{cstr(c)}*exp({k}*i*x)")
    return " + ".join(parts) if parts else "0"


def random_tangential(rng, n, margin=0.5):
    """Matrices A(+1), A(-1) with eigenvalues off the imaginary axis by at least ``margin``."""
    out = []
    for _ in range(2):
        re = rng.uniform(margin, 2.0, n) * rng.choice([-1.0, 1.0], n)
        d = re + 1j * rng.uniform(-1, 1, n)
        S = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        out.append(S @ np.diag(d) @ np.linalg.inv(S))
    return out


def first_order_from_tangential(Ap, Am):
    """Collar operator ``-i d/dt - i A(xi)`` with A(xi) homogeneous of degree one."""
    n = Ap.shape[0]
    odd = (Ap - Am) / 2
    even = (Ap + Am) / 2
    D1 = [[f"{cstr(-1j * odd[a, b])}*xi + {cstr(-1j * even[a, b])}*absxi" for b in range(n)]
          for a in range(n)]
    return CollarOperator([MatrixSymbol.identity(n), MatrixSymbol.from_expr(D1, 1)])


def random_first_order(rng, n=3, margin=0.5):
    Ap, Am = random_tangential(rng, n, margin)
    return first_order_from_tangential(Ap, Am), (Ap, Am)


def random_unobstructed(rng):
    """Rank-2 first-order operator with L+ of rank one at both covector signs."""
    Ap, Am = random_tangential(rng, 2)
    for A in (Ap, Am):
        w, V = np.linalg.eig(A)
        w = np.array([abs(w[0].real) + 1j * w[0].imag, -abs(w[1].real) + 1j * w[1].imag])
        A[:] = V @ np.diag(w) @ np.linalg.inv(V)
    return first_order_from_tangential(Ap, Am)


def random_row(rng, G, n, max_mode=1):
    if G == 0:
        return MatrixSymbol.zeros(0, n)
    return MatrixSymbol.from_expr([[fourier_entry(rng, max_mode, 1, const=rng.standard_normal() + 1.5)
                                    for _ in range(n)] for _ in range(G)])


def random_elliptic_classical(rng, tries=50):
    """First-order rank-2 disk problem with L+ of rank 1 and an SL-elliptic condition."""
    disk = ModelManifold("Disk")
    for _ in range(tries):
        op = random_unobstructed(rng)
        B = BoundaryCondition([random_row(rng, 1, 2)])
        prob = BvpProblem(disk, op, [B], name="random-classical")
        if sl_check(prob).global_min > 1e-2:
            return prob
    raise RuntimeError("no elliptic condition found")


def rank_one_pullback(c, k):
    """Pointwise projection onto (1, c e^{ikx}) / sqrt(1 + |c|^2)."""
    c = complex(c)
    s = 1 + abs(c) ** 2
    return MatrixSymbol.from_expr([
        [f"{1 / s!r}", f"{cstr(c.conjugate() / s)}*exp({-k}*i*x)"],
        [f"{cstr(c / s)}*exp({k}*i*x)", f"{abs(c) ** 2 / s!r}"]])


def cr_pair():
    """Cauchy-Riemann operator plus its conjugate, in collar form on the disk."""
    return CollarOperator([MatrixSymbol.identity(2),
                           MatrixSymbol.from_expr([["-i*xi", "0"], ["0", "i*xi"]], 1)])


def dplus(rank=1):
    return CollarOperator([MatrixSymbol.identity(rank),
                           MatrixSymbol.from_expr([["i*absxi" if a == b else "0" for b in range(rank)]
                                                   for a in range(rank)], 1)])


def dminus(rank=1):
    return CollarOperator([MatrixSymbol.identity(rank),
                           MatrixSymbol.from_expr([["-i*absxi" if a == b else "0" for b in range(rank)]
                                                   for a in range(rank)], 1)])


def laplace(sym="xi**2"):
    return CollarOperator([MatrixSymbol.identity(1), MatrixSymbol.zeros(1, 1, 1),
                           MatrixSymbol.from_expr(sym, 2)])


def random_modified_projection(rng, N=10):
    """Pullback projection with random added/removed vectors; returns (P, net rank change)."""
    base = ProjectionSymbol.pullback(rank_one_pullback(complex(*rng.normal(size=2)), int(rng.integers(-2, 3))))
    P = base.discretize(N)
    mods, net = [], 0
    for _ in range(int(rng.integers(0, 5))):
        w = rng.standard_normal(P.dim) + 1j * rng.standard_normal(P.dim)
        cur = finite_rank_modify(P, mods)
        if rng.random() < 0.5:
            v = (np.eye(P.dim) - cur.matrix) @ w
            mods.append(("+", v / np.linalg.norm(v)))
            net += 1
        else:
            v = cur.matrix @ w
            mods.append(("-", v / np.linalg.norm(v)))
            net -= 1
    return finite_rank_modify(P, mods), net


def row_projection(B):
    """Pointwise orthogonal projection onto the span of ``B(x)^*`` for a one-row condition."""
    def f(x, t, xi, lam, absxi):
        b = np.asarray(B(x, 0.0, 1.0))
        bh = np.conj(np.swapaxes(b, -1, -2))
        return bh @ b / (b @ bh)
    return MatrixSymbol(f, B.cols, B.cols, 0)
