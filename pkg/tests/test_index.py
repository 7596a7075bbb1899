import numpy as np
import pytest

from bvpindex.discretize import bounded_halfline_frame, discretize_bvp
from bvpindex.errors import CapabilityError, EllipticityMarginError, ToleranceError
from bvpindex.index import (
    analyze,
    circle_operator_index,
    circle_winding_index,
    cobordism_check,
    extendable_pair,
    numeric_index,
    reduced_winding_data,
    spectral_problem,
    verify_excision,
    verify_index_formula,
)
from bvpindex.spectral import DyadicRational, ProjectionSymbol
from bvpindex.symbols import (
    BoundaryCondition,
    BvpProblem,
    CollarOperator,
    MatrixSymbol,
    ModelManifold,
    direct_sum,
    make_model_operator,
)

from builders import cr_pair, dminus, dplus, fourier_entry, laplace, rank_one_pullback
from oracles import coverage_index, toeplitz_pair_index, unwrap_winding

DISK, CYL, INTERVAL = ModelManifold("Disk"), ModelManifold("Cylinder"), ModelManifold("Interval")


class TestModelIndex:
    @pytest.mark.parametrize("ranks", [(1, 1), (1, 0), (0, 2), (2, 1)])
    def test_cylinder(self, ranks):
        rep = numeric_index(make_model_operator("Dpm", ranks, CYL), (16, 32))
        assert rep.verdict == "stable" and rep.index == 0

    @pytest.mark.parametrize("kind", ["Disk", "Annulus"])
    def test_other_manifolds(self, kind):
        assert numeric_index(make_model_operator("Dpm", (1, 1), ModelManifold(kind))).require() == 0

    def test_dplus_cylinder_has_no_near_rows(self):
        prob = make_model_operator("Dplus", (1, 0), CYL)
        op = discretize_bvp(prob, 8)
        counts = op.row_counts()
        assert counts.get("boundary", 0) == 17  # only the far collar carries conditions
        assert op.shape == (17, 17)

    def test_direct_sum_additive(self):
        a = BvpProblem(DISK, dplus(), [BoundaryCondition([MatrixSymbol.identity(1)])],
                       [ProjectionSymbol.finite(1, [0, 2])])
        b = BvpProblem(DISK, dminus(), [BoundaryCondition([MatrixSymbol.identity(1)])],
                       [ProjectionSymbol.identity(1).modified([("-", 1)])])
        ia, ib = numeric_index(a).require(), numeric_index(b).require()
        assert (ia, ib) == (-2, 1)
        assert numeric_index(direct_sum(a, b)).require() == ia + ib


class TestInterval:
    def test_dirichlet(self):
        prob = BvpProblem(INTERVAL, laplace("0"), [BoundaryCondition.dirichlet(2, 1)] * 2)
        op = discretize_bvp(prob, 16)
        assert op.row_counts() == {"interior": 14, "boundary": 2}
        rep = numeric_index(prob, (16, 24))
        assert (rep.dim_ker, rep.dim_coker, rep.index) == (0, 0, 0)

    def test_neumann(self):
        neu = BoundaryCondition([MatrixSymbol.zeros(1, 1), MatrixSymbol.identity(1)])
        rep = numeric_index(BvpProblem(INTERVAL, laplace("0"), [neu, neu]), (16, 24))
        # kernel: constants; cokernel: the compatibility condition
        assert (rep.dim_ker, rep.dim_coker, rep.index) == (1, 1, 0)

    def test_underdetermined(self):
        cond = BoundaryCondition([MatrixSymbol.identity(1), MatrixSymbol.zeros(1, 1)])
        prob = BvpProblem(INTERVAL, laplace("0"), [cond, BoundaryCondition.empty(2, 1)])
        assert numeric_index(prob, (16, 24)).require() == 1

    def test_resolution_too_small(self):
        with pytest.raises(CapabilityError):
            discretize_bvp(BvpProblem(INTERVAL, laplace("0"), [BoundaryCondition.dirichlet(2, 1)] * 2), 3)


class TestTwoDimensional:
    def test_laplace_disk_dirichlet(self):
        prob = BvpProblem(DISK, laplace(), [BoundaryCondition.dirichlet(2, 1)])
        assert numeric_index(prob).require() == 0

    def test_t_dependent_cylinder(self):
        op = CollarOperator([MatrixSymbol.identity(2), MatrixSymbol.from_expr(
            [["i*absxi*(1 + t)", "0.3*t*absxi"], ["0", "-i*absxi*(2 - t)"]], 1)])
        prob = BvpProblem(CYL, op, [BoundaryCondition.dirichlet(1, 2, [1]), BoundaryCondition.dirichlet(1, 2, [0])])
        assert numeric_index(prob).require() == 0

    def test_boundary_data_may_depend_on_x(self):
        # D- on the disk with condition e^{2ix} u = g: every mode is hit, index 0
        prob = BvpProblem(DISK, dminus(), [BoundaryCondition([MatrixSymbol.from_expr("exp(2*i*x)")])])
        assert numeric_index(prob).require() == 0

    def test_interior_x_dependence_rejected(self):
        op = CollarOperator([MatrixSymbol.identity(1), MatrixSymbol.from_expr("-i*absxi*(2 + cos(x))", 1)])
        with pytest.raises(CapabilityError):
            discretize_bvp(BvpProblem(DISK, op, [BoundaryCondition([MatrixSymbol.identity(1)])]), 8)

    def test_disk_needs_t_independence(self):
        op = CollarOperator([MatrixSymbol.identity(1), MatrixSymbol.from_expr("-i*absxi*(1 + t)", 1)])
        with pytest.raises(CapabilityError):
            discretize_bvp(BvpProblem(DISK, op, [BoundaryCondition([MatrixSymbol.identity(1)])]), 8)

    def test_halfline_frame_real_root(self):
        with pytest.raises(EllipticityMarginError):
            bounded_halfline_frame(np.array([[2.0 + 0j]]))

    def test_halfline_frame_zero_root_is_regular(self):
        assert bounded_halfline_frame(np.zeros((1, 1), dtype=complex)).shape == (1, 1)

    def test_ghost_filter_reports_raw_counts(self):
        prob = BvpProblem(DISK, dplus(), [BoundaryCondition([MatrixSymbol.identity(1)])],
                          [ProjectionSymbol.finite(1, [0])])
        a = analyze(discretize_bvp(prob, 16))
        assert (a.dim_ker, a.dim_coker) == (0, 1)

    def test_slow_decay_needs_refinement(self):
        # winding -1 in the first entry, but the singular values of the
        # missing modes decay only like 1.2^-N
        prob = BvpProblem(DISK, cr_pair(), [BoundaryCondition([MatrixSymbol.from_expr(
            [["1 + 1.2*exp(-1*i*x)", "1"]])])])
        rep = numeric_index(prob)
        assert rep.verdict == "indeterminate" and "decaying" in rep.warnings[-1]
        rep = numeric_index(prob, max_resolution=256)
        assert rep.verdict == "stable" and rep.index == 2 == coverage_index([lambda n: n >= -1, lambda n: n <= 0])
        assert rep.resolutions[-1] > 32

    def test_max_resolution_below_finest(self):
        with pytest.raises(ValueError):
            numeric_index(BvpProblem(DISK, laplace(), [BoundaryCondition.dirichlet(2, 1)]), max_resolution=8)

    def test_not_fredholm_is_indeterminate(self):
        op = CollarOperator([MatrixSymbol.identity(1), MatrixSymbol.from_expr("-i*xi", 1)])
        prob = BvpProblem(DISK, op, [BoundaryCondition([MatrixSymbol.identity(1)])])
        with pytest.warns(UserWarning):
            rep = numeric_index(prob)
        assert rep.index is None
        with pytest.raises((ToleranceError, Exception)):
            rep.require()


class TestWinding:
    @pytest.mark.parametrize("k", [-3, 0, 1, 4])
    def test_scalar(self, k):
        assert circle_winding_index(MatrixSymbol.from_expr(f"exp({k}*i*x)")) == k

    def test_matrix_additive(self):
        rng = np.random.default_rng(5)
        a = MatrixSymbol.from_expr(f"2*exp(2*i*x) + {fourier_entry(rng, 1, 2)}")
        b = MatrixSymbol.from_expr(f"2*exp(-1*i*x) + {fourier_entry(rng, 1, 2)}")
        x = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
        wa, wb = (unwrap_winding(s(x)[:, 0, 0]) for s in (a, b))
        from bvpindex.symbols import block_diag
        assert circle_winding_index(block_diag(a, b)) == wa + wb == 1

    def test_passing_through_zero(self):
        with pytest.raises(ToleranceError):
            circle_winding_index(MatrixSymbol.from_expr("1 + exp(i*x)"))


class TestCircleOperators:
    @pytest.mark.parametrize("kp, km", [(1, 0), (0, 1), (2, -1), (-1, 2), (3, 3)])
    def test_pure_exponentials_match_counting(self, kp, km):
        a_plus = MatrixSymbol.from_expr(f"exp({kp}*i*x)")
        a_minus = MatrixSymbol.from_expr(f"exp({km}*i*x)")
        assert circle_operator_index(a_plus, a_minus) == toeplitz_pair_index(kp, km)

    def test_hardy_pair(self):
        rep = cobordism_check(MatrixSymbol.from_expr("exp(i*x)"), MatrixSymbol.from_expr("1"))
        assert rep.index_formula == -1 and rep.index_oracle == [-1, -1]
        assert not rep.extendable

    def test_extendable_pairs_index_zero(self):
        B = MatrixSymbol.from_expr([["exp(i*x) + 0.3", "0.2"], ["0.1", "exp(-2*i*x)"]])
        rep = cobordism_check(*extendable_pair(B), extendable=True)
        assert rep.index_formula == 0 and rep.verdict == "index zero (extendable)"


class TestExcision:
    def test_winding_data(self):
        prob = BvpProblem(DISK, cr_pair(), [BoundaryCondition([MatrixSymbol.from_expr([["exp(i*x)", "1"]])])])
        assert reduced_winding_data(prob) == (1, 0)

    def test_equal_data_equal_index(self):
        def cond(a, b):
            return BvpProblem(DISK, cr_pair(), [BoundaryCondition([MatrixSymbol.from_expr([[a, b]])])])
        p1 = cond("exp(i*x)", "1")
        p2 = cond("exp(i*x)*(1 + 0.2*cos(x))", "2 + 0.5*exp(i*x)")
        rep = verify_excision(p1, p2)
        assert rep.verdict == "consistent" and rep.indices == (0, 0)

    @pytest.mark.parametrize("k1, k2", [(0, 0), (1, 0), (0, 2), (2, -1)])
    def test_pair_index_matches_counting(self, k1, k2):
        prob = BvpProblem(DISK, cr_pair(), [BoundaryCondition([MatrixSymbol.from_expr(
            [[f"exp({k1}*i*x)", f"exp({k2}*i*x)"]])])])
        # u holomorphic (modes >= 0), v antiholomorphic (modes <= 0)
        expect = coverage_index([lambda n: n >= k1, lambda n: n <= k2])
        assert numeric_index(prob).require() == expect == 1 + k2 - k1


class TestFormula:
    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_dplus_finite(self, k):
        rep = verify_index_formula(dplus(), ProjectionSymbol.finite(1, range(k)))
        assert (rep.lhs, rep.d) == (-k, DyadicRational(k)) and rep.equal

    @pytest.mark.parametrize("k", [1, 2])
    def test_dminus_removed(self, k):
        rep = verify_index_formula(dminus(), ProjectionSymbol.identity(1).modified([("-", j) for j in range(k)]))
        assert rep.lhs == k and rep.equal

    @pytest.mark.parametrize("k", [-1, 0, 2])
    def test_classical_embedding(self, k):
        rep = verify_index_formula(cr_pair(), ProjectionSymbol.pullback(rank_one_pullback(1.0, k)))
        assert rep.lhs == 1 - k and rep.doubled_index == 2 * (1 - k) and rep.d == DyadicRational(0)
        assert rep.equal

    def test_spectral_problem_requires_first_order(self):
        with pytest.raises(CapabilityError):
            spectral_problem(laplace(), ProjectionSymbol.identity(1))
