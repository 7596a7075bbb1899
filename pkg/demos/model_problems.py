"""Ellipticity and numeric index of the bundled example problems.

Run from the repository root:

    python3 demos/model_problems.py
"""
from pathlib import Path

from bvpindex.boundary import sl_check
from bvpindex.index import numeric_index
from bvpindex.io import load_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def describe(name):
    prob = load_problem(PROBLEMS / f"{name}.json")
    ell = sl_check(prob) if prob.manifold.dimension == 2 else None
    rep = numeric_index(prob, check=False)
    line = f"{name:30s} {prob.manifold.kind:9s}"
    if ell is not None:
        line += f" SL {ell.verdict:14s} margin {ell.global_min:7.3f}"
    else:
        line += " " * 37
    line += f"  ker {rep.dim_ker}  coker {rep.dim_coker}  index {rep.index}  ({rep.verdict})"
    print(line)


if __name__ == "__main__":
    for name in ("dpm_cylinder", "dpm_disk", "laplace_disk", "laplace_interval_neumann",
                 "cauchy_riemann_aps", "cauchy_riemann_aps_modified", "cr_pair_pullback",
                 "dminus_removed_modes"):
        describe(name)
