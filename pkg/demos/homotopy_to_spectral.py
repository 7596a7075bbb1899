"""Deform elliptic problems to spectral form and watch the index stay put.

The Cauchy-Riemann operator admits no local elliptic condition, so it is
rejected up front.  The Laplacian with Dirichlet data is reduced to a
first-order system, flattened, and rotated onto a spectral condition.
"""
from pathlib import Path

import numpy as np

from bvpindex.boundary import ab_obstruction
from bvpindex.errors import CannotRotateError
from bvpindex.homotopy import reduce_order, reduce_to_spectral, rotate_path
from bvpindex.index import numeric_index
from bvpindex.io import load_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"

cr = load_problem(PROBLEMS / "cauchy_riemann.json")
obs = ab_obstruction(cr.operator)
print(f"Cauchy-Riemann: rank L+ = {obs.rank_plus}, obstruction {obs.obstruction} -> {obs.verdict}")
try:
    rotate_path(cr, steps=3)
except CannotRotateError as exc:
    print("  rotation refused:", exc)

lap = load_problem(PROBLEMS / "laplace_disk.json")
first, trace, cert, _ = reduce_order(lap, steps=21)
print(f"\nLaplace on the disk, order {lap.order} -> {first.order}, rank {lap.rank} -> {first.rank}")
print(f"  factored through D+: {trace.factored}, certificate valid: {cert.valid}")
print(f"  min boundary margin along the path: {np.min(cert.boundary_margin):.3f}")

spec, cert, paths = reduce_to_spectral(first, steps=21)
print(f"  spectral form reached via {[p.kind for p in paths]}, valid: {cert.valid}")
for label, prob in (("second order", lap), ("first order", first), ("spectral", spec)):
    rep = numeric_index(prob)
    print(f"  index ({label:12s}) = {rep.index}  [{rep.verdict}]")
