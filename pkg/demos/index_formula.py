"""Index of spectral problems against the d-functional of the projection.

For each projection the numeric index of the problem on the disk is compared
with the value predicted from the d-functional.  Adding modes to the range of
the projection lowers the index; removing them raises it.
"""
from bvpindex.index import verify_index_formula
from bvpindex.spectral import ProjectionSymbol
from bvpindex.symbols import CollarOperator, MatrixSymbol


def collar(coef):
    return CollarOperator([MatrixSymbol.identity(1), MatrixSymbol.from_expr(coef, 1)])


d_plus = collar("i*absxi")      # no bounded solutions
d_minus = collar("-i*absxi")    # every mode has one

cases = [(f"D+ , span of {k} modes", d_plus, ProjectionSymbol.finite(1, range(k))) for k in (0, 1, 3)]
cases += [(f"D- , identity minus {k}", d_minus,
           ProjectionSymbol.identity(1).modified([("-", j) for j in range(k)])) for k in (1, 2, 4)]

print(f"{'problem':26s} {'index':>6s} {'d':>6s} {'rhs':>6s}  equal")
for label, op, P in cases:
    rep = verify_index_formula(op, P)
    print(f"{label:26s} {rep.lhs:6d} {str(rep.d):>6s} {str(rep.rhs):>6s}  {rep.equal}")
