"""Strict reader for problem-definition files (JSON).

A file looks like::

    {
      "name": "cauchy-riemann",
      "manifold": "Disk",
      "order": 1,
      "coefficients": ["1", "-i*xi"],
      "boundary_condition": [{"jets": ["1"]}],
      "projection": [{"type": "spectral", "operator": "xi"}]
    }

``coefficients`` lists ``D_0 .. D_m`` in the inward coordinate of the
first boundary collar; other collars see the reversed operator.  Matrix
entries are expression strings (see :mod:`bvpindex.expr`); a bare string
stands for a 1x1 matrix.  Every object is checked for unknown keys and
errors carry a JSON path such as ``$.boundary_condition[1].jets[0]``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import BvpIndexError, ProblemFileError
from .spectral import ProjectionSymbol
from .symbols import (
    MANIFOLD_KINDS,
    BoundaryCondition,
    BvpProblem,
    CollarOperator,
    MatrixSymbol,
    ModelManifold,
)

TOP_KEYS = {"name", "description", "manifold", "order", "rank", "coefficients", "interior",
            "boundary_condition", "projection"}
REQUIRED = ("manifold", "order", "coefficients", "boundary_condition")
CONDITION_KEYS = {"jets", "dirichlet", "none"}
PROJECTION_TYPES = {
    "spectral": {"operator"},
    "pullback": {"symbol"},
    "identity": set(),
    "zero": set(),
    "complement": {"of"},
}
MOD_KEYS = {"sign", "mode", "component"}


def _fail(loc, msg):
    raise ProblemFileError(msg, loc)


def _check_keys(obj, allowed, loc, required=()):
    if not isinstance(obj, dict):
        _fail(loc, f"expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        _fail(loc, f"unknown field(s) {', '.join(unknown)}")
    for key in required:
        if key not in obj:
            _fail(loc, f"missing required field {key!r}")


def _int(value, loc, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(loc, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(loc, f"must be >= {minimum}")
    return value


def _matrix(entries, loc, degree, shape=None):
    if isinstance(entries, (int, float)) and not isinstance(entries, bool):
        entries = str(entries)
    if isinstance(entries, str):
        entries = [[entries]]
    if not isinstance(entries, list) or not all(isinstance(r, list) for r in entries):
        _fail(loc, "matrix must be an expression string or a list of rows")
    for a, row in enumerate(entries):
        for b, e in enumerate(row):
            if isinstance(e, bool) or not isinstance(e, (str, int, float)):
                _fail(f"{loc}[{a}][{b}]", f"entry must be an expression string, got {e!r}")
    try:
        sym = MatrixSymbol.from_expr([[str(e) for e in row] for row in entries], degree)
    except BvpIndexError as exc:
        _fail(loc, str(exc))
    if shape is not None and sym.shape != tuple(shape):
        _fail(loc, f"shape {sym.shape}, expected {tuple(shape)}")
    return sym


def _condition(obj, loc, order, rank):
    _check_keys(obj, CONDITION_KEYS, loc)
    if len(obj) != 1:
        _fail(loc, "give exactly one of 'jets', 'dirichlet', 'none'")
    jet_count = max(order, 1)
    if "none" in obj:
        if obj["none"] is not True:
            _fail(f"{loc}.none", "must be true")
        return BoundaryCondition.empty(jet_count, rank)
    if "dirichlet" in obj:
        sel = obj["dirichlet"]
        if not isinstance(sel, list):
            _fail(f"{loc}.dirichlet", "expected a list of component indices")
        for k, c in enumerate(sel):
            _int(c, f"{loc}.dirichlet[{k}]", 0)
            if c >= rank:
                _fail(f"{loc}.dirichlet[{k}]", f"component {c} out of range for rank {rank}")
        return BoundaryCondition.dirichlet(jet_count, rank, sel)
    jets = obj["jets"]
    if not isinstance(jets, list) or len(jets) != jet_count:
        _fail(f"{loc}.jets", f"expected a list of {jet_count} jet coefficient(s)")
    syms = [_matrix(j, f"{loc}.jets[{k}]", 0) for k, j in enumerate(jets)]
    G = syms[0].rows
    for k, s in enumerate(syms):
        if s.shape != (G, rank):
            _fail(f"{loc}.jets[{k}]", f"shape {s.shape}, expected {(G, rank)}")
    return BoundaryCondition(syms)


def _modifications(mods, loc, rank):
    if not isinstance(mods, list):
        _fail(loc, "expected a list")
    out = []
    for k, m in enumerate(mods):
        here = f"{loc}[{k}]"
        _check_keys(m, MOD_KEYS, here, required=("sign", "mode"))
        if m["sign"] not in ("+", "-"):
            _fail(f"{here}.sign", "must be '+' or '-'")
        mode = _int(m["mode"], f"{here}.mode")
        comp = _int(m.get("component", 0), f"{here}.component", 0)
        if comp >= rank:
            _fail(f"{here}.component", f"component {comp} out of range for rank {rank}")
        out.append((m["sign"], mode, comp))
    return out


def parse_projection(obj, loc, rank) -> ProjectionSymbol:
    """One projection spec: ``{"type": ..., ..., "modifications": [...]}``."""
    if not isinstance(obj, dict):
        _fail(loc, "expected an object")
    kind = obj.get("type")
    if kind not in PROJECTION_TYPES:
        _fail(f"{loc}.type", f"must be one of {sorted(PROJECTION_TYPES)}")
    _check_keys(obj, PROJECTION_TYPES[kind] | {"type", "modifications"}, loc,
                required=tuple(sorted(PROJECTION_TYPES[kind])))
    try:
        if kind == "spectral":
            P = ProjectionSymbol.spectral(_matrix(obj["operator"], f"{loc}.operator", 1, (rank, rank)))
        elif kind == "pullback":
            p = _matrix(obj["symbol"], f"{loc}.symbol", 0, (rank, rank))
            P = ProjectionSymbol.pullback(p)
            _check_idempotent(P, f"{loc}.symbol")
        elif kind == "identity":
            P = ProjectionSymbol.identity(rank)
        elif kind == "zero":
            P = ProjectionSymbol.finite(rank)
        else:
            P = parse_projection(obj["of"], f"{loc}.of", rank).complement()
        if "modifications" in obj:
            P = P.modified(_modifications(obj["modifications"], f"{loc}.modifications", rank))
    except ProblemFileError:
        raise
    except BvpIndexError as exc:
        _fail(loc, str(exc))
    return P


def _check_idempotent(P, loc, nx=16, tol=1e-10):
    x = 2 * np.pi * np.arange(nx) / nx
    vals = P(x, 0.0, 1.0)
    if np.max(np.abs(vals @ vals - vals)) > tol:
        _fail(loc, "symbol is not a projection")


def parse_problem(data, source: str = "<problem>") -> BvpProblem:
    """Validate a decoded JSON object and build the problem."""
    _check_keys(data, TOP_KEYS, "$", REQUIRED)
    kind = data["manifold"]
    if kind not in MANIFOLD_KINDS:
        _fail("$.manifold", f"must be one of {sorted(MANIFOLD_KINDS)}")
    manifold = ModelManifold(kind)
    order = _int(data["order"], "$.order", 0)
    coeffs = data["coefficients"]
    if not isinstance(coeffs, list) or len(coeffs) != order + 1:
        _fail("$.coefficients", f"expected a list of {order + 1} coefficient matrices D_0..D_{order}")
    syms = [_matrix(c, f"$.coefficients[{k}]", k) for k, c in enumerate(coeffs)]
    rank = syms[0].rows
    if "rank" in data and _int(data["rank"], "$.rank", 0) != rank:
        _fail("$.rank", f"declared rank {data['rank']} but D_0 has {rank} rows")
    for k, s in enumerate(syms):
        if s.shape != (rank, rank):
            _fail(f"$.coefficients[{k}]", f"shape {s.shape}, expected {(rank, rank)}")
    D0 = syms[0](np.linspace(0, 2 * np.pi, 7), np.linspace(0, 1, 7), 1.0)
    if np.min(np.abs(np.linalg.det(D0))) < 1e-12:
        _fail("$.coefficients[0]", "leading coefficient must be invertible")
    interior = None
    if "interior" in data:
        interior = _matrix(data["interior"], "$.interior", order, (rank, rank))
    op = CollarOperator(syms, interior=interior)

    conds = data["boundary_condition"]
    n = manifold.n_collars
    if not isinstance(conds, list) or len(conds) != n:
        _fail("$.boundary_condition", f"{kind} needs a list of {n} condition(s)")
    conditions = [_condition(c, f"$.boundary_condition[{k}]", order, rank) for k, c in enumerate(conds)]

    projections = None
    if "projection" in data:
        projs = data["projection"]
        if not isinstance(projs, list) or len(projs) != n:
            _fail("$.projection", f"expected a list of {n} entries (null for none)")
        projections = []
        for k, p in enumerate(projs):
            if p is None:
                projections.append(None)
                continue
            G = conditions[k].target_rank
            projections.append(parse_projection(p, f"$.projection[{k}]", G))

    name = data.get("name", Path(source).stem)
    if not isinstance(name, str) or not name:
        _fail("$.name", "must be a non-empty string")
    if "description" in data and not isinstance(data["description"], str):
        _fail("$.description", "must be a string")
    try:
        return BvpProblem(manifold, op, conditions, projections, name=name,
                          meta={"source": str(source)})
    except BvpIndexError as exc:
        _fail("$", str(exc))


def load_problem(path) -> BvpProblem:
    """Read and parse a problem file; every failure is a :class:`ProblemFileError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None
    return parse_problem(data, str(path))
