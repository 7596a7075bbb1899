"""Command line front end: ``bvpindex <command> <input> [options]``.

Every command writes ``<name>.report.json`` (and, with ``--trace``,
``<name>.<trace>.csv`` files) into ``--out``.  Exit status is 0 for a
positive verdict, 1 for a negative one and 2 for errors.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .boundary import TOL_ROOT, TOL_SL, ab_obstruction, sl_check
from .errors import BvpIndexError, ProblemFileError
from .homotopy import DEFAULT_STEPS, reduce_order, reduce_to_spectral
from .index import (
    TOL_RANK,
    circle_winding_index,
    cobordism_check,
    extendable_pair,
    numeric_index,
    verify_excision,
    verify_index_formula,
)
from .io import load_problem
from .spectral import DyadicRational, d_value, parity_classify
from .symbols import MatrixSymbol, check_interior_ellipticity, sample_grid

COMMANDS = ("check", "obstruct", "reduce", "spectral", "index", "dfun", "verify")
SUITES = ("excision", "formula", "cobordism")


@dataclass
class RunConfig:
    command: str
    inputs: list
    resolutions: list = field(default_factory=lambda: [16, 32])
    tol_root: float = TOL_ROOT
    tol_sl: float = TOL_SL
    tol_rank: float = TOL_RANK
    tau_steps: int = DEFAULT_STEPS
    seed: int = 0
    out: str = "."
    trace: bool = False
    suite: str = ""
    count: int = 20
    max_resolution: Optional[int] = None

    def __post_init__(self):
        if min(self.tol_root, self.tol_sl, self.tol_rank) <= 0:
            raise ValueError("tolerances must be positive")
        if list(self.resolutions) != sorted(self.resolutions) or len(set(self.resolutions)) != len(self.resolutions):
            raise ValueError("resolutions must be strictly ascending")
        if self.max_resolution is not None and self.max_resolution < self.resolutions[-1]:
            raise ValueError("--max-resolution is below the finest resolution")
        if self.tau_steps < 2:
            raise ValueError("--tau-steps must be at least 2")

    def provenance(self):
        d = asdict(self)
        d.pop("out")
        return d


class Outcome:
    def __init__(self, name, body, ok, traces=None):
        self.name = name
        self.body = body
        self.ok = ok
        self.traces = traces or {}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, (complex, np.complexfloating)):
        return [_jsonable(v.real), _jsonable(v.imag)]
    if isinstance(v, (DyadicRational, Fraction)):
        return str(v)
    return v


def _csv(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _single(cfg):
    if len(cfg.inputs) != 1:
        raise BvpIndexError(f"'{cfg.command}' takes exactly one problem file")
    return load_problem(cfg.inputs[0])


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_check(cfg):
    p = _single(cfg)
    interior = check_interior_ellipticity(p.operator, sample_grid(p.manifold), cfg.tol_root)
    rep = sl_check(p, tol_root=cfg.tol_root, tol_sl=cfg.tol_sl)
    ok = interior.elliptic and rep.elliptic
    body = {"interior": interior.to_dict(),
            "boundary": {k: v for k, v in rep.to_dict().items() if k != "samples"},
            "verdict": "elliptic" if ok else (rep.verdict if interior.elliptic else "not-elliptic")}
    rows = [(s["component"], f"{s['x']:.12e}", f"{s['xi']:+.0f}", f"{s['min_sv']:.12e}",
             " ".join(f"{complex(z):.12g}" for z in s["eigenvalues"])) for s in rep.samples]
    trace = _csv(["component", "x", "xi", "min_singular_value", "eigenvalues"], rows)
    return Outcome(p.name, body, ok, {"sl": trace})


def cmd_obstruct(cfg):
    p = _single(cfg)
    if p.manifold.dimension != 2:
        raise BvpIndexError("the obstruction is defined for circle boundaries")
    comps = [ab_obstruction(p.component_operator(c), tol_root=cfg.tol_root).to_dict()
             for c in range(p.manifold.n_collars)]
    total = sum(abs(c["obstruction"]) for c in comps)
    body = {"components": comps, "obstruction": comps[0]["obstruction"],
            "verdict": comps[0]["verdict"] if total == 0 or len(comps) == 1 else "Atiyah-Bott obstructed"}
    return Outcome(p.name, body, total == 0)


def _index_summary(problem, cfg):
    rep = numeric_index(problem, cfg.resolutions, cfg.tol_rank, check=False,
                        max_resolution=cfg.max_resolution)
    d = rep.to_dict()
    return {k: d[k] for k in ("dim_ker", "dim_coker", "index", "verdict")}


def cmd_reduce(cfg):
    p = _single(cfg)
    first, trace, cert, path = reduce_order(p, cfg.tau_steps)
    body = {"order_in": p.order, "order_out": first.order, "rank_out": first.rank}
    traces = {}
    if trace is None:
        body.update(verdict="already first order", certificate=None, trace=None)
        ok = True
    else:
        ok = cert.valid
        body.update(verdict=cert.verdict, certificate=cert.to_dict(), trace=trace.to_dict())
        traces["path"] = cert.to_csv()
    return Outcome(p.name, body, ok, traces)


def cmd_spectral(cfg):
    p = _single(cfg)
    sp, cert, paths = reduce_to_spectral(p, cfg.tau_steps)
    body = {"verdict": cert.verdict, "certificate": cert.to_dict(),
            "stages": [path.kind for path in paths], "rank_out": sp.rank,
            "index_before": _index_summary(p, cfg), "index_after": _index_summary(sp, cfg)}
    before, after = body["index_before"]["index"], body["index_after"]["index"]
    ok = cert.valid and before is not None and before == after
    return Outcome(p.name, body, ok, {"path": cert.to_csv()})


def cmd_index(cfg):
    p = _single(cfg)
    rep = numeric_index(p, cfg.resolutions, cfg.tol_rank, check=p.manifold.dimension == 2,
                        max_resolution=cfg.max_resolution)
    body = rep.to_dict()
    rows = [(a.resolution.get("fourier", a.resolution.get("chebyshev")), k, f"{s:.12e}")
            for a in rep.analyses for k, s in enumerate(a.singular_values)]
    return Outcome(p.name, body, rep.verdict == "stable",
                   {"singular_values": _csv(["resolution", "k", "sigma"], rows)})


def cmd_dfun(cfg):
    p = _single(cfg)
    if not p.is_spectral:
        raise BvpIndexError("the problem file has no projection")
    N = max(cfg.resolutions)
    comps = []
    for c, P in enumerate(p.projections):
        if P is None:
            continue
        D = P.discretize(N)
        entry = {"component": c, "construction": P.construction, "parity": parity_classify(P),
                 "bundle_rank": D.rank, "dim": D.dim, "range_dim": round(D.trace_rank()),
                 "idempotency_residual": D.idempotency_residual(),
                 "modifications": [list(m) for m in P.modifications], "resolution": N}
        try:
            entry["d"] = d_value(D)
        except BvpIndexError as exc:
            entry["d"], entry["error"] = None, f"{type(exc).__name__}: {exc}"
        comps.append(entry)
    ok = all(e["d"] is not None for e in comps)
    return Outcome(p.name, {"components": comps, "verdict": "defined" if ok else "undefined"}, ok)


def _suite_excision(cfg):
    if len(cfg.inputs) != 2:
        raise BvpIndexError("the excision suite takes two problem files")
    p1, p2 = (load_problem(f) for f in cfg.inputs)
    rep = verify_excision(p1, p2, cfg.resolutions, cfg.max_resolution)
    ok = rep.verdict != "inconsistent"
    return Outcome(f"{p1.name}.{p2.name}.excision", rep.to_dict(), ok)


def _suite_formula(cfg):
    p = _single(cfg)
    if p.projections[0] is None or p.manifold.n_collars != 1:
        raise BvpIndexError("the formula suite needs a single-boundary problem with a projection")
    rep = verify_index_formula(p.operator, p.projections[0], cfg.resolutions, p.manifold)
    body = dict(rep.to_dict(), verdict="holds" if rep.equal else "fails")
    return Outcome(f"{p.name}.formula", body, rep.equal)


def random_loop_symbol(rng, rank=2, terms=3, max_mode=2):
    """Random matrix Fourier polynomial in ``x`` with a dominant diagonal winding part."""
    entries = []
    for a in range(rank):
        row = []
        for b in range(rank):
            parts = []
            if a == b:
                k = int(rng.integers(-max_mode, max_mode + 1))
                parts.append(f"exp({k}*i*x)")
            for _ in range(terms):
                c = 0.1 * (rng.standard_normal() + 1j * rng.standard_normal())
                k = int(rng.integers(-max_mode, max_mode + 1))
                parts.append(f"({c.real:.6f}{c.imag:+.6f}*i)*exp({k}*i*x)")
            row.append(" + ".join(parts))
        entries.append(row)
    return MatrixSymbol.from_expr(entries)


def _suite_cobordism(cfg):
    if cfg.inputs:
        raise BvpIndexError("the cobordism suite is generated from --seed and takes no files")
    rng = np.random.default_rng(cfg.seed)
    cases = []
    ok = True
    hardy = cobordism_check(MatrixSymbol.from_expr("exp(i*x)"), MatrixSymbol.from_expr("1"),
                            cfg.resolutions, extendable=False)
    cases.append({"case": "hardy", **hardy.to_dict()})
    ok &= hardy.index_formula == -1
    made = 0
    while made < cfg.count:
        B = random_loop_symbol(rng)
        try:
            circle_winding_index(lambda x, B=B: np.linalg.det(B(x)))
        except BvpIndexError:
            continue  # det B passes too close to zero; draw again
        a_plus, a_minus = extendable_pair(B)
        rep = cobordism_check(a_plus, a_minus, cfg.resolutions, extendable=True)
        cases.append({"case": f"extendable-{made}", "boundary_symbol": B.source, **rep.to_dict()})
        ok &= rep.index_formula == 0
        made += 1
    return Outcome("cobordism", {"cases": cases, "verdict": "pass" if ok else "fail"}, ok)


def cmd_verify(cfg):
    return {"excision": _suite_excision, "formula": _suite_formula,
            "cobordism": _suite_cobordism}[cfg.suite](cfg)


HANDLERS = {"check": cmd_check, "obstruct": cmd_obstruct, "reduce": cmd_reduce,
            "spectral": cmd_spectral, "index": cmd_index, "dfun": cmd_dfun, "verify": cmd_verify}


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _resolutions(text):
    try:
        vals = [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad resolution list {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("resolutions must be positive integers")
    return vals


def build_parser():
    ap = argparse.ArgumentParser(prog="bvpindex", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bvpindex {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--resolution", type=_resolutions, default=[16, 32],
                       help="ascending resolutions, e.g. '16,32' (default: 16,32)")
        p.add_argument("--max-resolution", type=int, default=None,
                       help="double the finest resolution up to this cap until the index is stable")
        p.add_argument("--tau-steps", type=int, default=DEFAULT_STEPS, help="homotopy steps")
        p.add_argument("--tol-root", type=float, default=TOL_ROOT, help="margin of roots off the real axis")
        p.add_argument("--tol-sl", type=float, default=TOL_SL, help="boundary symbol singular value margin")
        p.add_argument("--tol-rank", type=float, default=TOL_RANK, help="relative rank threshold")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--trace", action="store_true", help="also write CSV traces")

    helps = {"check": "interior and Shapiro-Lopatinskii ellipticity",
             "obstruct": "Atiyah-Bott obstruction",
             "reduce": "homotopy to a first-order problem",
             "spectral": "homotopy to spectral form",
             "index": "numeric Fredholm index",
             "dfun": "d-functional of the projections"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("input", help="problem-definition JSON file")
        common(p)
    p = sub.add_parser("verify", help="excision, index-formula and cobordism suites")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("inputs", nargs="*", help="problem files (excision: two, formula: one)")
    p.add_argument("--count", type=int, default=20, help="random cases for the cobordism suite")
    common(p)
    return ap


def write_outputs(outcome, cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"tool": "bvpindex", "version": __version__, "config": cfg.provenance(),
              "name": outcome.name, "ok": outcome.ok, "result": outcome.body}
    path = out / f"{outcome.name}.report.json"
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    written = [path]
    if cfg.trace:
        for key, text in sorted(outcome.traces.items()):
            tp = out / f"{outcome.name}.{key}.csv"
            tp.write_text(text)
            written.append(tp)
    return written


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status."""
    try:
        outcome = HANDLERS[cfg.command](cfg)
    except ProblemFileError as exc:
        print(f"bvpindex: error in problem file: {exc}", file=sys.stderr)
        return 2
    except BvpIndexError as exc:
        print(f"bvpindex: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything unexpected is still an error, not a verdict
        print(f"bvpindex: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for path in write_outputs(outcome, cfg):
        print(path)
    verdict = outcome.body.get("verdict", "")
    print(f"{cfg.command}: {verdict}" if verdict else cfg.command)
    return 0 if outcome.ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    inputs = args.inputs if args.command == "verify" else [args.input]
    try:
        cfg = RunConfig(args.command, inputs, args.resolution, args.tol_root, args.tol_sl,
                        args.tol_rank, args.tau_steps, args.seed, args.out, args.trace,
                        getattr(args, "suite", ""), getattr(args, "count", 20), args.max_resolution)
    except ValueError as exc:
        print(f"bvpindex: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
