"""Command-line interface.

Every run writes a header carrying the artifact version, the subcommand and
its fully resolved configuration (seed included), so a report can be replayed
from its own header.  Exit codes: 0 success, 1 usage or parse error,
2 falsification found, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from . import classify as cls
from . import embed_gauss, embed_tent, harness
from .funcdsl import GridSpec, ParseError, ValidationError, parse, resolve
from .indices import (DyadicGrid, basis_criterion, cotype, estimate_indices,
                      small_scale_ratio_limit, LN2)
from .mazur import MazurParams, check_mazur_bounds, mazur_map, sphere_pairs
from .space import SparseVector, luxemburg_norm

EXIT_OK, EXIT_USAGE, EXIT_FALSIFIED, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- argument helpers

def _vector(text: str) -> SparseVector:
    """Inline JSON ([[i, v], ...] or {"entries": ...}) or a path to such a file."""
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    try:
        return SparseVector.from_json(json.loads(text))
    except (json.JSONDecodeError, TypeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read vector: {exc}") from exc


def _index(text: str):
    """A number, 'inf', or a bracket 'lo,hi'."""
    parts = [float(s) for s in text.split(",")]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return tuple(parts)
    raise UsageError(f"bad index value {text!r}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "out")}


def _header(args) -> dict:
    return {"artifact": "orlicz", "version": __version__, "command": args.command,
            "config": _jsonable(_config(args)), "seed": getattr(args, "seed", None)}


def _emit(args, payload: dict, rows: Optional[List[list]] = None, columns=None):
    """Write JSON (header + payload) or CSV (commented header + rows)."""
    header = _header(args)
    if args.format == "csv":
        buf = io.StringIO()
        buf.write(f"# {json.dumps(header)}\n")
        w = csv.writer(buf, lineterminator="\n")
        if rows is None:
            columns = ["key", "value"]
            rows = [[k, json.dumps(_jsonable(v))] for k, v in payload.items()]
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
        text = buf.getvalue()
    else:
        text = json.dumps({"header": header, "result": _jsonable(payload)}, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid(args) -> GridSpec:
    return GridSpec(t_max=args.t_max)


def _function(args, spec=None):
    spec = spec if spec is not None else args.fn
    return resolve(spec, _grid(args))


# -- subcommands

def cmd_validate(args) -> int:
    try:
        M = _function(args)
    except ValidationError as exc:
        _emit(args, {"valid": False, "error": str(exc), "report": exc.report.to_dict()})
        return EXIT_FALSIFIED
    payload = {"valid": True, "function": M.describe(), "normalized": M.normalized,
               "ast": parse(args.fn).ast.sexpr() if M.kind == "expr" else None,
               "report": M.validation.to_dict() if M.validation else None}
    _emit(args, payload)
    return EXIT_OK


def cmd_norm(args) -> int:
    M = _function(args)
    x = _vector(args.vec)
    res = luxemburg_norm(M, x)
    _emit(args, {"norm": res.value, "residual": res.residual, "iterations": res.iterations,
                 "function": M.describe()})
    return EXIT_OK


def cmd_indices(args) -> int:
    M = _function(args)
    est = estimate_indices(M, DyadicGrid(args.J))
    payload = est.to_dict()
    payload["cotype"] = cotype(M, est)
    payload["function"] = M.describe()
    if args.format == "csv":
        rows = [["alpha", est.alpha_low, est.alpha_high], ["beta", est.beta_low, est.beta_high]]
        _emit(args, payload, rows, ["index", "low", "high"])
    else:
        payload.pop("trace") if not args.trace else None
        _emit(args, payload)
    return EXIT_OK


def cmd_basis(args) -> int:
    M = _function(args)
    series = basis_criterion(M, args.max_log2_n)
    small = small_scale_ratio_limit(M, args.depth)
    Mn = M.normalize()
    j = np.arange(1, args.depth + 1)
    ratio = np.exp(np.asarray(Mn.log_at(-j * LN2)) + 2 * j * LN2)
    if args.format == "csv":
        rows = [["c_n", k, c] for k, c in zip(series.ns_log2, series.cs)]
        rows += [["M(t)/t^2", -int(k), float(r)] for k, r in zip(j, ratio)]
        _emit(args, {}, rows, ["series", "log2_arg", "value"])
    else:
        _emit(args, {"basis_criterion": series.to_dict(), "small_scale_ratio": small,
                     "ratio_series": {"log2_t": (-j).tolist(), "value": ratio.tolist()},
                     "function": Mn.describe()})
    return EXIT_OK


def cmd_classify(args) -> int:
    if args.space == "lp":
        if args.p is None or args.q is None:
            raise UsageError("classify lp needs --p and --q")
        v = cls.classify_lp(args.p, args.q)
        _emit(args, v.to_dict())
        return EXIT_OK
    if args.beta_n is None and args.fn_n is None:
        raise UsageError("classify orlicz needs --beta-n or --fn-n")
    beta_n = _index(args.beta_n) if args.beta_n is not None else \
        estimate_indices(_function(args, args.fn_n)).beta_bracket
    if args.fn_m is not None:
        rep = cls.classify_with_evidence(_function(args, args.fn_m), beta_n)
        _emit(args, rep.to_dict())
        return EXIT_OK
    if args.beta_m is None:
        raise UsageError("classify orlicz needs --beta-m or --fn-m")
    _emit(args, cls.classify_orlicz(_index(args.beta_m), beta_n).to_dict())
    return EXIT_OK


def _need_p(args):
    if args.p is None:
        raise UsageError(f"{args.command} {args.kind} needs --p")


def _tent_params(args):
    _need_p(args)
    return embed_tent.make_tent_params(_function(args), args.p, q=args.q,
                                       tail_eps=args.tail_eps, t_max=args.t_max)


def _gauss_params(args):
    _need_p(args)
    return embed_gauss.GaussParams(p=args.p, levels=args.levels, d=args.d, radius=args.radius,
                                   K=args.K, eps_trunc=args.eps_trunc)


def _mazur_c_hat(p, q, seed, count=2000):
    pairs = sphere_pairs(p, 8, count, seed=seed + 1)
    return check_mazur_bounds(MazurParams(p, q), pairs).C_hat


def cmd_embed(args) -> int:
    x = _vector(args.vec)
    if args.kind == "tent":
        params = _tent_params(args)
        coords = embed_tent.embed_vector(params, x)
        _emit(args, coords.to_json(),
              [[*k.tolist(), v] for k, v in zip(coords.keys, coords.values)] if args.format == "csv" else None,
              ["i", "n", "k", "value"])
    elif args.kind == "gauss":
        params = _gauss_params(args)
        fv = embed_gauss.stacked_embed(params, x)
        _emit(args, fv.to_json())
    else:
        _need_p(args)
        if args.q is None:
            raise UsageError("embed mazur needs --q")
        y = mazur_map(MazurParams(args.p, args.q), x)
        _emit(args, {"image": y.to_json(), "p": args.p, "q": args.q})
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed
    if args.kind == "tent":
        params = _tent_params(args)
        mod = embed_tent.moduli(params)
        if args.rho1_scale != 1.0:
            mod = mod.with_rho1_scaled(args.rho1_scale)
        emb = harness.TentEmbedding(params, mod)
        plan = harness.SamplePlan("dyadic-sparse", args.pairs, seed, max_support=args.max_support,
                                  scale_range=tuple(args.scale_range))
    elif args.kind == "gauss":
        params = _gauss_params(args)
        c_hat = args.c_hat if args.c_hat is not None else _mazur_c_hat(2.0, args.p, seed)
        emb = harness.GaussEmbedding(params, c_hat)
        ds = tuple(float(d) for d in 2.0 ** np.linspace(args.log2_d[0], args.log2_d[1], args.grid))
        plan = harness.SamplePlan("pairs-at-distance", args.pairs, seed, p=2.0, dim=args.d,
                                  distances=ds, radius=args.radius)
    elif args.kind == "mazur":
        _need_p(args)
        if args.q is None:
            raise UsageError("verify mazur needs --q")
        c_hat = args.c_hat if args.c_hat is not None else _mazur_c_hat(args.p, args.q, seed)
        emb = harness.MazurEmbedding(MazurParams(args.p, args.q), c_hat)
        plan = harness.SamplePlan("sphere", args.pairs, seed, p=args.p, dim=args.d)
    else:
        emb = harness.IdentityEmbedding(2.0 if args.p is None else args.p)
        plan = harness.SamplePlan("dyadic-sparse", args.pairs, seed, max_support=args.max_support,
                                  scale_range=tuple(args.scale_range))
    report = harness.run_distortion(emb, plan)
    payload = report.to_dict(include_pairs=args.records)
    payload["small_distance_check"] = harness.small_distance_check(report, emb.moduli)
    if args.curves_out:
        curves = payload["curves"]
        with open(args.curves_out, "w") as fh:
            w = csv.writer(fh, lineterminator="\n")
            keys = list(curves)
            w.writerow(keys)
            for row in zip(*(curves[k] for k in keys)):
                w.writerow(row)
    if args.format == "csv":
        rows = [list(r) for r in report._rows()]
        _emit(args, payload, rows, ["d_in", "d_out", "rho1", "rho2", "slack_lo", "slack_hi"])
    else:
        _emit(args, payload)
    return report.exit_code


# -- parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--t-max", type=float, default=1e4, dest="t_max",
                        help="upper end of the validation grid")

    p = _Parser(prog="orlicz", description="Orlicz sequence spaces: norms, indices, embeddings.")
    p.add_argument("--version", action="version", version=f"orlicz {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="parse and validate an Orlicz function")
    s.add_argument("--fn", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("norm", parents=[common], help="Luxemburg norm of a sparse vector")
    s.add_argument("--fn", required=True)
    s.add_argument("--vec", required=True, help="JSON [[i, v], ...] or a file path")
    s.set_defaults(func=cmd_norm)

    s = sub.add_parser("indices", parents=[common], help="bracket the indices alpha_M, beta_M")
    s.add_argument("--fn", required=True)
    s.add_argument("--J", type=int, default=DyadicGrid().J)
    s.add_argument("--trace", action="store_true", help="include the bisection trace")
    s.set_defaults(func=cmd_indices)

    s = sub.add_parser("basis-criterion", parents=[common],
                       help="c_n series and the small-scale ratio M(t)/t^2")
    s.add_argument("--fn", required=True)
    s.add_argument("--max-log2-n", type=int, default=960, dest="max_log2_n")
    s.add_argument("--depth", type=int, default=40)
    s.set_defaults(func=cmd_basis)

    s = sub.add_parser("classify", parents=[common], help="embeddability verdicts")
    s.add_argument("space", choices=("lp", "orlicz"))
    s.add_argument("--p", type=float)
    s.add_argument("--q", type=float)
    s.add_argument("--beta-m", dest="beta_m", help="number, inf, or bracket lo,hi")
    s.add_argument("--beta-n", dest="beta_n", help="number, inf, or bracket lo,hi")
    s.add_argument("--fn-m", dest="fn_m", help="function for h_M (indices estimated)")
    s.add_argument("--fn-n", dest="fn_n", help="function for h_N (indices estimated)")
    s.set_defaults(func=cmd_classify)

    emb = _Parser(add_help=False)
    emb.add_argument("kind", choices=("tent", "gauss", "mazur"))
    emb.add_argument("--fn", default="power:1")
    emb.add_argument("--p", type=float, help="target exponent (identity: the l_p of the samples, default 2)")
    emb.add_argument("--q", type=float)
    emb.add_argument("--tail-eps", type=float, default=1e-6, dest="tail_eps")
    emb.add_argument("--levels", type=int, default=12)
    emb.add_argument("--d", type=int, default=4)
    emb.add_argument("--radius", type=float, default=2.0)
    emb.add_argument("--K", type=int, default=None)
    emb.add_argument("--eps-trunc", type=float, default=1e-6, dest="eps_trunc")

    s = sub.add_parser("embed", parents=[common, emb], help="embed one sparse vector")
    s.add_argument("--vec", required=True)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("verify", parents=[common], help="sample the moduli inequalities")
    s.add_argument("kind", choices=("tent", "gauss", "mazur", "identity"))
    for a in emb._actions:
        if a.dest not in ("kind", "help"):
            s._add_action(a)
    s.add_argument("--pairs", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-support", type=int, default=8, dest="max_support")
    s.add_argument("--scale-range", type=int, nargs=2, default=(-10, 10), dest="scale_range")
    s.add_argument("--log2-d", type=float, nargs=2, default=(-12.0, 1.0), dest="log2_d",
                   help="gauss: log2 range of the pair distances")
    s.add_argument("--grid", type=int, default=14, help="gauss: number of pair distances")
    s.add_argument("--c-hat", type=float, default=None, dest="c_hat",
                   help="Mazur lower constant; estimated on a separate sample when omitted")
    s.add_argument("--rho1-scale", type=float, default=1.0, dest="rho1_scale",
                   help="tent: multiply rho1 (to construct a failing check)")
    s.add_argument("--records", action="store_true", help="include per-pair records in JSON")
    s.add_argument("--curves-out", dest="curves_out", help="write empirical moduli curves as CSV")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"orlicz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"orlicz: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"orlicz: invalid function: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"orlicz: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"orlicz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
