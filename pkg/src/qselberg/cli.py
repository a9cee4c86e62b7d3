"""Command-line front end: ``qselberg {eval,matrix,integral,verify}``.

Results go to stdout as JSON, diagnostics to stderr.  Exit codes: 0 success,
1 verification failure, 2 parse error, 3 geometry (coincident points),
4 non-generic parameters, 5 convergence, 6 lattice pole.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import gauss, interp, jackson, verify
from .errors import (ConditionViolated, Degenerate, DivisionByZero, NearCoincident, NonGeneric, NotConverged,
                     ParseError, PoleHit, QSelbergError)
from .gauss import ClassicalParams
from .qcore import Params, carray, sample_generic, to_pair

EXIT_FAIL, EXIT_PARSE, EXIT_GEOMETRY, EXIT_GENERIC, EXIT_CONVERGENCE, EXIT_POLE = 1, 2, 3, 4, 5, 6
PARAM_KEYS = ("q", "t", "tau", "qalpha", "alpha", "a1", "a2", "b1", "b2")
GAUGE = "phi_at_xi_normalized"


def parse_complex(text) -> complex:
    """'1.5', '1+2j', '[1, 2]' or a JSON pair."""
    if isinstance(text, (list, tuple)):
        if len(text) != 2:
            raise ParseError(f"complex pair must have two entries, got {text!r}")
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float, complex)):
        return complex(text)
    s = str(text).strip()
    if s.startswith("["):
        try:
            return parse_complex(json.loads(s))
        except json.JSONDecodeError as e:
            raise ParseError(f"bad complex pair {s!r}") from e
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError as e:
        raise ParseError(f"bad complex number {s!r}") from e


def parse_vector(text) -> tuple:
    """Comma-separated complex numbers, or a JSON list of numbers/pairs."""
    if isinstance(text, (list, tuple)):
        return tuple(parse_complex(v) for v in text)
    s = str(text).strip()
    if s.startswith("["):
        try:
            return parse_vector(json.loads(s))
        except json.JSONDecodeError as e:
            raise ParseError(f"bad vector {s!r}") from e
    if not s:
        return ()
    return tuple(parse_complex(tok) for tok in s.split(","))


def load_config(path) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read config {path}: {e}") from e
    if not isinstance(cfg, dict):
        raise ParseError("config file must hold a JSON object")
    return cfg


def merged(args, cfg: dict, key: str, default=None):
    """Flag value if given, else config value, else default (flags override the file)."""
    v = getattr(args, key, None)
    if v is not None:
        return v
    return cfg.get(key, default)


def params_from(args, cfg: dict, n: int, sampler=None) -> Params:
    """Params from flags and config, or a seeded random draw when none are given."""
    raw = dict(cfg.get("params", {}))
    for k in PARAM_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            raw[k] = v
    if not raw:
        rng = np.random.default_rng(merged(args, cfg, "seed", 0))
        return (sampler or sample_generic)(rng, n)
    if "n" not in raw or args.n is not None:
        raw["n"] = n
    missing = [k for k in ("q", "a1", "a2", "b1", "b2") if k not in raw]
    if "t" not in raw and "tau" not in raw:
        missing.append("t (or tau)")
    if "qalpha" not in raw and "alpha" not in raw:
        missing.append("qalpha (or alpha)")
    if missing:
        raise ParseError(f"missing parameters: {', '.join(missing)}")
    try:
        data = {}
        for k, v in raw.items():
            if k == "n":
                data[k] = int(v)
            elif k in ("tau", "alpha"):
                data[k] = float(v)
            else:
                data[k] = to_pair(parse_complex(v))
        return Params.from_json(data)
    except (TypeError, ValueError) as e:
        raise ParseError(str(e)) from e


def classical_from(args, cfg: dict, n: int) -> ClassicalParams:
    raw = args.classical if args.classical is not None else cfg.get("classical")
    if raw is None:
        raise ParseError("matrix M needs --classical alpha,beta,gamma,tau,x")
    if isinstance(raw, dict):
        return ClassicalParams.from_json(dict(raw, n=raw.get("n", n)))
    vals = parse_vector(raw)
    if len(vals) != 5:
        raise ParseError(f"--classical needs 5 values alpha,beta,gamma,tau,x, got {len(vals)}")
    return ClassicalParams(*(v.real if v.imag == 0 else v for v in vals), n=n)


def emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# subcommands

def cmd_eval(args, cfg) -> int:
    poly = merged(args, cfg, "poly")
    if not poly:
        raise ParseError("eval needs --poly")
    spec = interp.parse_polyspec(poly)
    z = parse_vector(merged(args, cfg, "z", ""))
    n = len(z)
    p = params_from(args, cfg, n)
    if p.n != n:
        raise ParseError(f"point has {n} coordinates but n={p.n}")
    interp.check_distinct(carray(z))
    val = interp.eval_poly(spec, p, z)
    emit({"value": to_pair(val), "spec": str(spec), "point": [to_pair(v) for v in z], "params": p.to_json()})
    return 0


def cmd_matrix(args, cfg) -> int:
    which = args.which
    order = merged(args, cfg, "order", "ldu").upper()
    n = merged(args, cfg, "n", 1)
    if which == "M":
        cp = classical_from(args, cfg, n)
        F = gauss.build_classical_M(cp, order)
        out = F.to_json()
        out["params"] = cp.to_json()
        if args.check:
            G = gauss.build_classical_M(cp, "UDL" if order == "LDU" else "LDU")
            out["check"] = _check(F, G, cp)
        emit(out)
        return 0
    p = params_from(args, cfg, n)
    gauss.require_generic(p)
    if which in ("R", "A"):
        build = gauss.build_R_factors if which == "R" else gauss.build_A_factors
        F = build(p, order)
        out = F.to_json(p)
        if args.check:
            out["check"] = _check(F, build(p, "UDL" if order == "LDU" else "LDU"), p)
    elif which == "Rinv":
        F = gauss.build_R_inverse(p, order)
        out = F.to_json(p)
    elif which in ("K1", "K2"):
        K = gauss.build_K(p, int(which[1]))
        out = {"matrix": which, "n": p.n, "product": gauss.matrix_to_json(K), "params": p.to_json(),
               "det": to_pair(gauss.det_formula(p, which))}
    else:
        raise ParseError(f"unknown matrix {which!r}")
    emit(out)
    return 0


def _check(F, G, p) -> dict:
    S = np.maximum(verify.chain_scale(*verify.factor_chain(F)), verify.chain_scale(*verify.factor_chain(G)))
    r = verify.matrix_report(f"matrix/{F.name}/ldu-equals-udl", p, F.product(), G.product(), S,
                             verify.TOL_RATIONAL, 0.0)
    return {"other": G.to_json(), "residual": r.relative_residual, "absolute_residual": r.absolute_residual,
            "pass": r.passed}


def cmd_integral(args, cfg) -> int:
    gauge = merged(args, cfg, "gauge", GAUGE)
    if gauge != GAUGE:
        raise ParseError(f"only the {GAUGE!r} gauge is available, got {gauge!r}")
    n = merged(args, cfg, "n", 1)
    p = params_from(args, cfg, n, sampler=verify.sample_integral_params)
    if not jackson.check_convergence(p):
        pc = p.coerced()
        low = abs(pc.q / (pc.a1 * pc.a2 * pc.b1 * pc.b2))
        raise ConditionViolated(
            f"need |q/(a1 a2 b1 b2)| < |q^alpha| < 1 and |q/(a1 a2 b1 b2)| < |q^alpha t^(2n-2)| < 1; "
            f"got {low:.4g}, {abs(pc.qalpha):.4g}, {abs(pc.qalpha * pc.t ** (2 * p.n - 2)):.4g}")
    xi_raw = merged(args, cfg, "xi")
    xi = parse_vector(xi_raw) if xi_raw is not None else \
        jackson.default_xi(p, np.random.default_rng(merged(args, cfg, "seed", 0)))
    if len(xi) != p.n:
        raise ParseError(f"xi has {len(xi)} coordinates but n={p.n}")
    ab = merged(args, cfg, "ab_shift", [0, 0])
    ab = tuple(int(v) for v in (ab.split(",") if isinstance(ab, str) else ab))
    spec = jackson.make_bracket(merged(args, cfg, "poly", "matsuo[0](a1,b2)"), p, xi,
                                alpha_shift=int(merged(args, cfg, "alpha_shift", 0)), ab_shift=ab)
    N = merged(args, cfg, "N", jackson.DEFAULT_RADIUS.get(p.n, 16))
    trunc = jackson.TruncationSpec(N=int(N), tail_tol=float(merged(args, cfg, "tail_tol", 1e-8)))
    res = jackson.bracket(spec, trunc)
    out = res.to_json()
    out.update(poly=str(spec.poly), xi=[to_pair(v) for v in xi], params=p.to_json(),
               alpha_shift=spec.alpha_shift, ab_shift=list(spec.ab_shift))
    emit(out)
    return 0


def cmd_verify(args, cfg) -> int:
    suite = merged(args, cfg, "suite", "all")
    if suite not in verify.SUITES:
        raise ParseError(f"unknown suite {suite!r}; choose from {', '.join(verify.SUITES)}")
    report = verify.run_suite(suite, seeds=int(merged(args, cfg, "seeds", 1)), seed=int(merged(args, cfg, "seed", 0)),
                              n_max=merged(args, cfg, "n_max"), deterministic=bool(args.deterministic
                                                                                    or cfg.get("deterministic")),
                              threads=int(merged(args, cfg, "threads", 1)))
    text = verify.dumps_report(report)
    out_path = merged(args, cfg, "out")
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    sys.stdout.write(text + "\n")
    s = report["summary"]
    print(f"{suite}: {s['passed']}/{s['total']} passed", file=sys.stderr)
    return 0 if s["failed"] == 0 else EXIT_FAIL


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its entries")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--deterministic", action="store_true", help="zero runtimes for byte-identical output")
    common.add_argument("--n", type=int, help="number of integration variables")
    for k in PARAM_KEYS:
        common.add_argument(f"--{k}", help="complex value: 0.3, 1+2j or [re, im]"
                            if k not in ("tau", "alpha") else "real exponent, converted to q^value")

    ap = argparse.ArgumentParser(prog="qselberg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="evaluate a polynomial at a point")
    e.add_argument("--poly", help='e.g. "matsuo[1](a1,b2)" or "etilde[1,0](a1,b2)"')
    e.add_argument("--z", help="comma-separated coordinates")

    m = sub.add_parser("matrix", parents=[common], help="build a coefficient matrix")
    m.add_argument("which", choices=["R", "Rinv", "A", "K1", "K2", "M"])
    m.add_argument("--order", choices=["ldu", "udl", "LDU", "UDL"])
    m.add_argument("--check", action="store_true", help="also build the other decomposition and compare")
    m.add_argument("--classical", help="alpha,beta,gamma,tau,x for the matrix M")

    i = sub.add_parser("integral", parents=[common], help="truncated Jackson integral")
    i.add_argument("--poly")
    i.add_argument("--xi", help="base point, comma-separated")
    i.add_argument("--N", type=int, help="lattice radius")
    i.add_argument("--tail-tol", dest="tail_tol", type=float)
    i.add_argument("--alpha-shift", dest="alpha_shift", type=int)
    i.add_argument("--ab-shift", dest="ab_shift", help="r1,r2 shift counts for the pairs (a1,b1), (a2,b2)")
    i.add_argument("--gauge", help=f"normalisation; only {GAUGE!r}")

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("--suite", choices=list(verify.SUITES))
    v.add_argument("--seeds", type=int)
    v.add_argument("--n-max", dest="n_max", type=int)
    v.add_argument("--out", help="also write the report to this file")
    return ap


COMMANDS = {"eval": cmd_eval, "matrix": cmd_matrix, "integral": cmd_integral, "verify": cmd_verify}


def exit_code(err: Exception) -> int:
    if isinstance(err, ParseError):
        return EXIT_PARSE
    if isinstance(err, NearCoincident):
        return EXIT_GEOMETRY
    if isinstance(err, (NonGeneric, DivisionByZero, Degenerate)):
        return EXIT_GENERIC
    if isinstance(err, (NotConverged, ConditionViolated)):
        return EXIT_CONVERGENCE
    if isinstance(err, PoleHit):
        return EXIT_POLE
    return EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except QSelbergError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        if isinstance(err, NonGeneric) and err.verdict is not None:
            print(json.dumps({"genericity": err.verdict.to_json()}), file=sys.stderr)
        return exit_code(err)


if __name__ == "__main__":
    sys.exit(main())
