"""Command-line entry point: ``weylwalk <subcommand> [flags]``.

Exit codes: 0 success, 1 validation error, 2 failed check.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import acceptance
from .errors import (
    ConfigParseError,
    GapViolation,
    HessianMismatch,
    UnknownSubcommand,
    WeylWalkError,
)
from .experiments import NsConfig, ns_curve, sigma_rho_invariance, tail_bound_check
from .gauss import lclt_sup_error, lclt_tv_error
from .hodge import covariance
from .measures import generator_measure, lazy_uniform, noised_pair, power, powers
from .network import build_network
from .transfer import SpectralScanConfig, hessian_check, spectral_scan
from .weyl import BUILTIN_NAMES, Group, build_group, resolve_group, spec_from_dict
from .zm import lazy_simple_walk, pair_tv

SUBCOMMANDS = (
    "group-info", "convolve", "covariance", "hessian-check", "spectral-scan", "lclt-study",
    "ns-curve", "sigma-invariance", "zm-study", "tail-check", "selftest",
)

# config-file keys and the types they must have
CONFIG_FIELDS = {
    "group": (str, dict), "lazy": (int, float, str), "rho": (int, float, list), "n": (int, list),
    "probs": (dict,), "out": (str,), "seed": (int,), "jobs": (int,), "exact": (bool,),
    "mode": (str,), "samples": (int,), "delta": (int, float), "grid": (int,), "radius": (int,),
    "r": (list,), "allow_rho_zero": (bool,), "only": (list,), "no_timestamp": (bool,),
}


class _ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ValidationError(message)


def _floats(text: str) -> list[float]:
    return [float(Fraction(x)) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _probs(text: str) -> dict[str, float]:
    out = {}
    for item in text.split(","):
        name, _, val = item.partition("=")
        if not val:
            raise argparse.ArgumentTypeError(f"expected name=weight, got {item!r}")
        out[name.strip()] = float(Fraction(val))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weylwalk", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--group", help=f"built-in name {BUILTIN_NAMES} or spec file path")
    common.add_argument("--lazy", type=Fraction, help="mass at the identity, e.g. 1/3")
    common.add_argument("--probs", type=_probs, help="per-generator weights, e.g. s1=0.5,s2=0.2")
    common.add_argument("--rho", type=_floats, help="noise parameter(s), comma separated")
    common.add_argument("--n", type=_ints, help="walk length(s), comma separated")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--no-timestamp", action="store_true", default=None)

    sub.add_parser("group-info", parents=[common]).add_argument("--radius", type=int)
    p = sub.add_parser("convolve", parents=[common])
    p.add_argument("--exact", action="store_true", default=None)
    sub.add_parser("covariance", parents=[common])
    sub.add_parser("hessian-check", parents=[common])
    p = sub.add_parser("spectral-scan", parents=[common])
    p.add_argument("--delta", type=float)
    p.add_argument("--grid", type=int)
    sub.add_parser("lclt-study", parents=[common])
    p = sub.add_parser("ns-curve", parents=[common])
    p.add_argument("--mode", choices=("exact", "monte-carlo"))
    p.add_argument("--samples", type=int)
    p.add_argument("--allow-rho-zero", action="store_true", default=None)
    sub.add_parser("sigma-invariance", parents=[common])
    sub.add_parser("zm-study", parents=[common])
    sub.add_parser("tail-check", parents=[common]).add_argument("--r", type=_ints)
    sub.add_parser("selftest", parents=[common]).add_argument("--only", type=_ints)
    return parser


DEFAULTS = {
    "group": "A1", "lazy": Fraction(1, 3), "rho": None, "n": None, "probs": None, "out": None, "seed": 0,
    "jobs": 1, "exact": False, "mode": "exact", "samples": 100_000, "delta": 0.05, "grid": 64,
    "radius": 3, "r": None, "allow_rho_zero": False, "only": None, "no_timestamp": False,
}


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a JSON object", line=1)
    lines = text.splitlines()
    for key, val in data.items():
        line = next((i + 1 for i, s in enumerate(lines) if f'"{key}"' in s), None)
        if key not in CONFIG_FIELDS:
            raise ConfigParseError("unknown field", line=line, field=key)
        if isinstance(val, bool) and bool not in CONFIG_FIELDS[key]:
            raise ConfigParseError("wrong type", line=line, field=key)
        if not isinstance(val, CONFIG_FIELDS[key]):
            raise ConfigParseError(f"expected {'/'.join(t.__name__ for t in CONFIG_FIELDS[key])}",
                                   line=line, field=key)
    for key in ("rho", "n"):
        if key in data and not isinstance(data[key], list):
            data[key] = [data[key]]
    if "lazy" in data:
        try:
            data["lazy"] = Fraction(str(data["lazy"]))
        except ValueError as exc:
            line = next((i + 1 for i, s in enumerate(lines) if '"lazy"' in s), None)
            raise ConfigParseError(str(exc), line=line, field="lazy") from exc
    return data


def resolve_options(args) -> dict:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        opts.update(load_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    seed = opts["seed"]
    if not 0 <= int(seed) < 2**64:
        raise _ValidationError("seed must be a 64-bit unsigned integer")
    if opts["jobs"] < 1:
        raise _ValidationError("jobs must be positive")
    return opts


def _group(opts) -> Group:
    g = opts["group"]
    if isinstance(g, dict):
        return build_group(spec_from_dict(g))
    return resolve_group(g)


def _measure(group: Group, opts):
    """Step measure; on a product of a group with itself this is ``pi^rho`` (rho defaults to 1)."""
    lazy = opts["lazy"] if opts["exact"] else float(opts["lazy"])
    if group.factors is not None and group.factors[0] is group.factors[1]:
        base = group.factors[0]
        mu = generator_measure(base, opts["probs"], lazy=lazy) if opts["probs"] else lazy_uniform(base, lazy)
        rho = (opts["rho"] or [1.0])[0]
        return noised_pair(mu, rho, group)
    if opts["probs"]:
        return generator_measure(group, opts["probs"], lazy=lazy)
    return lazy_uniform(group, lazy, exact=opts["exact"])


def _fmt(x) -> str:
    return f"{x:.17g}" if isinstance(x, float) else str(x)


def _emit(opts, text: str, *, json_payload: dict | None = None) -> None:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if json_payload is not None:
        payload = dict(json_payload)
        if not opts["no_timestamp"]:
            payload = {"generated": stamp, **payload}
        text = json.dumps(payload, indent=2, default=_json_default) + "\n"
    elif not opts["no_timestamp"]:
        text = f"# generated {stamp}\n" + text
    if opts["out"]:
        Path(opts["out"]).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    raise TypeError(type(x))


# -- subcommands ----------------------------------------------------------------

def cmd_group_info(opts) -> int:
    g = _group(opts)
    w, t, _ = g.ball_arrays(opts["radius"])
    _emit(opts, "", json_payload={
        "name": g.name, "rank": g.m, "weyl_order": g.order, "covolume": g.covolume,
        "generators": [str(x) for x in g.generators()], "generator_names": g.gen_names,
        "radius": opts["radius"], "ball_size": int(len(w)),
    })
    return 0


def cmd_convolve(opts) -> int:
    g = _group(opts)
    n = (opts["n"] or [1])[0]
    _emit(opts, power(_measure(g, opts), n).to_csv())
    return 0


def cmd_covariance(opts) -> int:
    g = _group(opts)
    _emit(opts, covariance(build_network(g, _measure(g, opts))).to_csv())
    return 0


def cmd_hessian_check(opts) -> int:
    g = _group(opts)
    net = build_network(g, _measure(g, opts))
    rep = hessian_check(net, covariance(net), raise_on_fail=False)
    ok = rep.rel_error < 1e-4
    _emit(opts, "", json_payload={
        "hessian": rep.hessian, "expected": rep.expected, "rel_error": rep.rel_error,
        "max_first_derivative": rep.max_first, "max_third_derivative": rep.max_third,
        "step": rep.step, "richardson": rep.richardson, "passed": ok,
    })
    if not ok:
        raise HessianMismatch(f"relative error {rep.rel_error:.3g}")
    return 0


def cmd_spectral_scan(opts) -> int:
    g = _group(opts)
    cfg = SpectralScanConfig(delta=opts["delta"], grid=opts["grid"])
    res = spectral_scan(build_network(g, _measure(g, opts)), cfg, raise_on_violation=False)
    _emit(opts, res.to_csv())
    if res.max_abs >= 1 - 1e-12:
        raise GapViolation(f"|lambda| = {res.max_abs:.15g} at {res.argmax}")
    return 0


def cmd_lclt_study(opts) -> int:
    g = _group(opts)
    mu = _measure(g, opts)
    sigma = covariance(build_network(g, mu))
    lines = ["n,sup_error,tv_error,sup_normalized,tv_normalized"]
    for n, mu_n in powers(mu, opts["n"] or acceptance.LCLT_NS):
        sup = lclt_sup_error(g, mu, sigma, n, mu_n=mu_n)
        tv = lclt_tv_error(g, mu, sigma, n, mu_n=mu_n)
        lines.append(",".join(_fmt(x) for x in (
            n, sup, tv, sup * n ** ((g.m + 1) / 2), tv * math.sqrt(n) / math.log(n) ** (g.m / 2))))
    _emit(opts, "\n".join(lines) + "\n")
    return 0


def cmd_ns_curve(opts) -> int:
    group = opts["group"]
    if not isinstance(group, str):
        raise _ValidationError("ns-curve needs a built-in group name or spec path")
    cfg = NsConfig(
        group=group, lazy=float(opts["lazy"]), rhos=tuple(opts["rho"] or (0.1, 0.3, 1.0)),
        ns=tuple(opts["n"] or (32, 64, 128, 256)), mode=opts["mode"], samples=opts["samples"],
        seed=opts["seed"], probs=opts["probs"], allow_rho_zero=opts["allow_rho_zero"],
        jobs=opts["jobs"],
    )
    res = ns_curve(cfg)
    text = res.to_csv()
    # wall time is not reproducible; drop it from the byte-stable output
    rows = [",".join(line.split(",")[:-1]) for line in text.splitlines()]
    _emit(opts, "\n".join(rows) + "\n")
    return 0


def cmd_sigma_invariance(opts) -> int:
    g = _group(opts)
    lazy = float(opts["lazy"])
    mu = lazy_uniform(g, lazy) if not opts["probs"] else generator_measure(g, opts["probs"], lazy=lazy)
    rhos = opts["rho"] or (0.1, 0.25, 0.5, 0.75, 1.0)
    dev, mats = sigma_rho_invariance(g, mu, rhos)
    ok = dev < 1e-10
    _emit(opts, "", json_payload={"max_deviation": dev, "passed": ok,
                                  "sigma_rho": {str(k): v for k, v in mats.items()}})
    return 0 if ok else 2


def cmd_zm_study(opts) -> int:
    lazy = float(opts["lazy"]) if "lazy" in opts.get("_explicit", ()) else 0.5
    mu = lazy_simple_walk(lazy)
    lines = ["rho,n,tv"]
    for n in opts["n"] or [2000]:
        for rho in opts["rho"] or [0.01, 0.1, 0.5, 0.99, 1.0]:
            lines.append(f"{_fmt(float(rho))},{n},{_fmt(pair_tv(mu, rho, n))}")
    _emit(opts, "\n".join(lines) + "\n")
    return 0


def cmd_tail_check(opts) -> int:
    g = _group(opts)
    n = (opts["n"] or [400])[0]
    tc = tail_bound_check(g, _measure(g, opts), n, opts["r"])
    _emit(opts, tc.to_csv())
    return 0


def cmd_selftest(opts) -> int:
    results = acceptance.run_all(opts["only"])
    for r in results:
        print(r.line(), file=sys.stderr)
    _emit(opts, "", json_payload=json.loads(acceptance.summary_json(results)))
    return 0 if all(r.passed for r in results) else 2


HANDLERS = {
    "group-info": cmd_group_info, "convolve": cmd_convolve, "covariance": cmd_covariance,
    "hessian-check": cmd_hessian_check, "spectral-scan": cmd_spectral_scan,
    "lclt-study": cmd_lclt_study, "ns-curve": cmd_ns_curve,
    "sigma-invariance": cmd_sigma_invariance, "zm-study": cmd_zm_study,
    "tail-check": cmd_tail_check, "selftest": cmd_selftest,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
            raise UnknownSubcommand(f"unknown subcommand {argv[0]!r}; choose from {', '.join(SUBCOMMANDS)}")
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UnknownSubcommand("no subcommand given")
        opts = resolve_options(args)
        opts["_explicit"] = {k for k in DEFAULTS if getattr(args, k, None) is not None}
        if args.config:
            opts["_explicit"] |= set(load_config(args.config))
        return HANDLERS[args.command](opts)
    except (HessianMismatch, GapViolation) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
    except (WeylWalkError, _ValidationError, ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
