"""Command line front end.

Exit codes: 0 when the requested checks pass (or the command is purely
descriptive), 1 when a verification ran to completion and failed, 2 on bad
usage, bad input files, or out-of-range configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bumps import EpsilonSpec, OrliczSpec, m_entropy, m_orlicz
from .errors import ConfigError, FileFormatError
from .grid import ROOT, GridFunction, load_grid_function, require_weight
from .lab import (
    MAX_RESOLUTION_ENV,
    TrialConfig,
    VERSION,
    _draw_weight,
    ainf_lemma_sweep,
    corollary_experiment,
    domination_random_suite,
    fs_random_suite,
    main_theorem_experiment,
    maximal_comparison,
    replay_random_suite,
    resolution_cap,
    trial_rng,
)
from .sparse import (
    SparseCollection,
    carleson_check,
    cz_stopping_collection,
    split_eight,
    strong_sparseness_check,
)
from .svgplot import emit_svg
from .weights import dyadic_maximal, rho_all

WEIGHT_FAMILY_HELP = (
    "weight: a family spec drawn per run (power:<s>, a1gen, random) "
    "or a path to a grid function file"
)


def _check_cap(n: int) -> None:
    cap = resolution_cap()
    if n > cap:
        raise ConfigError(
            f"resolution {n} exceeds the cap {cap} (set {MAX_RESOLUTION_ENV} to raise it)"
        )
    if n < 0:
        raise ConfigError(f"negative resolution {n}")


def _resolve_weight(value: str, n: int, seed: int) -> GridFunction:
    """Family specs are drawn with the run's seed; anything else is a path."""
    if value.startswith("power:") or value in ("a1gen", "random"):
        w, _, _ = _draw_weight(trial_rng(seed, 0), n, value)
        return w
    if not os.path.exists(value):
        raise ConfigError(f"no such weight file: {value}")
    w = load_grid_function(value)
    require_weight(w)
    _check_cap(w.resolution)
    return w


def _print_config(args_dict: dict) -> None:
    pieces = " ".join(f"{k}={args_dict[k]}" for k in sorted(args_dict))
    print(f"config: {pieces}")


def _emit_report(report, out: str | None, plot: str | None, plot_kind: str) -> None:
    for key in sorted(report.aggregates):
        print(f"  {key} = {report.aggregates[key]}")
    for name in sorted(report.pass_flags):
        print(f"check {name}: {'PASS' if report.pass_flags[name] else 'FAIL'}")
    if out:
        if out.endswith(".csv"):
            report.save_csv(out)
        else:
            report.save_json(out)
        print(f"report written to {out}")
    if plot:
        emit_svg(report, plot_kind, plot)
        print(f"plot written to {plot}")


def _verdict(report) -> int:
    ok = report.all_passed
    print(f"RESULT: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def _base_config(args, **overrides) -> TrialConfig:
    fields = {
        "resolution": args.n,
        "trials": getattr(args, "trials", 100),
        "seed": args.seed,
        "eps": getattr(args, "eps", "log_pow:2"),
        "phi": getattr(args, "phi", None),
        "stopping_a": getattr(args, "a", 4.0),
        "bound": getattr(args, "bound", 64.0),
    }
    weight = getattr(args, "weight", None)
    if weight is not None:
        fields["weight_families"] = (weight,)
    fields.update(overrides)
    return TrialConfig(**fields)


# ---------------------------------------------------------------------------
# Subcommand bodies.
# ---------------------------------------------------------------------------


def _cmd_rho(args) -> int:
    _check_cap(args.n)
    w = _resolve_weight(args.weight, args.n, args.seed)
    _print_config({"n": w.resolution, "seed": args.seed, "weight": args.weight})
    table = rho_all(w)
    entries = list(table.entries())
    vacuous = sum(1 for _, _, vac in entries if vac)
    print(f"  cubes = {len(entries)}")
    print(f"  vacuous = {vacuous}")
    print(f"  max_rho = {table.max_rho():.17g}")
    if args.out:
        table.to_csv(args.out)
        print(f"table written to {args.out}")
    else:
        print("level,index,rho,vacuous")
        for cube, value, vac in entries:
            print(f"{cube.level},{cube.index},{value:.17g},{int(vac)}")
    return 0


def _cmd_maximal(args) -> int:
    _check_cap(args.n)
    w = _resolve_weight(args.weight, args.n, args.seed)
    eps = EpsilonSpec.parse(args.eps)
    phi = OrliczSpec.parse(args.phi) if args.phi else None
    _print_config(
        {"n": w.resolution, "seed": args.seed, "weight": args.weight,
         "eps": args.eps, "phi": args.phi}
    )
    md = dyadic_maximal(w).values
    me = m_entropy(w, eps)
    payload = {
        "resolution": w.resolution,
        "dyadic": md.tolist(),
        "entropy": me.values.tolist(),
        "orlicz": None,
    }
    print(f"  dyadic_range = [{md.min():.6g}, {md.max():.6g}]")
    print(f"  entropy_range = [{me.values.min():.6g}, {me.values.max():.6g}]")
    if phi is not None:
        mo = m_orlicz(w, phi)
        payload["orlicz"] = mo.values.tolist()
        print(f"  orlicz_range = [{mo.values.min():.6g}, {mo.values.max():.6g}]")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"values written to {args.out}")
    return 0


def _cmd_sparse_split(args) -> int:
    if args.collection:
        if not os.path.exists(args.collection):
            raise ConfigError(f"no such collection file: {args.collection}")
        coll = SparseCollection.load(args.collection)
        _check_cap(coll.resolution)
    else:
        _check_cap(args.n)
        rng = trial_rng(args.seed, 0)
        base = GridFunction(args.n, np.exp(rng.normal(0.0, 2.0, 1 << args.n)))
        coll = cz_stopping_collection(base, ROOT, args.a)
    _print_config(
        {"a": args.a, "collection": args.collection, "n": coll.resolution,
         "seed": args.seed}
    )
    packing = carleson_check(coll, lam=2.0)
    print(f"  members = {len(coll)}")
    print(f"  carleson_worst_ratio = {packing.worst_ratio:.6g}")
    print(f"check carleson: {'PASS' if packing.passed else 'FAIL'}")
    if not packing.passed:
        print("RESULT: FAIL")
        return 1
    parts = split_eight(coll)
    all_ok = True
    payload = {"resolution": coll.resolution, "parts": [], "carleson_worst": packing.worst_ratio}
    for idx, part in enumerate(parts):
        check = strong_sparseness_check(part)
        all_ok = all_ok and check.passed
        payload["parts"].append(
            {
                "cubes": [[q.level, q.index] for q in part],
                "strong_ok": check.passed,
                "worst_ratio": check.worst_ratio,
            }
        )
        print(
            f"  part {idx}: {len(part)} cubes, worst descendant cover "
            f"{check.worst_ratio:.6g}, {'PASS' if check.passed else 'FAIL'}"
        )
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"split written to {args.out}")
    print(f"RESULT: {'PASS' if all_ok else 'FAIL'}")
    return 0 if all_ok else 1


def _cmd_domination(args) -> int:
    _check_cap(args.n)
    cfg = _base_config(args)
    _print_config(cfg.to_dict())
    report = domination_random_suite(cfg)
    _emit_report(report, args.out, args.plot, args.plot_kind)
    return _verdict(report)


def _cmd_verify_main(args) -> int:
    _check_cap(args.n)
    cfg = _base_config(args)
    _print_config(cfg.to_dict())
    report = main_theorem_experiment(cfg)
    _emit_report(report, args.out, args.plot, args.plot_kind)
    return _verdict(report)


def _cmd_verify_cor(args) -> int:
    _check_cap(args.n)
    try:
        s_list = tuple(float(tok) for tok in args.s_list.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"bad --s-list {args.s_list!r}, expected comma separated floats") from None
    if not s_list:
        raise ConfigError("--s-list is empty")
    if any(not 0.0 <= s < 1.0 for s in s_list):
        raise ConfigError("--s-list entries must lie in [0, 1)")
    cfg = _base_config(args)
    _print_config({**cfg.to_dict(), "s_list": list(s_list)})
    report = corollary_experiment(cfg, s_list)
    _emit_report(report, args.out, args.plot, args.plot_kind)
    return _verdict(report)


def _cmd_verify_fs(args) -> int:
    _check_cap(args.n)
    cfg = _base_config(args)
    _print_config(cfg.to_dict())
    report = fs_random_suite(cfg)
    _emit_report(report, args.out, args.plot, args.plot_kind)
    return _verdict(report)


def _cmd_verify_ainf(args) -> int:
    _check_cap(args.n)
    cfg = _base_config(args)
    _print_config(cfg.to_dict())
    report = ainf_lemma_sweep(cfg)
    _emit_report(report, args.out, args.plot, args.plot_kind)
    return _verdict(report)


def _cmd_compare(args) -> int:
    _check_cap(args.n)
    w = _resolve_weight(args.weight, args.n, args.seed)
    eps = EpsilonSpec.parse(args.eps)
    phi = OrliczSpec.parse(args.phi) if args.phi else None
    echo = {"eps": args.eps, "n": w.resolution, "phi": args.phi,
            "seed": args.seed, "weight": args.weight}
    _print_config(echo)
    report = maximal_comparison(w, eps, phi, config=echo)
    _emit_report(report, args.out, None, args.plot_kind)
    return 0


def _cmd_replay(args) -> int:
    _check_cap(args.n)
    cfg = _base_config(args, bound=args.bound)
    _print_config(cfg.to_dict())
    report = replay_random_suite(cfg)
    _emit_report(report, args.out, args.plot, args.plot_kind)
    return _verdict(report)


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------


def _add_grid_flags(p, n_default=10):
    p.add_argument("--n", type=int, default=n_default,
                   help=f"grid resolution, 2^n cells (default {n_default})")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
    p.add_argument("--out", type=str, default=None,
                   help="write a report here (.csv for per-trial CSV, JSON otherwise)")


def _add_trial_flags(p, trials_default=100, bound_default=64.0):
    p.add_argument("--trials", type=int, default=trials_default,
                   help=f"number of random trials (default {trials_default})")
    p.add_argument("--bound", type=float, default=bound_default,
                   help=f"acceptance bound (default {bound_default})")
    p.add_argument("--plot", type=str, default=None, help="write an SVG chart here")
    p.add_argument("--plot-kind", type=str, default="scatter",
                   choices=("scatter", "histogram", "line"), help="chart flavor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entbump",
        description="Entropy-bump maximal functions, sparse forms, and "
        "weak-type endpoint experiments on the dyadic interval.",
    )
    parser.add_argument("--version", action="version", version=f"entbump {VERSION}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("rho", help="local oscillation table of a weight")
    _add_grid_flags(p)
    p.add_argument("--weight", type=str, default="random", help=WEIGHT_FAMILY_HELP)

    p = sub.add_parser("maximal", help="dyadic, entropy, and Orlicz maximal functions")
    _add_grid_flags(p)
    p.add_argument("--weight", type=str, default="random", help=WEIGHT_FAMILY_HELP)
    p.add_argument("--eps", type=str, default="log_pow:2", help="entropy bump spec")
    p.add_argument("--phi", type=str, default=None, help="Orlicz bump spec")

    p = sub.add_parser("sparse-split", help="eight-way split of a Carleson collection")
    _add_grid_flags(p)
    p.add_argument("--collection", type=str, default=None,
                   help="collection file to split (otherwise a random one is generated)")
    p.add_argument("--a", type=float, default=4.0, help="stopping factor (default 4)")

    p = sub.add_parser("domination", help="sparse domination of random sign transforms")
    _add_grid_flags(p)
    _add_trial_flags(p, trials_default=100, bound_default=16.0)
    p.add_argument("--a", type=float, default=4.0, help="stopping factor (default 4)")

    p = sub.add_parser("verify-main", help="weak-type bound against the entropy majorant")
    _add_grid_flags(p)
    _add_trial_flags(p)
    p.add_argument("--eps", type=str, default="log_pow:2", help="entropy bump spec")
    p.add_argument("--weight", type=str, default=None,
                   help="restrict to one weight family (power:<s>, a1gen, random)")

    p = sub.add_parser("verify-cor", help="uniformity of the normalized power-weight quotients")
    _add_grid_flags(p)
    _add_trial_flags(p)
    p.add_argument("--s-list", type=str, default="0,0.5,0.9,0.96875",
                   help="comma separated exponents in [0,1)")

    p = sub.add_parser("verify-fs", help="constant-one endpoint check for coefficient maximal functions")
    _add_grid_flags(p, n_default=8)
    _add_trial_flags(p, trials_default=200, bound_default=1.0)

    p = sub.add_parser("verify-ainf", help="localized oscillation ratio sweep")
    _add_grid_flags(p)
    _add_trial_flags(p, bound_default=8.0)

    p = sub.add_parser("compare", help="pointwise maximal function comparison for one weight")
    _add_grid_flags(p)
    p.add_argument("--weight", type=str, default="random", help=WEIGHT_FAMILY_HELP)
    p.add_argument("--eps", type=str, default="log_pow:2", help="entropy bump spec")
    p.add_argument("--phi", type=str, default=None, help="Orlicz bump spec")
    p.add_argument("--plot-kind", type=str, default="scatter",
                   choices=("scatter", "histogram", "line"))

    p = sub.add_parser("replay", help="step-by-step weak-type decomposition on random instances")
    _add_grid_flags(p)
    _add_trial_flags(p, bound_default=16.0)
    p.add_argument("--eps", type=str, default="log_pow:2", help="entropy bump spec")
    p.add_argument("--a", type=float, default=4.0, help="stopping factor (default 4)")

    return parser


_DISPATCH = {
    "rho": _cmd_rho,
    "maximal": _cmd_maximal,
    "sparse-split": _cmd_sparse_split,
    "domination": _cmd_domination,
    "verify-main": _cmd_verify_main,
    "verify-cor": _cmd_verify_cor,
    "verify-fs": _cmd_verify_fs,
    "verify-ainf": _cmd_verify_ainf,
    "compare": _cmd_compare,
    "replay": _cmd_replay,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    if args.command is None:
        parser.print_help()
        return 2
    try:
        return _DISPATCH[args.command](args)
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # all domain errors of this package subclass ValueError
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
