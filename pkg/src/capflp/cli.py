"""Command-line interface: ``capflp <command> ...``.

Every command prints JSON on stdout (CSV where stated). Exit codes: 0 on
success, 2 for malformed input or unsupported cases, 3 when the request is
well-formed but infeasible or not equilibrium stable.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import analysis, core, fcfs, harness, mechanisms, planar
from .errors import CapacityInfeasible, InfeasibleError, InvalidParams, NotES, ValidationError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParams(f"not valid JSON: {text!r}") from exc


def parse_caps(text: str) -> tuple[int, ...]:
    text = text.strip()
    raw = _json_arg(text) if text.startswith("[") else [t for t in text.split(",") if t.strip()]
    try:
        return core.make_capacities(int(k) for k in raw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise InvalidParams(f"capacities must be integers, got {text!r}") from exc


def parse_vector(text: str) -> mechanisms.PercentileVector:
    return mechanisms.PercentileVector.from_dict(_json_arg(text))


def _read(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InvalidParams(f"cannot read {path}: {exc.strerror}") from exc


def load_any_instance(path: str):
    """A line instance (numbers) or a planar instance ([x, y] pairs)."""
    text = _read(path)
    if path.endswith(".csv"):
        return core.instance_from_csv(text)
    data = _json_arg(text)
    if isinstance(data, dict):
        data = data.get("points", data.get("positions", data.get("instance")))
    if isinstance(data, list) and data and isinstance(data[0], list):
        return planar.make_planar_instance(data)
    if not isinstance(data, list):
        raise InvalidParams("instance JSON must be an array")
    return core.make_instance(data)


def _emit(payload, out=None) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = core.parse_distribution(args.dist)
    instance = core.sample_positions(spec, args.n, args.seed)
    _emit(instance.to_csv() if args.format == "csv" else instance.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_place(args) -> int:
    instance = load_any_instance(args.instance)
    caps = parse_caps(args.caps)
    if isinstance(instance, planar.PlanarInstance):
        placement = planar.planar_percentile_placement(planar.PercentileMatrix.parse(args.v), instance, caps)
        _emit(placement.to_dict(), args.out)
        return EXIT_OK
    vec = parse_vector(args.v)
    placement = mechanisms.apply_percentile(vec, instance, caps)
    payload = placement.to_dict()
    payload["indices"] = list(mechanisms.percentile_indices(vec, instance.n))
    if vec.m == 2:
        payload["kind"] = mechanisms.classify_percentile(vec, instance.n).value
    _emit(payload, args.out)
    return EXIT_OK


def _load_placement(text: str) -> fcfs.Placement:
    source = text if text.lstrip().startswith("{") else _read(text)
    return fcfs.Placement.from_dict(_json_arg(source))


def cmd_ne(args) -> int:
    instance = load_any_instance(args.instance)
    placement = _load_placement(args.placement)
    profile = fcfs.construct_ne(instance, placement)
    outcome = fcfs.resolve_outcome(instance, placement, profile)
    if args.csv:
        _emit(fcfs.outcome_to_csv(instance, profile, outcome), args.out)
        return EXIT_OK
    payload = {
        "profile": json.loads(fcfs.profile_to_json(profile)),
        "welfare": fcfs.social_welfare(outcome),
    }
    if args.enumerate:
        found = fcfs.enumerate_ne(instance, placement, cap=args.cap)
        stable, values = fcfs.check_equilibrium_stability(instance, placement, cap=args.cap)
        payload["equilibria"] = [json.loads(fcfs.profile_to_json(p)) for p in found]
        payload["welfare_values"] = list(values)
        payload["stable"] = stable
    _emit(payload, args.out)
    return EXIT_OK


def cmd_verify_es(args) -> int:
    caps = parse_caps(args.caps)
    text = args.v.strip()
    data = _json_arg(text)
    if isinstance(data, dict) and "rows" in data:
        matrix = planar.PercentileMatrix.from_dict(data)
        _emit({"es": planar.planar_is_es(matrix, args.n, caps), "method": "coordinate-rule"})
        return EXIT_OK
    vec = mechanisms.PercentileVector.from_dict(data)
    payload = {
        "indices": list(mechanisms.percentile_indices(vec, args.n)),
        "es": mechanisms.es_condition(vec, args.n, caps),
        "method": "closed-form",
    }
    if args.brute_force:
        unstable = None
        for trial in range(args.instances):
            instance = core.sample_positions(core.Uniform(), args.n, [args.seed, trial])
            placement = mechanisms.apply_percentile(vec, instance, caps)
            stable, values = fcfs.check_equilibrium_stability(instance, placement, cap=args.cap)
            if not stable:
                unstable = {"instance": list(instance.positions), "welfare_values": list(values)}
                break
        payload["brute_force"] = {"instances": args.instances, "counterexample": unstable}
    _emit(payload)
    return EXIT_OK


def cmd_best_vector(args) -> int:
    if args.m is not None or args.k is not None:
        if args.m is None or args.k is None:
            raise InvalidParams("--m and --k go together")
        report = mechanisms.best_uniform_vector_m(args.n, args.k, args.m)
    else:
        if args.k1 is None or args.k2 is None:
            raise InvalidParams("give --k1 and --k2, or --m and --k")
        report = mechanisms.best_wg_vector(args.n, args.k1, args.k2)
    _emit(report.to_dict())
    return EXIT_OK


def _default_indices(kind: mechanisms.MechanismKind, n: int, caps) -> tuple[int, ...]:
    if kind is mechanisms.MechanismKind.AIO:
        return (mechanisms.median_index(n),) * len(caps)
    if kind is mechanisms.MechanismKind.SBS:
        mid = mechanisms.median_index(n)
        return (mid, mid + 1)
    if kind is mechanisms.MechanismKind.WG:
        return mechanisms.best_wg_vector(n, *caps).indices
    if kind is mechanisms.MechanismKind.UNIFORM_GRID:
        if len(set(caps)) != 1:
            raise InvalidParams("the spread placement needs equal capacities")
        return mechanisms.best_uniform_vector_m(n, caps[0], len(caps)).indices
    raise InvalidParams(f"give --indices for kind {kind.value}")


def cmd_worst_case(args) -> int:
    kind = mechanisms.MechanismKind(args.kind)
    caps = parse_caps(args.caps)
    if sum(caps) >= args.n:
        raise CapacityInfeasible(f"total capacity {sum(caps)} must be below n = {args.n}")
    if kind is mechanisms.MechanismKind.WG and caps[0] < caps[-1]:
        caps = tuple(sorted(caps, reverse=True))
    indices = tuple(_json_arg(args.indices)) if args.indices else _default_indices(kind, args.n, caps)
    result = analysis.worst_case_instance(kind, args.n, caps, indices)
    _emit(result.to_dict(), args.out)
    return EXIT_OK


def cmd_ratio(args) -> int:
    instance = load_any_instance(args.instance)
    caps = parse_caps(args.caps)
    if isinstance(instance, planar.PlanarInstance):
        matrix = planar.PercentileMatrix.parse(args.v)
        placement = planar.planar_percentile_placement(matrix, instance, caps)
        if matrix.m == 2 and not planar.planar_is_es(matrix, instance.n, caps):
            raise NotES("the planar percentile matrix is not equilibrium stable")
        _emit({"ratio": analysis.placement_ratio(instance, placement)})
        return EXIT_OK
    vec = parse_vector(args.v)
    placement = mechanisms.apply_percentile(vec, instance, caps)
    ratio = analysis.empirical_ratio(instance, vec, caps)
    _emit(
        {
            "ratio": ratio,
            "sw_ub": analysis.sw_upper_bound(instance, caps),
            "sw_mech": fcfs.mechanism_welfare(instance, placement),
        }
    )
    return EXIT_OK


def cmd_formula(args) -> int:
    caps = parse_caps(args.caps)
    name = args.name
    if name == "wg":
        result = analysis.ar_wg(args.n, caps[0], caps[1], *_json_arg(args.indices))
    elif name == "median-aio":
        result = analysis.ar_median_aio(args.n, caps[0], caps[1])
    elif name == "aio":
        result = analysis.ar_aio(args.n, caps)
    elif name == "uniform":
        i1, im = _json_arg(args.indices)
        result = analysis.ar_uniform_m(args.n, caps[0], len(caps), i1, im)
    elif name == "planar-median":
        result = planar.ar_median_planar(args.n, caps[0], caps[1])
    else:  # pragma: no cover - argparse restricts the choices
        raise InvalidParams(name)
    _emit(result.to_dict())
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = harness.ExperimentConfig.from_dict(_json_arg(_read(args.config)))
    report = harness.run_experiment(config, workers=args.workers)
    written = harness.emit_report(report, args.format, args.out, per_trial=args.per_trial or config.per_trial)
    _emit({"written": written, "cells": len(report.cells)})
    return EXIT_OK


def cmd_audit_truthful(args) -> int:
    instance = load_any_instance(args.instance)
    if isinstance(instance, planar.PlanarInstance):
        raise InvalidParams("the truthfulness audit runs on the line")
    caps = parse_caps(args.caps)
    if args.mechanism == "mean":
        rule = analysis.mean_mechanism(caps)
    else:
        if args.v is None:
            raise InvalidParams("--v is required for the percentile mechanism")
        rule = analysis.percentile_mechanism(parse_vector(args.v), caps)
    grid = analysis.misreport_grid(args.grid_step)
    agents = range(instance.n) if args.agent is None else [args.agent - 1]
    witness = None
    for agent in agents:
        witness = analysis.check_absolute_truthfulness(rule, instance, agent, grid, seed=args.seed)
        if witness is not None:
            break
    _emit({"truthful": witness is None, "witness": witness.to_dict() if witness else None})
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capflp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample an instance")
    p.add_argument("--dist", required=True, help='kind name or JSON, e.g. \'{"kind": "beta", "alpha": 5, "beta": 5}\'')
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("place", help="apply a percentile vector (or matrix for planar instances)")
    p.add_argument("--v", required=True, help='JSON list, {"v": [...], "assignment": [...]} or {"rows": [...]}')
    p.add_argument("--caps", required=True, help="comma-separated or JSON list")
    p.add_argument("--instance", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("ne", help="constructive equilibrium, optionally all equilibria")
    p.add_argument("--instance", required=True)
    p.add_argument("--placement", required=True, help="placement JSON file or inline JSON")
    p.add_argument("--enumerate", action="store_true")
    p.add_argument("--cap", type=int, default=fcfs.DEFAULT_CAP)
    p.add_argument("--csv", action="store_true", help="dump the constructive outcome as CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ne)

    p = sub.add_parser("verify-es", help="equilibrium-stability test for a vector")
    p.add_argument("--v", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--caps", required=True)
    p.add_argument("--brute-force", action="store_true")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=fcfs.DEFAULT_CAP)
    p.set_defaults(func=cmd_verify_es)

    p = sub.add_parser("best-vector", help="best wide-gap vector or evenly spread vector")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_best_vector)

    p = sub.add_parser("worst-case", help="worst instance for a placement kind")
    p.add_argument("--kind", required=True, choices=[k.value for k in mechanisms.MechanismKind])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--caps", required=True)
    p.add_argument("--indices", help="JSON list of 1-based agent indices")
    p.add_argument("--out")
    p.set_defaults(func=cmd_worst_case)

    p = sub.add_parser("ratio", help="empirical ratio of a vector on an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--v", required=True)
    p.add_argument("--caps", required=True)
    p.set_defaults(func=cmd_ratio)

    p = sub.add_parser("formula", help="closed-form worst-case ratio")
    p.add_argument("name", choices=("wg", "median-aio", "aio", "uniform", "planar-median"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--caps", required=True)
    p.add_argument("--indices", help="JSON [i1, i2] for wg and uniform")
    p.set_defaults(func=cmd_formula)

    p = sub.add_parser("experiment", help="run a Monte-Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--per-trial", action="store_true")
    p.add_argument("--workers", type=int, default=None, help="defaults to CAPFLP_THREADS or 1")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("audit-truthful", help="search for a profitable misreport")
    p.add_argument("--instance", required=True)
    p.add_argument("--caps", required=True)
    p.add_argument("--v")
    p.add_argument("--mechanism", choices=("percentile", "mean"), default="percentile")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--agent", type=int, help="1-based agent; all agents by default")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_audit_truthful)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"capflp: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        print(f"capflp: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (KeyError, TypeError, ValueError) as exc:
        print(f"capflp: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
