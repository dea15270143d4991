"""Command-line front end.

Subcommands: estimate, detect, attack random|targeted, opf, scenario run,
montecarlo. Text reports go to stdout; ``--out`` writes a CSV with one
row per (stage, quantity, index, value), all numerics fixed to six
decimals so repeated runs are byte-identical. Exit codes: 0 success,
2 parse/validation error, 3 numerical failure, 4 infeasible problem.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import caseio
from .attack import random_constrained_attack, targeted_attack
from .detection import DetectionMethod
from .errors import (
    FdiLabError,
    InfeasibleError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .network import build_h_matrix
from .scenario import (
    DetectorSpec,
    FileSource,
    NoAttack,
    Scenario,
    _fmt,
    parse_scenario,
    run_monte_carlo,
    run_scenario,
)


def _write(path, text: str) -> None:
    Path(path).write_text(text)


def _pipeline_scenario(args, detectors) -> Scenario:
    return Scenario(
        name=Path(args.measurements).stem,
        network_path=Path(args.case),
        meters_path=Path(args.meters),
        measurements=FileSource(path=Path(args.measurements)),
        attack=NoAttack(),
        detectors=detectors,
        market=None,
    )


def _cmd_estimate(args) -> int:
    report = run_scenario(_pipeline_scenario(args, detectors=()))
    sys.stdout.write(report.to_text())
    if args.out:
        _write(args.out, report.to_csv())
    return 0


def _cmd_detect(args) -> int:
    detectors = (
        DetectorSpec(DetectionMethod.CHI_SQUARE, args.confidence),
        DetectorSpec(DetectionMethod.LNR, args.confidence),
    )
    report = run_scenario(_pipeline_scenario(args, detectors))
    sys.stdout.write(report.to_text())
    if args.out:
        _write(args.out, report.to_csv())
    return 0


def _load_model(args):
    net = caseio.parse_network(args.case)
    meters = caseio.parse_meters(args.meters, net)
    return net, meters, build_h_matrix(net, meters)


def _print_attack(atk, H) -> None:
    out = ["[attack vector]", f"  support = {list(atk.support)}"]
    for k, bus in enumerate(H.state_buses):
        out.append(f"  c(bus {bus}) = {_fmt(atk.c[k])} rad")
    for i in range(len(atk.a)):
        out.append(f"  a[{i}] = {_fmt(atk.a[i])} pu")
    sys.stdout.write("\n".join(out) + "\n")


def _cmd_attack_random(args) -> int:
    _, _, H = _load_model(args)
    support = tuple(int(s) for s in args.support.split(","))
    atk = random_constrained_attack(H, support, seed=args.seed, magnitude=args.magnitude)
    _print_attack(atk, H)
    if args.out:
        caseio.dump_attack(atk, args.out)
    return 0


def _cmd_attack_targeted(args) -> int:
    _, _, H = _load_model(args)
    pinned = {}
    for spec in args.pin:
        try:
            bus_text, value_text = spec.split("=", 1)
            pinned[H.state_index(int(bus_text))] = float(value_text)
        except ValueError as exc:
            raise ValidationError(f"bad --pin '{spec}', expected BUS=SHIFT_RAD") from exc
    atk = targeted_attack(H, pinned)
    _print_attack(atk, H)
    if args.out:
        caseio.dump_attack(atk, args.out)
    return 0


def _cmd_opf(args) -> int:
    from .market import solve_dc_opf

    net = caseio.parse_network(args.case)
    case = caseio.parse_market(args.market, net)
    result = solve_dc_opf(case)
    out = ["[dispatch]"]
    for g, gen in enumerate(case.generators):
        out.append(f"  gen {g} (bus {gen.bus}) = {_fmt(result.gen_output[g])} MW")
    for b, br in enumerate(net.branches):
        out.append(f"  flow {br.from_bus}-{br.to_bus} = {_fmt(result.flows[b])} MW")
    for bus, price in result.lmp.items():
        out.append(f"  lmp(bus {bus}) = {_fmt(price)} $/MWh")
    if result.binding_lines:
        names = ", ".join(
            f"{net.branches[b].from_bus}-{net.branches[b].to_bus}" for b in result.binding_lines
        )
        out.append(f"  binding lines: {names}")
    out.append(f"  cost = {_fmt(result.objective)} $/h")
    sys.stdout.write("\n".join(out) + "\n")
    if args.out:
        lines = ["stage,quantity,index,value"]
        for g in range(len(result.gen_output)):
            lines.append(f"dispatch,gen_mw,{g},{_fmt(result.gen_output[g])}")
        for b, br in enumerate(net.branches):
            lines.append(f"dispatch,flow_mw,{br.from_bus}-{br.to_bus},{_fmt(result.flows[b])}")
        for bus, price in result.lmp.items():
            lines.append(f"dispatch,lmp,{bus},{_fmt(price)}")
        lines.append(f"dispatch,objective_per_h,,{_fmt(result.objective)}")
        _write(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_scenario_run(args) -> int:
    report = run_scenario(parse_scenario(args.scenario))
    sys.stdout.write(report.to_text())
    if args.out:
        _write(args.out, report.to_csv())
    return 0


def _cmd_montecarlo(args) -> int:
    summary = run_monte_carlo(parse_scenario(args.scenario), trials=args.trials, base_seed=args.seed)
    sys.stdout.write(summary.to_text())
    if args.out:
        _write(args.out, summary.to_csv())
    return 0


def _add_model_args(p, measurements=True):
    p.add_argument("--case", required=True, help="network case file (JSON)")
    p.add_argument("--meters", required=True, help="meter configuration file (JSON)")
    if measurements:
        p.add_argument("--measurements", required=True, help="measurement file (JSON)")
    p.add_argument("--out", help="write a CSV report here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdilab",
        description="DC state estimation, bad-data detection, stealth measurement "
        "attacks and LMP dispatch on small grid cases.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="weighted least-squares state estimate")
    _add_model_args(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("detect", help="run both bad-data detectors")
    _add_model_args(p)
    p.add_argument("--confidence", type=float, default=0.99)
    p.set_defaults(func=_cmd_detect)

    attack = sub.add_parser("attack", help="synthesize a stealth attack vector")
    attack_sub = attack.add_subparsers(dest="attack_kind", required=True)

    p = attack_sub.add_parser("random", help="random attack confined to controlled meters")
    _add_model_args(p, measurements=False)
    p.add_argument("--support", required=True, help="comma-separated controlled meter indices")
    p.add_argument("--magnitude", type=float, default=0.1, help="norm of the attack vector (pu)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_attack_random)

    p = attack_sub.add_parser("targeted", help="attack realizing pinned state shifts")
    _add_model_args(p, measurements=False)
    p.add_argument(
        "--pin",
        action="append",
        required=True,
        metavar="BUS=SHIFT_RAD",
        help="pin the angle shift at a bus (repeatable)",
    )
    p.set_defaults(func=_cmd_attack_targeted)

    p = sub.add_parser("opf", help="DC optimal power flow with LMPs")
    p.add_argument("--case", required=True, help="network case file (JSON)")
    p.add_argument("--market", required=True, help="market case file (JSON)")
    p.add_argument("--out", help="write a CSV report here")
    p.set_defaults(func=_cmd_opf)

    scenario = sub.add_parser("scenario", help="scenario pipelines")
    scenario_sub = scenario.add_subparsers(dest="scenario_kind", required=True)
    p = scenario_sub.add_parser("run", help="run a scenario file end to end")
    p.add_argument("scenario", help="scenario file (JSON)")
    p.add_argument("--out", help="write a CSV report here")
    p.set_defaults(func=_cmd_scenario_run)

    p = sub.add_parser("montecarlo", help="seeded detection-rate experiment")
    p.add_argument("scenario", help="scenario file with simulated measurements")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--out", help="write a CSV report here")
    p.set_defaults(func=_cmd_montecarlo)

    return parser


def _exit_code(exc: FdiLabError) -> int:
    if isinstance(exc, (ParseError, ValidationError)):
        return 2
    if isinstance(exc, InfeasibleError):
        return 4
    if isinstance(exc, NumericalError):
        return 3
    return 3


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FdiLabError as exc:
        stage = getattr(exc, "stage", None)
        where = f" stage={stage}" if stage else ""
        message = str(exc).replace("\n", " ")
        print(f"error:{where} {type(exc).__name__}: {message}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
