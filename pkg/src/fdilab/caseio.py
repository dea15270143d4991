"""JSON case-file readers and writers.

Formats:

* network:      {"base_mva": 100, "slack": 1, "buses": [1, ...],
                 "branches": [{"from": 1, "to": 2, "x_pu": 0.03, "limit_mw": null}, ...]}
* meters:       {"meters": [{"branch": [1, 2], "sigma": 0.01}, ...]}
                (the listed bus pair fixes the meter's orientation)
* measurements: {"values_pu": [0.91, ...]}  in meter order
* market:       {"generators": [{"bus": 1, "price": 10, "pmax": 250, "pmin": 0}, ...],
                 "loads": [{"bus": 1, "mw": 100}, ...]}
* attack echo:  {"c": [...], "a": [...], "support": [...]}

Parse failures raise ParseError with the offending path and location;
semantic problems raise the validation errors of the domain modules.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError, UnknownBranch, ValidationError
from .market import DispatchCase, Generator, Load
from .network import Meter, MeterConfig, NetworkModel, build_network


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(path, "-", f"cannot read file: {exc}") from exc
    if not text.strip():
        raise ParseError(path, "line 1", "file is empty")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"line {exc.lineno} column {exc.colno}", exc.msg) from exc


def _require(record: dict, key: str, path, location: str):
    if key not in record:
        raise ParseError(path, location, f"missing required field '{key}'")
    return record[key]


def parse_network(path) -> NetworkModel:
    doc = load_json(path)
    for key in ("buses", "branches", "slack"):
        _require(doc, key, path, "top level")
    for i, rec in enumerate(doc["branches"]):
        for key in ("from", "to", "x_pu"):
            _require(rec, key, path, f"branches[{i}]")
    return build_network(doc)


def parse_meters(path, net: NetworkModel) -> MeterConfig:
    doc = load_json(path)
    records = _require(doc, "meters", path, "top level")
    meters = []
    for i, rec in enumerate(records):
        pair = _require(rec, "branch", path, f"meters[{i}]")
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ParseError(path, f"meters[{i}].branch", "expected a [from, to] bus pair")
        try:
            index, orientation = net.branch_index(int(pair[0]), int(pair[1]))
        except UnknownBranch as exc:
            raise ValidationError(f"meters[{i}]: {exc}") from exc
        meters.append(Meter(branch=index, orientation=orientation, sigma=float(rec.get("sigma", 0.01))))
    return MeterConfig(meters=tuple(meters))


def parse_measurements(path, expected_count: int | None = None) -> np.ndarray:
    doc = load_json(path)
    values = _require(doc, "values_pu", path, "top level")
    z = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise ValidationError(f"{path}: measurement values must all be finite")
    if expected_count is not None and z.shape[0] != expected_count:
        raise ValidationError(
            f"{path}: expected {expected_count} measurement values, got {z.shape[0]}"
        )
    return z


def parse_market(path, net: NetworkModel) -> DispatchCase:
    doc = load_json(path)
    gen_records = _require(doc, "generators", path, "top level")
    load_records = _require(doc, "loads", path, "top level")
    generators = []
    for i, rec in enumerate(gen_records):
        generators.append(
            Generator(
                bus=int(_require(rec, "bus", path, f"generators[{i}]")),
                price=float(_require(rec, "price", path, f"generators[{i}]")),
                p_max=float(_require(rec, "pmax", path, f"generators[{i}]")),
                p_min=float(rec.get("pmin", 0.0)),
            )
        )
    loads = []
    for i, rec in enumerate(load_records):
        loads.append(
            Load(
                bus=int(_require(rec, "bus", path, f"loads[{i}]")),
                mw=float(_require(rec, "mw", path, f"loads[{i}]")),
            )
        )
    return DispatchCase(network=net, generators=tuple(generators), loads=tuple(loads))


def parse_case_files(network_path, meters_path, market_path=None):
    """Load and cross-validate a network, its meter set and optionally a market case."""
    net = parse_network(network_path)
    meters = parse_meters(meters_path, net)
    case = parse_market(market_path, net) if market_path is not None else None
    return net, meters, case


def dump_attack(atk, path) -> None:
    doc = {
        "c": [float(v) for v in atk.c],
        "a": [float(v) for v in atk.a],
        "support": list(atk.support),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def parse_attack(path):
    from .attack import AttackVector

    doc = load_json(path)
    for key in ("c", "a", "support"):
        _require(doc, key, path, "top level")
    return AttackVector(
        a=np.asarray(doc["a"], dtype=float),
        c=np.asarray(doc["c"], dtype=float),
        support=tuple(int(i) for i in doc["support"]),
    )
