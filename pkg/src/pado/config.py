"""INI configuration files: every ``SimParams`` field, grouped into sections.

Values: numbers as written, tuples comma-separated, ``none`` for unset optionals.
Every key is required so a config file fully pins a run; errors carry the
``section.key`` path of the offending entry.
"""
from __future__ import annotations

import configparser
import dataclasses
import typing
from pathlib import Path

from .model import SimParams

SECTIONS = {
    "task": ["n_vehicles", "arrival_prob", "size_min_units", "size_max_units", "bits_per_unit", "cycles_per_bit",
             "slot_len", "gamma", "deadline_span", "n_resources", "demand_min", "demand_max"],
    "vehicle": ["f_local_max", "f_local_floor", "kappa", "vehicle_weight", "drop_price", "energy_term"],
    "server": ["server_deadline", "f_server_max", "server_weight", "capacity", "price_ceiling", "price_margin"],
    "energy": ["charge_eff", "discharge_eff", "discharge_cap", "charge_cap", "renewable_peak", "renewable_trace",
               "renewable_period", "renewable_noise", "renewable_file", "price_trace", "price_low", "price_high",
               "price_period", "price_file", "price_cap", "battery_init"],
    "solver": ["grid_points", "refine_iters", "dual_step", "dual_tol", "dual_max_iter", "dual_init", "dual_update",
               "lambda2_form", "lambda2_t", "inner_rounds"],
    "run": ["policy", "dro_offload_prob", "n_slots", "seed"],
}
FIELD_PATH = {name: f"{sec}.{name}" for sec, names in SECTIONS.items() for name in names}


class ConfigFileError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.errors))


def _field_types():
    hints = typing.get_type_hints(SimParams)
    return {f.name: (hints[f.name], f.default) for f in dataclasses.fields(SimParams)}


def _parse(raw: str, hint, default):
    raw = raw.strip()
    optional = typing.get_origin(hint) is typing.Union and type(None) in typing.get_args(hint)
    if optional and raw.lower() == "none":
        return None
    if isinstance(default, tuple) or hint is tuple:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    base = [a for a in typing.get_args(hint) if a is not type(None)][0] if optional else hint
    if base is int:
        return int(raw)
    if base is float:
        return float(raw)
    return raw


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def params_from_mapping(cp: configparser.ConfigParser) -> SimParams:
    types = _field_types()
    errors, values = [], {}
    for name, path in FIELD_PATH.items():
        sec = path.split(".")[0]
        if not cp.has_section(sec) or not cp.has_option(sec, name):
            errors.append((path, "missing"))
            continue
        hint, default = types[name]
        try:
            values[name] = _parse(cp.get(sec, name), hint, default)
        except ValueError as exc:
            errors.append((path, f"cannot parse {cp.get(sec, name)!r}: {exc}"))
    for sec in cp.sections():
        for key in cp.options(sec):
            if FIELD_PATH.get(key, "").split(".")[0] != sec:
                errors.append((f"{sec}.{key}", "unknown key"))
    if errors:
        raise ConfigFileError(errors)
    params = SimParams(**values)
    bad = params.validate()
    if bad:
        raise ConfigFileError([(FIELD_PATH.get(k.split("[")[0], k), m) for k, m in bad])
    return params


def loads(text: str) -> SimParams:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigFileError([("<file>", str(exc).splitlines()[0])]) from exc
    return params_from_mapping(cp)


def load(path) -> SimParams:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigFileError([("<file>", str(exc))]) from exc
    return loads(text)


def dumps(params: SimParams) -> str:
    lines = []
    for sec, names in SECTIONS.items():
        lines.append(f"[{sec}]")
        lines += [f"{name} = {_format(getattr(params, name))}" for name in names]
        lines.append("")
    return "\n".join(lines)


def dump(params: SimParams, path) -> None:
    Path(path).write_text(dumps(params))


def override(params: SimParams, items) -> SimParams:
    """Apply ``name=value`` (or ``section.name=value``) strings on top of ``params``."""
    types = _field_types()
    errors, changes = [], {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        name = key.strip().split(".")[-1]
        if not sep or name not in types:
            errors.append((key.strip() or item, "unknown key" if sep else "expected name=value"))
            continue
        hint, default = types[name]
        try:
            changes[name] = _parse(raw, hint, default)
        except ValueError as exc:
            errors.append((FIELD_PATH[name], f"cannot parse {raw!r}: {exc}"))
    if errors:
        raise ConfigFileError(errors)
    params = params.replace(**changes)
    bad = params.validate()
    if bad:
        raise ConfigFileError([(FIELD_PATH.get(k.split("[")[0], k), m) for k, m in bad])
    return params
