"""Case-file loading.

Case files are JSON documents with top-level arrays ``buses``, ``branches``,
``transformers``, ``generators``, ``loads``, ``capacitors``, ``batteries``;
all impedances are per-unit on the declared system MVA base. The schema is
documented in ``docs/case_schema.md``. Two bundled cases are addressable by
id: ``wscc9_augmented`` and ``ieee24_augmented``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .network import (
    Battery,
    Branch,
    Bus,
    Capacitor,
    Generator,
    Load,
    NetworkValidationError,
    PowerNetwork,
    Shunt,
    Transformer,
)

__all__ = ["BUNDLED_CASES", "CaseFileError", "load_case"]

BUNDLED_CASES = ("wscc9_augmented", "ieee24_augmented")


class CaseFileError(ValueError):
    """Malformed case file; the message names the offending field."""


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise CaseFileError(f"{where}: missing field {key!r}")
    return record[key]


def _parse(data: dict, source: str) -> PowerNetwork:
    try:
        buses = tuple(
            Bus(id=int(_require(b, "id", f"{source} buses[{i}]")),
                base_kv=float(_require(b, "base_kv", f"{source} buses[{i}]")),
                type=str(_require(b, "type", f"{source} buses[{i}]")))
            for i, b in enumerate(data.get("buses", []))
        )
        branches = tuple(
            Branch(from_bus=int(_require(b, "from", f"{source} branches[{i}]")),
                   to_bus=int(_require(b, "to", f"{source} branches[{i}]")),
                   r=float(b.get("r", 0.0)),
                   x=float(_require(b, "x", f"{source} branches[{i}]")),
                   b=float(b.get("b", 0.0)),
                   rating_mva=float(b.get("rating_mva", 0.0)),
                   in_service=bool(b.get("in_service", True)))
            for i, b in enumerate(data.get("branches", []))
        )
        transformers = tuple(
            Transformer(id=str(_require(t, "id", f"{source} transformers[{i}]")),
                        branch=int(_require(t, "branch", f"{source} transformers[{i}]")),
                        tap=int(t.get("tap", 0)),
                        tap_min=int(t.get("tap_min", -16)),
                        tap_max=int(t.get("tap_max", 16)),
                        step=float(t.get("step", 0.00625)),
                        regulating=bool(t.get("regulating", True)))
            for i, t in enumerate(data.get("transformers", []))
        )
        generators = tuple(
            Generator(id=str(_require(g, "id", f"{source} generators[{i}]")),
                      bus=int(_require(g, "bus", f"{source} generators[{i}]")),
                      p_mw=float(g.get("p_mw", 0.0)),
                      q_min_mvar=float(g.get("q_min_mvar", -9999.0)),
                      q_max_mvar=float(g.get("q_max_mvar", 9999.0)),
                      v_set=float(_require(g, "v_set", f"{source} generators[{i}]")),
                      in_service=bool(g.get("in_service", True)))
            for i, g in enumerate(data.get("generators", []))
        )
        loads = tuple(
            Load(bus=int(_require(l, "bus", f"{source} loads[{i}]")),
                 p_mw=float(l.get("p_mw", 0.0)),
                 q_mvar=float(l.get("q_mvar", 0.0)))
            for i, l in enumerate(data.get("loads", []))
        )
        shunts = tuple(
            Shunt(bus=int(_require(sh, "bus", f"{source} shunts[{i}]")),
                  q_mvar=float(_require(sh, "q_mvar", f"{source} shunts[{i}]")))
            for i, sh in enumerate(data.get("shunts", []))
        )
        capacitors = tuple(
            Capacitor(id=str(_require(c, "id", f"{source} capacitors[{i}]")),
                      bus=int(_require(c, "bus", f"{source} capacitors[{i}]")),
                      rated_kvar=float(_require(c, "rated_kvar", f"{source} capacitors[{i}]")),
                      on=bool(c.get("on", False)))
            for i, c in enumerate(data.get("capacitors", []))
        )
        batteries = tuple(
            Battery(id=str(_require(b, "id", f"{source} batteries[{i}]")),
                    bus=int(_require(b, "bus", f"{source} batteries[{i}]")),
                    p_max_mw=float(_require(b, "p_max_mw", f"{source} batteries[{i}]")),
                    capacity_mwh=float(_require(b, "capacity_mwh", f"{source} batteries[{i}]")),
                    soc=float(b.get("soc", 0.5)),
                    mode=str(b.get("mode", "idle")),
                    power=float(b.get("power", 0.0)))
            for i, b in enumerate(data.get("batteries", []))
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CaseFileError):
            raise
        raise CaseFileError(f"{source}: {exc}") from exc

    net = PowerNetwork(
        name=str(data.get("name", source)),
        base_mva=float(data.get("base_mva", 100.0)),
        buses=buses,
        branches=branches,
        transformers=transformers,
        generators=generators,
        loads=loads,
        shunts=shunts,
        capacitors=capacitors,
        batteries=batteries,
    )
    return net.validate()


def load_case(case: str | Path) -> PowerNetwork:
    """Load a bundled case by id or an arbitrary case file by path."""
    if isinstance(case, str) and case in BUNDLED_CASES:
        text = resources.files("voltgrid.data").joinpath(f"{case}.json").read_text()
        source = case
    else:
        path = Path(case)
        if not path.exists():
            raise CaseFileError(f"case file not found: {path}")
        text = path.read_text()
        source = str(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFileError(f"{source}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise CaseFileError(f"{source}: top level must be an object")
    try:
        return _parse(data, source)
    except NetworkValidationError as exc:
        raise NetworkValidationError(f"{source}: {exc}") from exc
