"""Electrical network data model.

A :class:`PowerNetwork` is an immutable value object: every mutation helper
returns a new network. All impedances are per-unit on the system MVA base
declared by the case file (100 MVA for the shipped cases).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace

__all__ = [
    "Bus",
    "Branch",
    "Transformer",
    "Generator",
    "Load",
    "Shunt",
    "Capacitor",
    "Battery",
    "PowerNetwork",
    "NetworkValidationError",
    "UnknownDeviceError",
]

BUS_TYPES = ("slack", "pv", "pq")
BATTERY_MODES = ("charge", "discharge", "idle")

# One control period; battery SoC integrates energy over this horizon.
CONTROL_PERIOD_HOURS = 1.0


class NetworkValidationError(ValueError):
    """Raised when case data violates a structural invariant."""


class UnknownDeviceError(KeyError):
    """Raised when a device id does not exist in the network."""


@dataclass(frozen=True)
class Bus:
    id: int
    base_kv: float
    type: str  # slack | pv | pq


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float  # total line-charging susceptance, p.u.
    rating_mva: float
    in_service: bool = True


@dataclass(frozen=True)
class Transformer:
    """Off-nominal-ratio transformer sitting on an existing branch.

    ``tap`` is an integer position; the effective from-side ratio is
    ``1 + tap * step``. Only ``regulating`` transformers appear in the
    control action space.
    """

    id: str
    branch: int  # index into PowerNetwork.branches
    tap: int = 0
    tap_min: int = -16
    tap_max: int = 16
    step: float = 0.00625
    regulating: bool = True

    @property
    def ratio(self) -> float:
        return 1.0 + self.tap * self.step


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    p_mw: float
    q_min_mvar: float
    q_max_mvar: float
    v_set: float
    in_service: bool = True


@dataclass(frozen=True)
class Load:
    bus: int
    p_mw: float
    q_mvar: float


@dataclass(frozen=True)
class Shunt:
    """Fixed bus shunt; ``q_mvar`` is the reactive injection at 1.0 p.u.
    (negative for a reactor)."""

    bus: int
    q_mvar: float


@dataclass(frozen=True)
class Capacitor:
    id: str
    bus: int
    rated_kvar: float
    on: bool = False


@dataclass(frozen=True)
class Battery:
    """Grid-tied storage; ``power`` is the normalized setting in [-1, 1]
    where +1 is full discharge (injection) and -1 is full charge."""

    id: str
    bus: int
    p_max_mw: float
    capacity_mwh: float
    soc: float = 0.5
    mode: str = "idle"
    power: float = 0.0

    @property
    def p_inj_mw(self) -> float:
        """Real power injected into the bus (negative while charging)."""
        return self.power * self.p_max_mw


@dataclass(frozen=True)
class PowerNetwork:
    name: str
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    transformers: tuple[Transformer, ...] = ()
    generators: tuple[Generator, ...] = ()
    loads: tuple[Load, ...] = ()
    shunts: tuple[Shunt, ...] = ()
    capacitors: tuple[Capacitor, ...] = ()
    batteries: tuple[Battery, ...] = ()

    # -- validation ---------------------------------------------------------

    def validate(self) -> "PowerNetwork":
        bus_ids = [b.id for b in self.buses]
        if len(set(bus_ids)) != len(bus_ids):
            dupes = sorted({i for i in bus_ids if bus_ids.count(i) > 1})
            raise NetworkValidationError(f"duplicate bus id(s): {dupes}")
        slack = [b.id for b in self.buses if b.type == "slack"]
        if len(slack) != 1:
            raise NetworkValidationError(
                f"exactly one slack bus required, found {len(slack)}: {slack}"
            )
        known = set(bus_ids)
        for br in self.branches:
            if br.from_bus not in known or br.to_bus not in known:
                raise NetworkValidationError(
                    f"branch {br.from_bus}-{br.to_bus} references unknown bus"
                )
        for b in self.buses:
            if b.type not in BUS_TYPES:
                raise NetworkValidationError(f"bus {b.id}: bad type {b.type!r}")
        for t in self.transformers:
            if not 0 <= t.branch < len(self.branches):
                raise NetworkValidationError(f"transformer {t.id}: bad branch index")
            if not t.tap_min <= t.tap <= t.tap_max:
                raise NetworkValidationError(
                    f"transformer {t.id}: tap {t.tap} outside [{t.tap_min}, {t.tap_max}]"
                )
        for g in self.generators:
            if g.bus not in known:
                raise NetworkValidationError(f"generator {g.id}: unknown bus {g.bus}")
        for ld in self.loads:
            if ld.bus not in known:
                raise NetworkValidationError(f"load at unknown bus {ld.bus}")
        for sh in self.shunts:
            if sh.bus not in known:
                raise NetworkValidationError(f"shunt at unknown bus {sh.bus}")
        for c in self.capacitors:
            if c.bus not in known:
                raise NetworkValidationError(f"capacitor {c.id}: unknown bus {c.bus}")
            if c.rated_kvar <= 0:
                raise NetworkValidationError(f"capacitor {c.id}: rated kVAr must be > 0")
        for bt in self.batteries:
            if bt.bus not in known:
                raise NetworkValidationError(f"battery {bt.id}: unknown bus {bt.bus}")
            if not 0.0 <= bt.soc <= 1.0:
                raise NetworkValidationError(f"battery {bt.id}: SoC {bt.soc} outside [0, 1]")
            if bt.mode not in BATTERY_MODES:
                raise NetworkValidationError(f"battery {bt.id}: bad mode {bt.mode!r}")
        device_ids = self.device_ids()
        if len(set(device_ids)) != len(device_ids):
            raise NetworkValidationError("duplicate device ids")
        return self

    # -- lookups ------------------------------------------------------------

    @property
    def slack_bus(self) -> Bus:
        return next(b for b in self.buses if b.type == "slack")

    def bus_index(self, bus_id: int) -> int:
        for i, b in enumerate(self.buses):
            if b.id == bus_id:
                return i
        raise UnknownDeviceError(f"unknown bus id {bus_id}")

    def device_ids(self) -> list[str]:
        """All controllable device ids: capacitors, regulating taps, batteries."""
        ids = [c.id for c in self.capacitors]
        ids += [t.id for t in self.transformers if t.regulating]
        ids += [b.id for b in self.batteries]
        return ids

    def capacitor(self, device_id: str) -> Capacitor:
        for c in self.capacitors:
            if c.id == device_id:
                return c
        raise UnknownDeviceError(f"unknown capacitor {device_id!r}")

    def transformer(self, device_id: str) -> Transformer:
        for t in self.transformers:
            if t.id == device_id:
                return t
        raise UnknownDeviceError(f"unknown transformer {device_id!r}")

    def battery(self, device_id: str) -> Battery:
        for b in self.batteries:
            if b.id == device_id:
                return b
        raise UnknownDeviceError(f"unknown battery {device_id!r}")

    # -- functional updates --------------------------------------------------

    def with_capacitor(self, device_id: str, on: bool) -> "PowerNetwork":
        caps = tuple(
            replace(c, on=on) if c.id == device_id else c for c in self.capacitors
        )
        self.capacitor(device_id)
        return replace(self, capacitors=caps)

    def with_tap(self, device_id: str, tap: int) -> "PowerNetwork":
        t = self.transformer(device_id)
        if not t.tap_min <= tap <= t.tap_max:
            raise NetworkValidationError(
                f"tap {tap} outside [{t.tap_min}, {t.tap_max}] for {device_id}"
            )
        xfmrs = tuple(
            replace(x, tap=tap) if x.id == device_id else x for x in self.transformers
        )
        return replace(self, transformers=xfmrs)

    def with_battery_power(self, device_id: str, power: float) -> "PowerNetwork":
        """Set the normalized battery power and integrate SoC over one
        control period. The request is truncated at the SoC boundary so the
        stored state always stays in [0, 1]."""
        if not -1.0 <= power <= 1.0:
            raise NetworkValidationError(f"battery power {power} outside [-1, 1]")
        b = self.battery(device_id)
        energy = power * b.p_max_mw * CONTROL_PERIOD_HOURS  # MWh removed from storage
        soc_next = b.soc - energy / b.capacity_mwh
        if soc_next < 0.0:
            # not enough energy: truncate the discharge
            energy = b.soc * b.capacity_mwh
            soc_next = 0.0
        elif soc_next > 1.0:
            # storage full: truncate the charge
            energy = (b.soc - 1.0) * b.capacity_mwh
            soc_next = 1.0
        effective = energy / (b.p_max_mw * CONTROL_PERIOD_HOURS) if b.p_max_mw else 0.0
        mode = "idle" if effective == 0.0 else ("discharge" if effective > 0 else "charge")
        batteries = tuple(
            replace(x, soc=soc_next, power=effective, mode=mode)
            if x.id == device_id
            else x
            for x in self.batteries
        )
        return replace(self, batteries=batteries)

    def with_branch_out(self, branch_index: int) -> "PowerNetwork":
        branches = tuple(
            replace(br, in_service=False) if i == branch_index else br
            for i, br in enumerate(self.branches)
        )
        return replace(self, branches=branches)

    def with_generator_out(self, gen_id: str) -> "PowerNetwork":
        gens = tuple(
            replace(g, in_service=False) if g.id == gen_id else g
            for g in self.generators
        )
        if not any(g.id == gen_id for g in self.generators):
            raise UnknownDeviceError(f"unknown generator {gen_id!r}")
        # A PV bus without an in-service generator reverts to PQ.
        out = next(g for g in gens if g.id == gen_id)
        buses = self.buses
        if not any(g.in_service and g.bus == out.bus for g in gens):
            buses = tuple(
                replace(b, type="pq") if b.id == out.bus and b.type == "pv" else b
                for b in self.buses
            )
        return replace(self, generators=gens, buses=buses)

    def with_dispatch_scale(self, factor: float) -> "PowerNetwork":
        """Scale non-slack generator dispatch, mirroring how generation
        follows the system load factor hour by hour."""
        slack_id = self.slack_bus.id
        gens = tuple(
            replace(g, p_mw=g.p_mw * factor) if g.bus != slack_id else g
            for g in self.generators
        )
        return replace(self, generators=gens)

    def find_branch(self, from_bus: int, to_bus: int) -> int:
        for i, br in enumerate(self.branches):
            if {br.from_bus, br.to_bus} == {from_bus, to_bus}:
                return i
        raise UnknownDeviceError(f"no branch between buses {from_bus} and {to_bus}")
