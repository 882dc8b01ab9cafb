"""Grid topology, per-unit bases and the positive-sequence pi-section line model.

Conventions
-----------
* ``y`` on a :class:`Line` is the shunt susceptance at *each* terminal, i.e. half
  of the total line charging.  As a complex admittance it enters the model as
  ``1j * y``.
* Terminal currents are positive when flowing from the bus into the line, at
  both ends.
* ``v_base_volts`` is the line-to-neutral base voltage and ``i_base_amps`` the
  matching line current base, so ``z_base = v_base_volts / i_base_amps``.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from linecal.exceptions import DegenerateModelError, InvalidLineError, NetworkError

INJECTION = "inj"


@dataclass(frozen=True)
class Bus:
    id: str
    voltage_base: float  # kV, line-to-line
    is_reference: bool = False

    def __post_init__(self):
        if not self.voltage_base > 0:
            raise NetworkError("voltage_base must be positive", self.id)


@dataclass(frozen=True)
class ThreePhaseParams:
    """Un-transposed line data in physical units (ohm, siemens)."""

    z_abc: np.ndarray
    y_abc: np.ndarray

    def __post_init__(self):
        for name in ("z_abc", "y_abc"):
            m = np.asarray(getattr(self, name), dtype=complex)
            if m.shape != (3, 3):
                raise ValueError(f"{name} must be 3x3")
            if not np.allclose(m, m.T, rtol=1e-12, atol=0.0):
                raise ValueError(f"{name} must be symmetric")
            object.__setattr__(self, name, m)

    def sequence_equivalent(self) -> tuple[complex, complex]:
        """Positive-sequence (Z1, Y1) of the fully transposed counterpart."""
        return _ps_of_matrix(self.z_abc), _ps_of_matrix(self.y_abc)


def _ps_of_matrix(m: np.ndarray) -> complex:
    self_avg = np.trace(m) / 3
    mutual_avg = (m.sum() - np.trace(m)) / 6
    return complex(self_avg - mutual_avg)


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    y: float
    three_phase: ThreePhaseParams | None = None

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise NetworkError("line connects a bus to itself", self.id)
        if not self.x > 0:
            raise NetworkError("line reactance must be positive", self.id)
        if self.y < 0:
            raise NetworkError("line susceptance must be non-negative", self.id)
        if self.id == INJECTION:
            raise NetworkError("line id is reserved for injection channels", self.id)

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)

    @property
    def y_shunt(self) -> complex:
        return 1j * self.y

    @property
    def endpoints(self) -> frozenset[str]:
        return frozenset((self.from_bus, self.to_bus))

    def other_end(self, bus: str) -> str:
        if bus == self.from_bus:
            return self.to_bus
        if bus == self.to_bus:
            return self.from_bus
        raise KeyError(f"bus {bus!r} is not an endpoint of line {self.id!r}")


@dataclass(frozen=True)
class LevelBase:
    v_base_volts: float
    i_base_amps: float

    @property
    def z_base_ohm(self) -> float:
        return self.v_base_volts / self.i_base_amps


@dataclass(frozen=True)
class Bases:
    mva_base: float = 100.0
    levels: dict[float, LevelBase] = field(default_factory=dict)

    def for_kv(self, kv: float) -> LevelBase:
        if kv in self.levels:
            return self.levels[kv]
        return LevelBase(
            v_base_volts=kv * 1e3 / math.sqrt(3),
            i_base_amps=self.mva_base * 1e6 / (math.sqrt(3) * kv * 1e3),
        )


@dataclass(frozen=True)
class NetworkModel:
    buses: dict[str, Bus]
    lines: dict[str, Line]
    bases: Bases = field(default_factory=Bases)
    injections: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        refs = [b.id for b in self.buses.values() if b.is_reference]
        if len(refs) != 1:
            raise NetworkError(f"expected exactly one reference bus, found {len(refs)}",
                               ",".join(refs) if refs else None)
        for line in self.lines.values():
            for end in (line.from_bus, line.to_bus):
                if end not in self.buses:
                    raise NetworkError(f"line {line.id!r} references unknown bus", end)
            if self.buses[line.from_bus].voltage_base != self.buses[line.to_bus].voltage_base:
                raise NetworkError("line joins different voltage levels", line.id)
        unreachable = self._unreachable_buses()
        if unreachable:
            raise NetworkError("network is disconnected", unreachable[0])
        inj = {b: True for b in self.buses}
        inj.update(self.injections)
        object.__setattr__(self, "injections", inj)

    def _unreachable_buses(self) -> list[str]:
        if not self.buses:
            return []
        adj = self.adjacency()
        start = self.reference
        seen = {start}
        queue = deque([start])
        while queue:
            b = queue.popleft()
            for lid in adj[b]:
                o = self.lines[lid].other_end(b)
                if o not in seen:
                    seen.add(o)
                    queue.append(o)
        return sorted(set(self.buses) - seen)

    @property
    def reference(self) -> str:
        return next(b.id for b in self.buses.values() if b.is_reference)

    def adjacency(self) -> dict[str, list[str]]:
        """Bus id -> sorted ids of incident lines."""
        adj: dict[str, list[str]] = {b: [] for b in self.buses}
        for line in self.lines.values():
            adj[line.from_bus].append(line.id)
            adj[line.to_bus].append(line.id)
        return {b: sorted(ls) for b, ls in adj.items()}

    def degree(self, bus: str) -> int:
        return sum(1 for line in self.lines.values() if bus in line.endpoints)

    def level_base(self, bus: str) -> LevelBase:
        return self.bases.for_kv(self.buses[bus].voltage_base)

    def parallel_groups(self) -> list[list[str]]:
        return parallel_groups(self)


def parallel_groups(network: NetworkModel) -> list[list[str]]:
    """Groups (size >= 2) of lines sharing the same unordered endpoint pair."""
    by_pair: dict[frozenset[str], list[str]] = defaultdict(list)
    for line in network.lines.values():
        by_pair[line.endpoints].append(line.id)
    groups = [sorted(ids) for ids in by_pair.values() if len(ids) > 1]
    return sorted(groups)


def impedance_matrix(z: complex, y: complex) -> np.ndarray:
    """2x2 matrix mapping terminal currents to terminal voltages.

    Singular for ``y == 0``; use :func:`terminal_currents` for the forward model.
    """
    if y == 0:
        raise DegenerateModelError("impedance form is singular for y = 0; use terminal_currents")
    w = 1 + z * y
    return np.array([[w, 1], [1, w]], dtype=complex) / (y * (2 + z * y))


def admittance_matrix(z: complex, y: complex) -> np.ndarray:
    if z == 0:
        raise InvalidLineError("series impedance must be nonzero")
    w = 1 + z * y
    return np.array([[w, -1], [-1, w]], dtype=complex) / z


def terminal_currents(z: complex, y: complex, v_i, v_j):
    """Currents into the line at both terminals. Works elementwise on arrays."""
    if z == 0:
        raise InvalidLineError("series impedance must be nonzero")
    v_i = np.asarray(v_i, dtype=complex)
    v_j = np.asarray(v_j, dtype=complex)
    w = 1 + z * y
    i_i = (w * v_i - v_j) / z
    i_j = (w * v_j - v_i) / z
    if i_i.ndim == 0:
        return complex(i_i), complex(i_j)
    return i_i, i_j


# -- file format ---------------------------------------------------------------

def _parse_matrix(raw, name: str, line_id: str) -> np.ndarray:
    try:
        m = np.array([[complex(re, im) for re, im in row] for row in raw], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise NetworkError(f"{name} must be a 3x3 array of [re, im] pairs", line_id) from exc
    return m


def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def network_from_dict(data: dict) -> NetworkModel:
    if not isinstance(data, dict) or "buses" not in data or "lines" not in data:
        raise NetworkError("network file must contain 'buses' and 'lines'")
    buses: dict[str, Bus] = {}
    injections: dict[str, bool] = {}
    for raw in data["buses"]:
        try:
            bus = Bus(str(raw["id"]), float(raw["voltage_base_kv"]), bool(raw.get("is_reference", False)))
        except KeyError as exc:
            raise NetworkError(f"bus entry missing field {exc.args[0]!r}", str(raw.get("id"))) from exc
        if bus.id in buses:
            raise NetworkError("duplicate bus id", bus.id)
        buses[bus.id] = bus
        injections[bus.id] = bool(raw.get("injection", True))

    lines: dict[str, Line] = {}
    for raw in data["lines"]:
        lid = str(raw.get("id"))
        try:
            three = None
            if "z_abc_ohm" in raw or "y_abc_siemens" in raw:
                try:
                    three = ThreePhaseParams(
                        _parse_matrix(raw["z_abc_ohm"], "z_abc_ohm", lid),
                        _parse_matrix(raw["y_abc_siemens"], "y_abc_siemens", lid),
                    )
                except ValueError as exc:
                    raise NetworkError(str(exc), lid) from exc
            line = Line(lid, str(raw["from"]), str(raw["to"]), float(raw["r_pu"]),
                        float(raw["x_pu"]), float(raw["y_pu"]), three)
        except KeyError as exc:
            raise NetworkError(f"line entry missing field {exc.args[0]!r}", lid) from exc
        if line.id in lines:
            raise NetworkError("duplicate line id", line.id)
        lines[line.id] = line

    raw_bases = data.get("bases", {})
    levels = {}
    for kv, lvl in raw_bases.get("levels", {}).items():
        levels[float(kv)] = LevelBase(float(lvl["v_base_volts"]), float(lvl["i_base_amps"]))
    bases = Bases(float(raw_bases.get("mva_base", 100.0)), levels)
    # fill in every voltage level so the model carries explicit bases
    for bus in buses.values():
        levels.setdefault(bus.voltage_base, bases.for_kv(bus.voltage_base))
    return NetworkModel(buses, lines, Bases(bases.mva_base, levels), injections)


def load_network(path: str | Path) -> NetworkModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise NetworkError(f"cannot read network file: {exc}", str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"network file is not valid JSON ({exc})", str(path)) from exc
    return network_from_dict(data)


def network_to_dict(network: NetworkModel) -> dict:
    buses = []
    for b in network.buses.values():
        entry = {"id": b.id, "voltage_base_kv": b.voltage_base, "is_reference": b.is_reference}
        if not network.injections.get(b.id, True):
            entry["injection"] = False
        buses.append(entry)
    lines = []
    for ln in network.lines.values():
        entry = {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
                 "r_pu": ln.r, "x_pu": ln.x, "y_pu": ln.y}
        if ln.three_phase is not None:
            entry["z_abc_ohm"] = _matrix_to_json(ln.three_phase.z_abc)
            entry["y_abc_siemens"] = _matrix_to_json(ln.three_phase.y_abc)
        lines.append(entry)
    levels = {f"{kv:g}": {"v_base_volts": lb.v_base_volts, "i_base_amps": lb.i_base_amps}
              for kv, lb in sorted(network.bases.levels.items())}
    return {"buses": buses, "lines": lines,
            "bases": {"mva_base": network.bases.mva_base, "levels": levels}}


def save_network(network: NetworkModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(network), indent=2) + "\n", encoding="utf-8")


def build_network(buses: Iterable[tuple], lines: Iterable[tuple], mva_base: float = 100.0) -> NetworkModel:
    """Convenience constructor.

    ``buses``: ``(id, kv, is_reference)``; ``lines``: ``(id, from, to, r, x, y)``.
    """
    return network_from_dict({
        "buses": [{"id": b[0], "voltage_base_kv": b[1], "is_reference": b[2]} for b in buses],
        "lines": [{"id": l[0], "from": l[1], "to": l[2], "r_pu": l[3], "x_pu": l[4], "y_pu": l[5]}
                  for l in lines],
        "bases": {"mva_base": mva_base},
    })
