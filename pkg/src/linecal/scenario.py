"""Synthetic, electrically consistent operating points.

Bus voltages are sampled directly and every current follows from the line
equations, so line relations and KCL hold to rounding error without a power
flow solver.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from linecal.exceptions import CalibrationError, NetworkError
from linecal.network import INJECTION, NetworkModel, terminal_currents
from linecal.pmu import phase_betas, positive_sequence, PS_ROTATION


class Channel(NamedTuple):
    """Measurement channel: ``element`` is a line id or ``INJECTION``."""

    bus: str
    element: str
    quantity: str  # "V" or "I"


@dataclass(frozen=True)
class LoadShape:
    ramp: tuple[float, float] | None = (0.98, 1.03)
    perturbation_std: float = 0.002
    angle_spread_deg: float = 10.0
    angle_jitter_deg: float = 0.5
    # off-nominal frequency rotating every absolute phase angle; part of the trend
    drift_hz: float = 0.0
    bus_offset: float = 0.01
    frame_rate: int = 30

    def __post_init__(self):
        for name in ("perturbation_std", "angle_spread_deg", "angle_jitter_deg", "bus_offset"):
            if getattr(self, name) < 0:
                raise CalibrationError(f"{name} must be non-negative")
        if self.frame_rate < 1:
            raise CalibrationError("frame_rate must be positive")

    def to_dict(self) -> dict:
        return {"ramp": list(self.ramp) if self.ramp else None,
                "perturbation_std": self.perturbation_std,
                "angle_spread_deg": self.angle_spread_deg,
                "angle_jitter_deg": self.angle_jitter_deg,
                "drift_hz": self.drift_hz, "bus_offset": self.bus_offset,
                "frame_rate": self.frame_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "LoadShape":
        d = dict(d)
        if d.get("ramp") is not None:
            d["ramp"] = tuple(d["ramp"])
        return cls(**d)


@dataclass(frozen=True)
class VoltageFrames:
    frame_times: np.ndarray
    voltages: dict[str, np.ndarray]

    @property
    def n_frames(self) -> int:
        return len(self.frame_times)


@dataclass(frozen=True)
class TrueMeasurementSet:
    frames: VoltageFrames
    branch: dict[tuple[str, str], np.ndarray]  # (line, bus) -> current into the line
    injection: dict[str, np.ndarray]
    # per-frame phase weights for channels whose three phases are unbalanced
    betas: dict[Channel, np.ndarray] = field(default_factory=dict)

    def channels(self, network: NetworkModel) -> dict[Channel, np.ndarray]:
        out: dict[Channel, np.ndarray] = {}
        adj = network.adjacency()
        for bus in sorted(network.buses):
            for lid in adj[bus]:
                out[Channel(bus, lid, "V")] = self.frames.voltages[bus]
                out[Channel(bus, lid, "I")] = self.branch[(lid, bus)]
            if network.injections.get(bus, True):
                out[Channel(bus, INJECTION, "I")] = self.injection[bus]
        return out


def frame_times(n_frames: int, frame_rate: int) -> np.ndarray:
    """First second of each minute, ``frame_rate`` frames per second."""
    k = np.arange(n_frames)
    return 60.0 * (k // frame_rate) + (k % frame_rate) / frame_rate


def _bus_angles(network: NetworkModel, rng: np.random.Generator, spread_deg: float) -> dict[str, float]:
    """Static angles from a DC-flow pattern with random injections, scaled to the spread."""
    buses = sorted(network.buses)
    ref = network.reference
    if spread_deg == 0 or len(buses) == 1:
        return {b: 0.0 for b in buses}
    idx = {b: i for i, b in enumerate(buses)}
    n = len(buses)
    bmat = np.zeros((n, n))
    for line in network.lines.values():
        i, j = idx[line.from_bus], idx[line.to_bus]
        w = 1.0 / line.x
        bmat[i, i] += w
        bmat[j, j] += w
        bmat[i, j] -= w
        bmat[j, i] -= w
    p = rng.normal(size=n)
    p -= p.mean()
    keep = [i for i in range(n) if i != idx[ref]]
    theta = np.zeros(n)
    theta[keep] = np.linalg.solve(bmat[np.ix_(keep, keep)], p[keep])
    peak = np.max(np.abs(theta))
    if peak > 0:
        theta *= np.deg2rad(spread_deg) / peak
    return {b: float(theta[idx[b]]) for b in buses}


def generate_profiles(network: NetworkModel, n_frames: int, seed: int,
                      load_shape: LoadShape | None = None) -> VoltageFrames:
    shape = load_shape or LoadShape()
    if n_frames < 2:
        raise CalibrationError("need at least two frames")
    rng = np.random.default_rng(seed)
    times = frame_times(n_frames, shape.frame_rate)
    if shape.ramp is not None:
        trend = np.linspace(shape.ramp[0], shape.ramp[1], n_frames)
        drift = 2 * np.pi * shape.drift_hz * times
    else:
        trend = np.ones(n_frames)
        drift = np.zeros(n_frames)
    angles = _bus_angles(network, rng, shape.angle_spread_deg)
    jitter = np.deg2rad(shape.angle_jitter_deg)
    voltages = {}
    for bus in sorted(network.buses):
        offset = rng.uniform(-shape.bus_offset, shape.bus_offset)
        mag = trend + offset + shape.perturbation_std * rng.standard_normal(n_frames)
        ang = angles[bus] + drift + rng.uniform(-jitter, jitter, n_frames)
        voltages[bus] = mag * np.exp(1j * ang)
    return VoltageFrames(times, voltages)


def untransposed_far_end(v_abc_i, i_abc_i, z_abc, y_abc):
    """Far-end three-phase voltage and current (into the line) of an
    un-transposed line.  Physical units; arrays may carry a leading frame axis."""
    z_abc = np.asarray(z_abc, dtype=complex)
    y_abc = np.asarray(y_abc, dtype=complex)
    for name, m in (("z_abc", z_abc), ("y_abc", y_abc)):
        if m.shape != (3, 3) or not np.allclose(m, m.T, rtol=1e-12, atol=0.0):
            raise CalibrationError(f"{name} must be a symmetric 3x3 matrix")
    v_i = np.asarray(v_abc_i, dtype=complex)
    i_i = np.asarray(i_abc_i, dtype=complex)
    i_ser = i_i - v_i @ y_abc.T
    v_j = v_i - i_ser @ z_abc.T
    i_j = -i_ser + v_j @ y_abc.T
    return v_j, i_j


def branch_and_injection_currents(network: NetworkModel, frames: VoltageFrames) -> TrueMeasurementSet:
    missing = sorted(set(network.buses) - set(frames.voltages))
    if missing:
        raise CalibrationError(f"missing voltage series for buses {missing}")
    voltages = dict(frames.voltages)
    betas: dict[Channel, np.ndarray] = {}
    branch: dict[tuple[str, str], np.ndarray] = {}

    # un-transposed lines first: they overwrite the far-end bus voltage
    for line in sorted(network.lines.values(), key=lambda l: l.id):
        if line.three_phase is None:
            continue
        near, far = line.from_bus, line.to_bus
        if network.degree(far) != 1:
            if network.degree(near) == 1:
                near, far = far, near
            else:
                raise NetworkError("un-transposed lines need a radial (degree-1) end", line.id)
        base = network.level_base(near)
        i_near = terminal_currents(line.z, line.y_shunt, voltages[near], voltages[far])[0]
        v_abc = voltages[near][:, None] * PS_ROTATION[None, :] * base.v_base_volts
        i_abc = i_near[:, None] * PS_ROTATION[None, :] * base.i_base_amps
        v_far_abc, i_far_abc = untransposed_far_end(v_abc, i_abc, line.three_phase.z_abc,
                                                    line.three_phase.y_abc)
        voltages[far] = positive_sequence(v_far_abc) / base.v_base_volts
        branch[(line.id, near)] = i_near
        branch[(line.id, far)] = positive_sequence(i_far_abc) / base.i_base_amps
        betas[Channel(far, line.id, "V")] = phase_betas(v_far_abc)
        betas[Channel(far, line.id, "I")] = phase_betas(i_far_abc)
        betas[Channel(far, INJECTION, "I")] = phase_betas(-i_far_abc)

    for line in network.lines.values():
        if line.three_phase is not None:
            continue
        i_i, i_j = terminal_currents(line.z, line.y_shunt, voltages[line.from_bus], voltages[line.to_bus])
        branch[(line.id, line.from_bus)] = i_i
        branch[(line.id, line.to_bus)] = i_j

    adj = network.adjacency()
    injection = {}
    for bus in network.buses:
        total = np.zeros(frames.n_frames, dtype=complex)
        for lid in adj[bus]:
            total = total + branch[(lid, bus)]
        injection[bus] = -total
    return TrueMeasurementSet(VoltageFrames(frames.frame_times, voltages), branch, injection, betas)


def write_measurements_csv(path: str | Path, frames: VoltageFrames, series: dict[Channel, np.ndarray],
                           is_truth: bool) -> None:
    """One row per (frame, channel): frame, time_s, bus, element, quantity, re, im, is_truth."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "time_s", "bus", "element", "quantity", "re", "im", "is_truth"])
        for ch in sorted(series):
            values = series[ch]
            for k, (t, v) in enumerate(zip(frames.frame_times, values)):
                w.writerow([k, repr(float(t)), ch.bus, ch.element, ch.quantity,
                            repr(float(v.real)), repr(float(v.imag)), int(is_truth)])
