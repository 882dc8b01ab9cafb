"""End-to-end calibration run: simulate, walk, estimate, propagate, report."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from linecal import __version__
from linecal.estimator import LineMeasurements, estimate_line
from linecal.exceptions import CalibrationError, ConfigError
from linecal.network import INJECTION, NetworkModel, load_network, parallel_groups
from linecal.pmu import (ChannelErrorSpec, RatioBounds, RatioError, correction_factor,
                         quantization_errors, sample_ratio_errors, simulate_channel)
from linecal.propagation import (BusContext, CurrentChannel, propagate_currents,
                                 propagate_voltage)
from linecal.scenario import (Channel, LoadShape, branch_and_injection_currents,
                              generate_profiles)
from linecal.topology import VisitPlan, ebbfs

log = logging.getLogger(__name__)

REPORT_FILES = ("report.csv", "factors.csv", "plan.csv", "errors_hist.csv", "run.json")


@dataclass
class RunConfig:
    network: str | None = None
    seed: int = 0
    n_frames: int = 1800
    portions: int = 30
    magnitude_bounds: tuple[float, float] = (0.95, 1.05)
    angle_bounds_deg: tuple[float, float] = (-5.0, 5.0)
    quant_v: float | None = 12.0
    quant_i: float | None = 0.65
    frame_rate: int = 30
    ratio_errors: bool = True
    pin_injections: bool = False
    pooled_qp: bool = False
    merge_parallel: bool = True
    out_dir: str | None = None
    load_shape: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_frames < 2 or self.portions < 1 or self.frame_rate < 1:
            raise ConfigError("n_frames, portions and frame_rate must be positive")
        if self.portions > self.n_frames:
            raise ConfigError("portions cannot exceed n_frames")
        for name in ("quant_v", "quant_i"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        try:
            RatioBounds(tuple(self.magnitude_bounds), tuple(self.angle_bounds_deg))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def shape(self) -> LoadShape:
        data = {"frame_rate": self.frame_rate, **self.load_shape}
        return LoadShape.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["magnitude_bounds"] = list(self.magnitude_bounds)
        d["angle_bounds_deg"] = list(self.angle_bounds_deg)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("magnitude_bounds", "angle_bounds_deg"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class LineRow:
    order: int
    line: str
    from_bus: str
    to_bus: str
    level: int
    status: str  # ok | failed | skipped
    r_true: float
    x_true: float
    y_true: float
    r_est: float = float("nan")
    x_est: float = float("nan")
    y_est: float = float("nan")
    w: complex = complex("nan")
    max_condition: float = float("nan")
    low_confidence: bool = False
    x_nonpositive: bool = False
    message: str = ""

    @staticmethod
    def _rate(est, truth):
        return (est - truth) / truth * 100.0 if truth != 0 else float("nan")

    @property
    def r_err_pct(self):
        return self._rate(self.r_est, self.r_true)

    @property
    def x_err_pct(self):
        return self._rate(self.x_est, self.x_true)

    @property
    def y_err_pct(self):
        return self._rate(self.y_est, self.y_true)


@dataclass
class FactorRow:
    channel: Channel
    k_true: complex
    k_est: complex | None
    source: str
    at_bound: bool = False

    @property
    def error(self) -> complex | None:
        return None if self.k_est is None else self.k_est - self.k_true


@dataclass
class CalibrationReport:
    config: RunConfig
    plan: VisitPlan
    lines: list[LineRow]
    factors: list[FactorRow]
    ratio_errors: dict[Channel, RatioError]
    histogram: list[tuple[str, float, float, int]]
    wall_time_s: float = 0.0

    @property
    def partial(self) -> bool:
        return any(r.status != "ok" for r in self.lines)

    def line(self, lid: str) -> LineRow:
        return next(r for r in self.lines if r.line == lid)

    def factor(self, channel: Channel) -> FactorRow:
        return next(f for f in self.factors if f.channel == channel)


def _histogram(true_ps, base: float, scale: float | None) -> list[tuple[str, float, float, int]]:
    """Binned quantization errors (volts) of one voltage channel, bin width scale/20."""
    if scale is None:
        return []
    phase_err, ps_err = quantization_errors(true_ps, base, scale)
    width = scale / 20.0
    edges = np.arange(-20, 21) * width
    series = {}
    for p, name in enumerate("ABC"):
        series[f"V{name}_real"] = phase_err[:, p].real
        series[f"V{name}_imag"] = phase_err[:, p].imag
    series["VP_real"] = ps_err.real
    series["VP_imag"] = ps_err.imag
    rows = []
    for name, values in series.items():
        counts, _ = np.histogram(values, bins=edges)
        rows.extend((name, float(edges[b]), width, int(c)) for b, c in enumerate(counts))
    return rows


def _channel_specs(network: NetworkModel, channels, ratio_errors, cfg: RunConfig):
    specs = {}
    for ch in channels:
        base = network.level_base(ch.bus)
        if ch.quantity == "V":
            specs[ch] = ChannelErrorSpec(ratio_errors[ch], cfg.quant_v, base.v_base_volts)
        else:
            specs[ch] = ChannelErrorSpec(ratio_errors[ch], cfg.quant_i, base.i_base_amps)
    return specs


def run(config: RunConfig, network: NetworkModel | None = None) -> CalibrationReport:
    started = time.perf_counter()
    config.validate()
    if network is None:
        if config.network is None:
            raise ConfigError("no network given")
        network = load_network(config.network)

    profile_seed, error_seed = np.random.SeedSequence(config.seed).spawn(2)
    frames = generate_profiles(network, config.n_frames, int(profile_seed.generate_state(1)[0]),
                               config.shape())
    truth = branch_and_injection_currents(network, frames)
    true_series = truth.channels(network)
    channels = sorted(true_series)

    ref = network.reference
    sampled = sample_ratio_errors(int(error_seed.generate_state(1)[0]),
                                  RatioBounds(tuple(config.magnitude_bounds), tuple(config.angle_bounds_deg)),
                                  channels)
    ratio_errors = {}
    for ch in channels:
        exact = (not config.ratio_errors or ch.bus == ref
                 or (config.pin_injections and ch.element == INJECTION))
        ratio_errors[ch] = RatioError.identity() if exact else sampled[ch]

    specs = _channel_specs(network, channels, ratio_errors, config)
    meas = {ch: simulate_channel(true_series[ch], specs[ch], transposed=ch not in truth.betas,
                                 betas=truth.betas.get(ch))
            for ch in channels}

    plan = ebbfs(network, ref)
    known: dict[Channel, complex] = {}
    source: dict[Channel, str] = {}
    at_bound: dict[Channel, bool] = {}
    for ch in channels:
        if ch.bus == ref or (config.pin_injections and ch.element == INJECTION):
            known[ch] = 1.0 + 0j
            source[ch] = "reference" if ch.bus == ref else "pinned"
    calibrated = {ref}
    group_of = {lid: g[0] for g in parallel_groups(network) for lid in g}
    adj = network.adjacency()

    rows = []
    for order, entry in enumerate(plan):
        line = network.lines[entry.line]
        a, b, lid = entry.from_bus, entry.to_bus, entry.line
        row = LineRow(order, lid, a, b, entry.level, "ok", line.r, line.x, line.y)
        rows.append(row)
        kv_a, ki_a = known.get(Channel(a, lid, "V")), known.get(Channel(a, lid, "I"))
        if a not in calibrated or kv_a is None or ki_a is None:
            row.status = "skipped"
            row.message = f"bus {a} is not calibrated"
            continue
        try:
            m = LineMeasurements(meas[Channel(a, lid, "V")], meas[Channel(b, lid, "V")],
                                 meas[Channel(a, lid, "I")], meas[Channel(b, lid, "I")],
                                 config.portions)
            est = estimate_line(m, kv_a, ki_a)
        except CalibrationError as exc:
            row.status = "failed"
            row.message = f"line {lid}: {exc}"
            log.warning(row.message)
            continue
        row.r_est, row.x_est, row.y_est, row.w = est.r, est.x, est.y, est.w
        row.max_condition = est.diagnostics["max_condition"]
        row.low_confidence, row.x_nonpositive = est.low_confidence, est.x_nonpositive

        for ch, value in ((Channel(b, lid, "V"), est.kv_j), (Channel(b, lid, "I"), est.ki_j)):
            if ch not in known:
                known[ch] = value
                source[ch] = f"line:{lid}"
        if b in calibrated:
            continue
        try:
            _propagate_bus(b, lid, network, adj, meas, known, source, at_bound, group_of, config)
        except CalibrationError as exc:
            row.message = f"propagation at bus {b}: {exc}"
            log.warning(row.message)
            continue
        calibrated.add(b)

    factors = []
    for ch in channels:
        k_true = 1.0 + 0j if ratio_errors[ch].is_identity else correction_factor(ratio_errors[ch])
        factors.append(FactorRow(ch, complex(k_true), known.get(ch), source.get(ch, "unresolved"),
                                 at_bound.get(ch, False)))

    first_v = Channel(ref, adj[ref][0], "V")
    hist = _histogram(true_series[first_v], network.level_base(ref).v_base_volts, config.quant_v)
    return CalibrationReport(config, plan, rows, factors, ratio_errors, hist,
                             time.perf_counter() - started)


def _propagate_bus(bus, via, network, adj, meas, known, source, at_bound, group_of, config):
    kv_via = known[Channel(bus, via, "V")]
    for lid in adj[bus]:
        ch = Channel(bus, lid, "V")
        if ch not in known:
            known[ch] = propagate_voltage(kv_via, meas[Channel(bus, via, "V")], meas[ch], config.portions)
            source[ch] = f"voltage:{via}"

    elements = list(adj[bus])
    if network.injections.get(bus, True):
        elements.append(INJECTION)
    currents = []
    for el in elements:
        ch = Channel(bus, el, "I")
        currents.append(CurrentChannel(ch, meas[ch], known.get(ch), group_of.get(el)))
    if all(c.known is not None for c in currents):
        return
    result = propagate_currents(BusContext(bus, currents), config.portions,
                                merge=config.merge_parallel, pooled=config.pooled_qp)
    for ch, value in result.factors.items():
        known[ch] = value
        source[ch] = "kcl"
        at_bound[ch] = result.at_bound[ch]


# -- output --------------------------------------------------------------------

def _f(x) -> str:
    return repr(float(x))


def emit_report(report: CalibrationReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CalibrationError(f"cannot create output directory {out}: {exc}") from exc

    def writer(name):
        fh = open(out / name, "w", newline="", encoding="utf-8")
        return fh, csv.writer(fh, lineterminator="\n")

    paths = [out / name for name in REPORT_FILES]
    try:
        fh, w = writer("report.csv")
        with fh:
            w.writerow(["order", "line", "from_bus", "to_bus", "level", "status",
                        "r_true", "r_est", "r_err_pct", "x_true", "x_est", "x_err_pct",
                        "y_true", "y_est", "y_err_pct", "w_re", "w_im", "max_condition",
                        "low_confidence", "x_nonpositive", "message"])
            for r in report.lines:
                w.writerow([r.order, r.line, r.from_bus, r.to_bus, r.level, r.status,
                            _f(r.r_true), _f(r.r_est), _f(r.r_err_pct),
                            _f(r.x_true), _f(r.x_est), _f(r.x_err_pct),
                            _f(r.y_true), _f(r.y_est), _f(r.y_err_pct),
                            _f(r.w.real), _f(r.w.imag), _f(r.max_condition),
                            int(r.low_confidence), int(r.x_nonpositive), r.message])

        fh, w = writer("factors.csv")
        with fh:
            w.writerow(["bus", "element", "quantity", "k_true_re", "k_true_im",
                        "k_est_re", "k_est_im", "err_re", "err_im", "source", "at_bound"])
            for f in report.factors:
                est = f.k_est if f.k_est is not None else complex("nan")
                err = est - f.k_true
                w.writerow([f.channel.bus, f.channel.element, f.channel.quantity,
                            _f(f.k_true.real), _f(f.k_true.imag), _f(est.real), _f(est.imag),
                            _f(err.real), _f(err.imag), f.source, int(f.at_bound)])

        fh, w = writer("plan.csv")
        with fh:
            w.writerow(["order", "line", "from_bus", "to_bus", "level"])
            for k, e in enumerate(report.plan):
                w.writerow([k, e.line, e.from_bus, e.to_bus, e.level])

        fh, w = writer("errors_hist.csv")
        with fh:
            w.writerow(["series", "bin_left_v", "bin_width_v", "count"])
            for name, left, width, count in report.histogram:
                w.writerow([name, _f(left), _f(width), count])

        meta = {
            "version": __version__,
            "config": report.config.to_dict(),
            "seed": report.config.seed,
            "wall_time_s": report.wall_time_s,
            "status": {s: sum(r.status == s for r in report.lines) for s in ("ok", "failed", "skipped")},
            "ratio_errors": [{"bus": ch.bus, "element": ch.element, "quantity": ch.quantity,
                              **re.to_dict()} for ch, re in sorted(report.ratio_errors.items())],
        }
        (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise CalibrationError(f"cannot write report to {out}: {exc}") from exc
    return paths
