"""Carry calibration across a bus.

Voltage factors follow from the fact that every PT on a bus sees the same
voltage; current factors follow from KCL over all current channels of the
bus, solved as a box-constrained least squares problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from linecal.exceptions import CalibrationError, UnderdeterminedError
from linecal.numerics import RANK_TOL, box_qp
from linecal.pmu import K_IMAG_BOUNDS, K_REAL_BOUNDS, partition_frames

AT_BOUND_TOL = 1e-9


def propagate_voltage(kv_known: complex, v_known, v_target, portions: int = 30) -> complex:
    v_known = np.asarray(v_known, dtype=complex)
    v_target = np.asarray(v_target, dtype=complex)
    if v_known.shape != v_target.shape or v_known.size == 0:
        raise CalibrationError("voltage series must be non-empty and aligned")
    estimates = []
    for vk, vt in zip(partition_frames(v_known, portions), partition_frames(v_target, portions)):
        energy = float(np.sum(np.abs(vt) ** 2))
        if energy == 0:
            raise CalibrationError("target voltage series has zero energy")
        estimates.append(np.sum(np.conj(vt) * kv_known * vk) / energy)
    return complex(np.mean(estimates))


@dataclass
class CurrentChannel:
    key: Hashable
    series: np.ndarray
    known: complex | None = None
    group: Hashable | None = None  # parallel-group label; None for ungrouped


@dataclass
class BusContext:
    bus: str
    currents: list[CurrentChannel]


@dataclass
class PropagationResult:
    factors: dict
    at_bound: dict
    residual: float
    merged: dict = field(default_factory=dict)  # group label -> summed-channel factor
    portion_at_bound: float = 0.0  # share of portion solutions touching the box


@dataclass
class ParallelMerge:
    """Summation of the unknown members of one parallel group."""

    keys: list
    members: list[np.ndarray]

    def __post_init__(self):
        if len(self.members) < 2:
            raise CalibrationError("a parallel group needs at least two channels")

    @property
    def summed(self) -> np.ndarray:
        return np.sum(self.members, axis=0)

    def split(self, k_sum: complex) -> dict:
        """Per-line factors assuming the group's true current divides evenly."""
        per_line = k_sum * self.summed / len(self.members)
        return {key: _mean_ratio(per_line, series) for key, series in zip(self.keys, self.members)}


def _mean_ratio(true_current: np.ndarray, measured: np.ndarray) -> complex:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = true_current / measured
    return complex(np.mean(ratio[np.isfinite(ratio)]))


def _clip(k: complex) -> complex:
    return complex(np.clip(k.real, *K_REAL_BOUNDS), np.clip(k.imag, *K_IMAG_BOUNDS))


def merge_parallel(channels: list[CurrentChannel]) -> ParallelMerge:
    return ParallelMerge([c.key for c in channels], [np.asarray(c.series, dtype=complex) for c in channels])


def kcl_system(unknown: list[np.ndarray], rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real least squares form of ``sum_k K_k I_k = rhs``.

    Unknowns are ordered ``[Re K_1, Im K_1, Re K_2, ...]``; each frame yields a
    real-part row and an imaginary-part row.
    """
    n = len(rhs)
    g = np.empty((2 * n, 2 * len(unknown)))
    for c, series in enumerate(unknown):
        g[:n, 2 * c] = series.real
        g[:n, 2 * c + 1] = -series.imag
        g[n:, 2 * c] = series.imag
        g[n:, 2 * c + 1] = series.real
    h = np.concatenate([rhs.real, rhs.imag])
    return g, h


def _box(n_unknown: int) -> tuple[np.ndarray, np.ndarray]:
    lower = np.tile([K_REAL_BOUNDS[0], K_IMAG_BOUNDS[0]], n_unknown)
    upper = np.tile([K_REAL_BOUNDS[1], K_IMAG_BOUNDS[1]], n_unknown)
    return lower, upper


def _at_bound(k: complex) -> bool:
    return (min(abs(k.real - K_REAL_BOUNDS[0]), abs(k.real - K_REAL_BOUNDS[1])) <= AT_BOUND_TOL
            or min(abs(k.imag - K_IMAG_BOUNDS[0]), abs(k.imag - K_IMAG_BOUNDS[1])) <= AT_BOUND_TOL)


def propagate_currents(ctx: BusContext, portions: int = 30, merge: bool = True,
                       pooled: bool = False) -> PropagationResult:
    known = [c for c in ctx.currents if c.known is not None]
    unknown = [c for c in ctx.currents if c.known is None]
    if not unknown:
        raise CalibrationError(f"bus {ctx.bus}: every current factor is already known")
    if not known:
        raise CalibrationError(f"bus {ctx.bus}: no known current factor to propagate from")

    # unknown members of a partly calibrated parallel group share its known current
    via_group: dict = {}
    if merge:
        for ch in unknown:
            if ch.group is None:
                continue
            peers = [c for c in known if c.group == ch.group]
            if peers:
                true_current = np.mean([c.known * c.series for c in peers], axis=0)
                via_group[ch.key] = _mean_ratio(true_current, ch.series)
        if via_group:
            known = known + [CurrentChannel(c.key, c.series, via_group[c.key], c.group)
                             for c in unknown if c.key in via_group]
            unknown = [c for c in unknown if c.key not in via_group]
            if not unknown:
                factors = {k: _clip(v) for k, v in via_group.items()}
                return PropagationResult(factors, {k: _at_bound(v) for k, v in factors.items()}, 0.0)

    # columns of the regression: single channels or merged parallel groups
    columns: list[tuple[str, object]] = []
    seen_groups: set = set()
    for ch in unknown:
        if merge and ch.group is not None:
            if ch.group in seen_groups:
                continue
            members = [c for c in unknown if c.group == ch.group]
            if len(members) > 1:
                seen_groups.add(ch.group)
                columns.append(("group", merge_parallel(members)))
                continue
        columns.append(("single", ch))

    series = [col.summed if kind == "group" else col.series for kind, col in columns]
    rhs = -np.sum([c.known * c.series for c in known], axis=0)
    lower, upper = _box(len(columns))

    n_frames = len(rhs)
    effective = (n_frames // (1 if pooled else portions)) * 2
    if 2 * len(columns) > effective:
        raise UnderdeterminedError(f"bus {ctx.bus}: more unknowns than equations",
                                   [c.key for c in unknown])
    g_full, _ = kcl_system(series, rhs)
    s = np.linalg.svd(g_full, compute_uv=False)
    if s[-1] < RANK_TOL * s[0]:
        raise UnderdeterminedError(f"bus {ctx.bus}: KCL system is rank deficient",
                                   [c.key for c in unknown])

    if pooled:
        g, h = kcl_system(series, rhs)
        k = box_qp(g, h, lower, upper)
        portion_share = float(np.any((np.abs(k - lower) <= AT_BOUND_TOL) | (np.abs(k - upper) <= AT_BOUND_TOL)))
    else:
        stack = np.column_stack(series + [rhs])
        sols = []
        for part in partition_frames(stack, portions):
            g, h = kcl_system(list(part[:, :-1].T), part[:, -1])
            sols.append(box_qp(g, h, lower, upper))
        k = np.clip(np.mean(sols, axis=0), lower, upper)
        touching = [np.any((np.abs(sol - lower) <= AT_BOUND_TOL) | (np.abs(sol - upper) <= AT_BOUND_TOL))
                    for sol in sols]
        portion_share = float(np.mean(touching))

    factors: dict = {key: _clip(v) for key, v in via_group.items()}
    merged: dict = {}
    for c, (kind, col) in enumerate(columns):
        kc = complex(k[2 * c], k[2 * c + 1])
        if kind == "group":
            merged[col.keys[0]] = kc
            for key, kf in col.split(kc).items():
                factors[key] = _clip(kf)
        else:
            factors[col.key] = kc
    at_bound = {key: _at_bound(kf) for key, kf in factors.items()}

    total = np.sum([factors[c.key] * c.series for c in unknown], axis=0) - rhs
    residual = float(np.linalg.norm(total))
    return PropagationResult(factors, at_bound, residual, merged, portion_share)
