"""PMU measurement chain: instrument-transformer ratio errors, ADC quantization
of the three phase signals, and the positive-sequence transform."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from linecal.exceptions import CalibrationError

ALPHA = np.exp(2j * np.pi / 3)
# phase rotations of a balanced positive-sequence set (A, B, C)
PS_ROTATION = np.array([1.0, ALPHA**2, ALPHA])

# bounds on the positive-sequence correction factor (real, imag)
K_REAL_BOUNDS = (0.9452, 1.0526)
K_IMAG_BOUNDS = (-0.1005, 0.1005)


@dataclass(frozen=True)
class RatioBounds:
    magnitude: tuple[float, float] = (0.95, 1.05)
    angle_deg: tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self):
        for name in ("magnitude", "angle_deg"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"inverted {name} bounds: [{lo}, {hi}]")


@dataclass(frozen=True)
class RatioError:
    """Per-phase complex ratio errors of one CT or PT."""

    magnitude: tuple[float, float, float]
    angle_deg: tuple[float, float, float]

    @property
    def phases(self) -> np.ndarray:
        return np.asarray(self.magnitude) * np.exp(1j * np.deg2rad(np.asarray(self.angle_deg)))

    @classmethod
    def identity(cls) -> "RatioError":
        return cls((1.0, 1.0, 1.0), (0.0, 0.0, 0.0))

    @property
    def is_identity(self) -> bool:
        return self.magnitude == (1.0, 1.0, 1.0) and self.angle_deg == (0.0, 0.0, 0.0)

    def to_dict(self) -> dict:
        return {"magnitude": list(self.magnitude), "angle_deg": list(self.angle_deg)}

    @classmethod
    def from_dict(cls, d: dict) -> "RatioError":
        return cls(tuple(float(v) for v in d["magnitude"]), tuple(float(v) for v in d["angle_deg"]))


@dataclass(frozen=True)
class ChannelErrorSpec:
    ratio_error: RatioError
    scale: float | None  # ADC step in volts or amps; None disables quantization
    base: float  # volts or amps per pu

    def __post_init__(self):
        if self.scale is not None and not self.scale > 0:
            raise ValueError("quantization scale must be positive")
        if not self.base > 0:
            raise ValueError("physical base must be positive")


def sample_ratio_errors(seed: int, bounds: RatioBounds, channels: Sequence[Hashable]) -> dict:
    """Independent uniform per-phase draws for every channel, in the given order."""
    if len(channels) == 0:
        raise CalibrationError("no channels to sample ratio errors for")
    rng = np.random.default_rng(seed)
    out = {}
    for ch in channels:
        mag = rng.uniform(*bounds.magnitude, size=3)
        ang = rng.uniform(*bounds.angle_deg, size=3)
        out[ch] = RatioError(tuple(float(m) for m in mag), tuple(float(a) for a in ang))
    return out


def ps_ratio_error(re: RatioError, betas=None) -> complex:
    phases = re.phases
    if betas is None:
        return complex(phases.mean())
    betas = np.asarray(betas, dtype=complex)
    total = betas.sum()
    if abs(total) <= 1e-12 * np.abs(betas).sum():
        raise CalibrationError("beta weights sum to zero")
    return complex((betas * phases).sum() / total)


def correction_factor(re: RatioError) -> complex:
    """True correction factor: reciprocal of the balanced positive-sequence ratio error."""
    return 1.0 / ps_ratio_error(re)


def quantize(p, scale: float):
    """Round real and imaginary parts to multiples of ``scale``, halves away from zero."""
    if not scale > 0:
        raise ValueError("quantization scale must be positive")
    p = np.asarray(p, dtype=complex)

    def _round(v):
        return np.sign(v) * np.floor(np.abs(v) / scale + 0.5) * scale

    out = _round(p.real) + 1j * _round(p.imag)
    return complex(out) if out.ndim == 0 else out


def positive_sequence(abc: np.ndarray) -> np.ndarray:
    """PS component of ``(..., 3)`` phase data."""
    abc = np.asarray(abc, dtype=complex)
    return (abc[..., 0] + ALPHA * abc[..., 1] + ALPHA**2 * abc[..., 2]) / 3


def expand_phases(ps: np.ndarray, betas=None) -> np.ndarray:
    """Three-phase data ``(N, 3)`` from a PS series.

    Balanced (``betas is None``): +-120 degree shifts.  Otherwise phase ``k`` is
    ``betas[k] * ps * rotation[k]``; ``betas`` may be ``(3,)`` or ``(N, 3)``.
    """
    ps = np.asarray(ps, dtype=complex)
    if betas is None:
        return ps[:, None] * PS_ROTATION[None, :]
    betas = np.broadcast_to(np.asarray(betas, dtype=complex), (ps.shape[0], 3))
    return betas * ps[:, None] * PS_ROTATION[None, :]


def phase_betas(abc: np.ndarray) -> np.ndarray:
    """Per-frame betas reproducing ``abc`` exactly through :func:`expand_phases`."""
    abc = np.asarray(abc, dtype=complex)
    ps = positive_sequence(abc)
    return abc / (ps[:, None] * PS_ROTATION[None, :])


def simulate_channel(true_ps, spec: ChannelErrorSpec, transposed: bool = True, betas=None) -> np.ndarray:
    """Quantized PS measurement series (pu) for one channel."""
    true_ps = np.asarray(true_ps, dtype=complex)
    if true_ps.ndim != 1 or true_ps.size == 0:
        raise CalibrationError("channel series must be a non-empty 1-D array")
    if spec.base is None:
        raise CalibrationError("channel has no physical base")
    abc = expand_phases(true_ps, None if transposed else betas)
    abc = abc * spec.ratio_error.phases[None, :]
    if spec.scale is not None:
        abc = quantize(abc * spec.base, spec.scale) / spec.base
    return positive_sequence(abc)


def quantization_errors(true_ps, base: float, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Physical-unit quantization errors of a balanced series.

    Returns ``(phase_errors (N, 3), ps_errors (N,))`` as true minus quantized.
    """
    abc = expand_phases(np.asarray(true_ps, dtype=complex)) * base
    err = abc - quantize(abc, scale)
    return err, positive_sequence(err)


def partition_frames(series, portions: int) -> list:
    """Stride partition: portion ``p`` holds frames ``p, p+P, p+2P, ...``."""
    n = len(series)
    if portions < 1:
        raise ValueError("portion count must be at least 1")
    if n < portions:
        raise CalibrationError(f"cannot split {n} frames into {portions} portions")
    return [series[p::portions] for p in range(portions)]
