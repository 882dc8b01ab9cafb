"""Single-line estimation of R, X, y and the far-end correction factors.

The measured terminal quantities of a line obey ``V_M = Zhat @ I_M`` where

    Zhat = 1 / (y (W + 1)) * [[W KI_i/KV_i, KI_j/KV_i],
                              [KI_i/KV_j,   W KI_j/KV_j]],   W = 1 + Z y.

``Zhat`` is estimated by least squares on each stride portion of the data and
the portion results are averaged so the zero-mean quantization error cancels.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from linecal.exceptions import CalibrationError, IllConditionedError, SingularLineError
from linecal.numerics import complex_lse, condition_number
from linecal.pmu import partition_frames

LOW_CONFIDENCE_Y = 1e-6
LOW_CONFIDENCE_ZY = 1e-3


@dataclass(frozen=True)
class LineMeasurements:
    v_i: np.ndarray
    v_j: np.ndarray
    i_i: np.ndarray
    i_j: np.ndarray
    portions: int = 30

    def __post_init__(self):
        lengths = {len(self.v_i), len(self.v_j), len(self.i_i), len(self.i_j)}
        if len(lengths) != 1:
            raise CalibrationError("line measurement series have different lengths")


@dataclass
class LineEstimate:
    z_final: np.ndarray
    w: complex
    y_complex: complex
    r: float
    x: float
    y: float
    kv_j: complex
    ki_j: complex
    ki_j_check: complex
    low_confidence: bool = False
    x_nonpositive: bool = False
    diagnostics: dict = field(default_factory=dict)


def estimate_impedance_matrix(m: LineMeasurements, return_diagnostics: bool = False):
    a = np.column_stack([m.i_i, m.i_j])
    b = np.column_stack([m.v_i, m.v_j])
    parts_a = partition_frames(a, m.portions)
    parts_b = partition_frames(b, m.portions)
    estimates = []
    conds = []
    for k, (pa, pb) in enumerate(zip(parts_a, parts_b)):
        if pa.shape[0] < 2:
            raise CalibrationError(f"portion {k} has {pa.shape[0]} frame(s); need at least 2")
        try:
            estimates.append(complex_lse(pa, pb))
        except IllConditionedError as exc:
            raise IllConditionedError(f"portion {k}: regression matrix is rank deficient",
                                      exc.condition) from exc
        conds.append(condition_number(pa))
    stack = np.array(estimates)
    z_final = stack.mean(axis=0).T
    if not return_diagnostics:
        return z_final
    spread = stack.std(axis=0).T if len(estimates) > 1 else np.zeros((2, 2))
    return z_final, {"max_condition": float(max(conds)), "portion_spread": spread}


def recover_parameters(z_final, kv_i: complex = 1.0, ki_i: complex = 1.0) -> LineEstimate:
    z = np.asarray(z_final, dtype=complex)
    z11, z12, z21, z22 = z[0, 0], z[0, 1], z[1, 0], z[1, 1]
    if 0 in (z11, z12, z21, z22):
        raise SingularLineError("impedance matrix estimate has a zero entry")
    w = cmath.sqrt(z11 * z22 / (z21 * z12))
    if w.real < 0:
        w = -w
    if abs(w - 1) < 1e-12:
        raise SingularLineError("W is 1 to machine precision; zero-length line")
    kv_j = (1 / w) * (z11 / z21) * kv_i
    ki_j = w * (z12 / z11) * ki_i
    ki_j_check = (1 / w) * (z22 / z21) * ki_i
    det = z11 * z22 - z12 * z21
    y_sq = (1 / det) * (ki_i * ki_j) / (kv_i * kv_j) * (w - 1) / (w + 1)
    y_hat = cmath.sqrt(y_sq)
    if y_hat.imag < 0:
        y_hat = -y_hat
    z_line = (w - 1) / y_hat
    est = LineEstimate(
        z_final=z, w=complex(w), y_complex=complex(y_hat),
        r=float(z_line.real), x=float(z_line.imag), y=float(y_hat.imag),
        kv_j=complex(kv_j), ki_j=complex(ki_j), ki_j_check=complex(ki_j_check),
    )
    est.low_confidence = abs(y_hat) < LOW_CONFIDENCE_Y or abs(w - 1) < LOW_CONFIDENCE_ZY
    est.x_nonpositive = not est.x > 0
    return est


def estimate_line(m: LineMeasurements, kv_i: complex = 1.0, ki_i: complex = 1.0) -> LineEstimate:
    z_final, diag = estimate_impedance_matrix(m, return_diagnostics=True)
    est = recover_parameters(z_final, kv_i, ki_i)
    est.diagnostics.update(diag)
    return est


# the estimator does not depend on how the far-end data was produced
estimate_untransposed = estimate_line
