"""Bundled example networks."""

from __future__ import annotations

import numpy as np

from linecal.network import NetworkModel, network_from_dict

REF_LINE = (0.00175, 0.0202, 0.404)

# 345 kV subsystem of the IEEE 118-bus case; y is half the total line charging
IEEE118_345KV_LINES = [
    ("68-81", "81", "68", 0.00175, 0.0202, 0.404),
    ("65-68", "68", "65", 0.00138, 0.0160, 0.319),
    ("38-65", "65", "38", 0.00901, 0.0986, 0.523),
    ("64-65", "65", "64", 0.00269, 0.0302, 0.190),
    ("30-38", "38", "30", 0.00464, 0.0540, 0.211),
    ("63-64", "64", "63", 0.00172, 0.0200, 0.108),
    ("8-30", "30", "8", 0.00431, 0.0504, 0.257),
    ("26-30", "30", "26", 0.00799, 0.0860, 0.454),
    ("8-9", "8", "9", 0.00244, 0.0305, 0.581),
    ("9-10", "9", "10", 0.00258, 0.0322, 0.615),
]

_DESK_PARAMS = [
    (0.00175, 0.0202, 0.404), (0.00138, 0.0160, 0.319), (0.00244, 0.0305, 0.581),
    (0.00258, 0.0322, 0.615), (0.00269, 0.0302, 0.190), (0.00431, 0.0504, 0.257),
    (0.00464, 0.0540, 0.211), (0.00799, 0.0860, 0.454), (0.00901, 0.0986, 0.523),
]

DESK_SHORT_LINE = "L12"
DESK_PARALLEL_PAIR = ("L07a", "L07b")

_DESK_TOPOLOGY = [
    ("L01", 1, 2), ("L02", 1, 3), ("L03", 2, 3), ("L04", 2, 4), ("L05", 3, 5),
    ("L06", 4, 5), ("L07a", 4, 6), ("L07b", 4, 6), ("L08", 5, 7), ("L09", 6, 7),
    ("L10", 6, 8), ("L11", 7, 9), ("L12", 8, 9), ("L13", 8, 10), ("L14", 9, 11),
    ("L15", 10, 12), ("L16", 11, 12), ("L17", 10, 11),
]

# Un-transposed 345 kV line, ohm and siemens per phase
Z_ABC_OHM = np.array([
    [8.5922 + 61.0128j, 4.1208 + 27.6955j, 4.0940 + 23.9696j],
    [4.1208 + 27.6955j, 8.5131 + 61.0865j, 4.0932 + 27.7693j],
    [4.0940 + 23.9696j, 4.0932 + 27.7693j, 8.4612 + 61.1171j],
])
Y_ABC_SIEMENS = 1j * np.array([
    [1.0913e-04, -1.6076e-05, -1.6076e-05],
    [-1.6076e-05, 1.0544e-04, -2.4244e-05],
    [-1.6076e-05, -2.4244e-05, 1.0544e-04],
])


def _bus(bid, ref=False, kv=345.0):
    return {"id": str(bid), "voltage_base_kv": kv, "is_reference": ref}


def _line(lid, a, b, r, x, y):
    return {"id": lid, "from": str(a), "to": str(b), "r_pu": r, "x_pu": x, "y_pu": y}


def _bases():
    return {"mva_base": 100.0}


def single_line_dict() -> dict:
    return {"buses": [_bus(81, True), _bus(68)],
            "lines": [_line("68-81", 81, 68, *REF_LINE)],
            "bases": _bases()}


def untransposed_line_dict(mva_base: float = 100.0, kv: float = 345.0) -> dict:
    z_base = kv**2 / mva_base
    z1 = (Z_ABC_OHM.trace() / 3) - (Z_ABC_OHM.sum() - Z_ABC_OHM.trace()) / 6
    y1 = (Y_ABC_SIEMENS.trace() / 3) - (Y_ABC_SIEMENS.sum() - Y_ABC_SIEMENS.trace()) / 6
    line = _line("UT1", 1, 2, z1.real / z_base, z1.imag / z_base, y1.imag * z_base)
    line["z_abc_ohm"] = [[[v.real, v.imag] for v in row] for row in Z_ABC_OHM]
    line["y_abc_siemens"] = [[[v.real, v.imag] for v in row] for row in Y_ABC_SIEMENS]
    return {"buses": [_bus(1, True, kv), _bus(2, False, kv)], "lines": [line],
            "bases": {"mva_base": mva_base}}


def ieee118_345kv_dict() -> dict:
    buses = sorted({b for ln in IEEE118_345KV_LINES for b in ln[1:3]}, key=int)
    return {"buses": [_bus(b, b == "81") for b in buses],
            "lines": [_line(*ln) for ln in IEEE118_345KV_LINES],
            "bases": _bases()}


def desk_mesh_dict() -> dict:
    lines = []
    for k, (lid, a, b) in enumerate(_DESK_TOPOLOGY):
        r, x, y = _DESK_PARAMS[k % len(_DESK_PARAMS)]
        if lid == DESK_PARALLEL_PAIR[1]:
            r, x, y = _DESK_PARAMS[(k - 1) % len(_DESK_PARAMS)]
        if lid == DESK_SHORT_LINE:
            r, x, y = REF_LINE[0] / 5, REF_LINE[1] / 5, REF_LINE[2] / 50
        lines.append(_line(lid, a, b, r, x, y))
    return {"buses": [_bus(b, b == 1) for b in range(1, 13)], "lines": lines, "bases": _bases()}


def triangle_dict() -> dict:
    return {"buses": [_bus(1, True), _bus(2), _bus(3)],
            "lines": [_line("e12", 1, 2, *REF_LINE),
                      _line("e13", 1, 3, 0.00244, 0.0305, 0.581),
                      _line("e23", 2, 3, 0.00258, 0.0322, 0.615)],
            "bases": _bases()}


def four_cycle_dict() -> dict:
    return {"buses": [_bus(b, b == 1) for b in range(1, 5)],
            "lines": [_line("e12", 1, 2, *REF_LINE),
                      _line("e23", 2, 3, 0.00138, 0.0160, 0.319),
                      _line("e34", 3, 4, 0.00244, 0.0305, 0.581),
                      _line("e14", 1, 4, 0.00431, 0.0504, 0.257)],
            "bases": _bases()}


PRESETS = {
    "ieee118-345kv": ieee118_345kv_dict,
    "desk-mesh": desk_mesh_dict,
    "single-line": single_line_dict,
    "untransposed-line": untransposed_line_dict,
    "triangle": triangle_dict,
    "four-cycle": four_cycle_dict,
}


def preset(name: str) -> NetworkModel:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return network_from_dict(factory())
