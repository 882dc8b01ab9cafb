import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linecal.exceptions import CalibrationError
from linecal.pmu import (ALPHA, ChannelErrorSpec, RatioBounds, RatioError, correction_factor,
                         expand_phases, partition_frames, phase_betas, positive_sequence,
                         ps_ratio_error, quantize, sample_ratio_errors, simulate_channel)

V_BASE = 345e3 / np.sqrt(3)
mags = st.tuples(*[st.floats(0.9, 1.1)] * 3)
angs = st.tuples(*[st.floats(-10.0, 10.0)] * 3)


def _balanced_series(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.95, 1.05, n) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))


def test_collapsed_bounds_give_identity():
    out = sample_ratio_errors(3, RatioBounds((1.0, 1.0), (0.0, 0.0)), ["a", "b"])
    for re in out.values():
        np.testing.assert_array_equal(re.phases, np.ones(3))


def test_sampling_is_deterministic():
    chans = [("1", "L", "V"), ("1", "L", "I")]
    assert sample_ratio_errors(42, RatioBounds(), chans) == sample_ratio_errors(42, RatioBounds(), chans)
    assert sample_ratio_errors(42, RatioBounds(), chans) != sample_ratio_errors(43, RatioBounds(), chans)


def test_sampling_moments():
    out = sample_ratio_errors(0, RatioBounds(), list(range(10_000 // 3 + 1)))
    m = np.array([re.magnitude for re in out.values()]).ravel()
    a = np.array([re.angle_deg for re in out.values()]).ravel()
    assert m.min() >= 0.95 and m.max() <= 1.05
    assert a.min() >= -5.0 and a.max() <= 5.0
    assert abs(m.mean() - 1.0) < 0.002


def test_sampling_errors():
    with pytest.raises(CalibrationError):
        sample_ratio_errors(0, RatioBounds(), [])
    with pytest.raises(ValueError):
        RatioBounds((1.05, 0.95), (-5.0, 5.0))


def test_ratio_error_serialization():
    re = RatioError((1.01, 0.99, 1.0), (0.5, -0.5, 1.0))
    assert RatioError.from_dict(re.to_dict()) == re
    assert RatioError.identity().is_identity and not re.is_identity


def test_ps_ratio_error_examples():
    assert ps_ratio_error(RatioError.identity()) == 1
    re = RatioError((1.05, 0.95, 1.00), (0.0, 0.0, 0.0))
    assert ps_ratio_error(re) == pytest.approx(1.0, abs=1e-15)
    assert correction_factor(re) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(CalibrationError):
        ps_ratio_error(re, [1, ALPHA, ALPHA**2])


def test_ps_ratio_error_weighted_by_hand():
    re = RatioError((1.02, 0.98, 1.0), (0.0, 0.0, 0.0))
    assert ps_ratio_error(re, [2, 1, 1]) == pytest.approx((2 * 1.02 + 0.98 + 1.0) / 4)


@settings(max_examples=100, deadline=None)
@given(m=mags, a=angs, b=st.complex_numbers(min_magnitude=0.1, max_magnitude=10))
def test_equal_betas_reduce_to_mean(m, a, b):
    re = RatioError(m, a)
    assert ps_ratio_error(re, [b, b, b]) == pytest.approx(ps_ratio_error(re), rel=1e-13)


@pytest.mark.parametrize("p, scale, expected", [
    (30.4 + 5.9j, 12, 36 + 0j),
    (0j, 7, 0j),
    (-6 + 6j, 12, -12 + 12j),
    (18 - 18j, 12, 24 - 24j),
])
def test_quantize_examples(p, scale, expected):
    assert quantize(p, scale) == expected


def test_quantize_rejects_bad_scale():
    with pytest.raises(ValueError):
        quantize(1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(re=st.floats(-1e6, 1e6), im=st.floats(-1e6, 1e6), scale=st.floats(0.01, 100))
def test_quantize_properties(re, im, scale):
    q = quantize(complex(re, im), scale)
    assert abs(q.real - re) <= scale / 2 * (1 + 1e-9)
    assert abs(q.imag - im) <= scale / 2 * (1 + 1e-9)
    assert quantize(q, scale) == pytest.approx(q, abs=1e-9 * scale)
    assert quantize(-complex(re, im), scale) == -q


def test_sequence_transform_round_trip():
    ps = _balanced_series(50)
    np.testing.assert_allclose(positive_sequence(expand_phases(ps)), ps, rtol=1e-15)
    abc = np.random.default_rng(1).normal(size=(50, 3)) + 1j * np.random.default_rng(2).normal(size=(50, 3))
    np.testing.assert_allclose(expand_phases(positive_sequence(abc), phase_betas(abc)), abc, rtol=1e-12)


def test_identity_chain():
    ps = _balanced_series(1000)
    spec = ChannelErrorSpec(RatioError.identity(), None, V_BASE)
    assert np.max(np.abs(simulate_channel(ps, spec) - ps)) < 1e-14


def test_tiny_scale_approaches_identity():
    ps = _balanced_series(1000)
    spec = ChannelErrorSpec(RatioError.identity(), 1e-9, V_BASE)
    assert np.max(np.abs(simulate_channel(ps, spec) - ps)) < 1e-12


def test_mean_ratio_error_cancels():
    ps = _balanced_series(200)
    spec = ChannelErrorSpec(RatioError((1.05, 0.95, 1.00), (0.0, 0.0, 0.0)), None, V_BASE)
    np.testing.assert_allclose(simulate_channel(ps, spec) / ps, 1.0, atol=1e-14)


def test_ratio_error_scales_balanced_input():
    ps = _balanced_series(200)
    re = RatioError((1.03, 0.97, 1.01), (2.0, -1.0, 4.0))
    spec = ChannelErrorSpec(re, None, V_BASE)
    np.testing.assert_allclose(simulate_channel(ps, spec), ps * ps_ratio_error(re), rtol=1e-14)


def test_quantization_envelope():
    ps = _balanced_series(20_000)
    spec = ChannelErrorSpec(RatioError.identity(), 12.0, V_BASE)
    err = simulate_channel(ps, spec) - ps
    assert np.max(np.abs(err)) <= 12.0 / (2 * V_BASE) * np.sqrt(2)


def test_untransposed_uses_betas():
    ps = _balanced_series(30)
    betas = np.array([1.1, 0.9, 1.0])
    spec = ChannelErrorSpec(RatioError((1.02, 0.98, 1.0), (1.0, -1.0, 0.0)), None, V_BASE)
    out = simulate_channel(ps, spec, transposed=False, betas=betas)
    expected = positive_sequence(expand_phases(ps, betas) * spec.ratio_error.phases)
    np.testing.assert_allclose(out, expected, rtol=1e-14)


def test_channel_spec_invariants():
    with pytest.raises(ValueError):
        ChannelErrorSpec(RatioError.identity(), 0.0, V_BASE)
    with pytest.raises(ValueError):
        ChannelErrorSpec(RatioError.identity(), 12.0, 0.0)
    with pytest.raises(CalibrationError):
        simulate_channel(np.array([]), ChannelErrorSpec(RatioError.identity(), 12.0, V_BASE))


def test_partition_frames():
    parts = partition_frames(np.arange(1800), 30)
    assert len(parts) == 30 and all(len(p) == 60 for p in parts)
    np.testing.assert_array_equal(parts[1][:3], [1, 31, 61])
    np.testing.assert_array_equal(partition_frames(np.arange(5), 1)[0], np.arange(5))
    assert [len(p) for p in partition_frames(np.arange(7), 3)] == [3, 2, 2]
    np.testing.assert_array_equal(partition_frames(np.arange(7), 3)[0], [0, 3, 6])
    with pytest.raises(CalibrationError):
        partition_frames(np.arange(2), 3)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 300), p=st.integers(1, 40))
def test_partition_is_disjoint_cover(n, p):
    if n < p:
        return
    parts = partition_frames(np.arange(n), p)
    assert sorted(np.concatenate(parts).tolist()) == list(range(n))
