import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linecal.exceptions import CalibrationError, IllConditionedError
from linecal.numerics import box_qp, complex_lse, condition_number


def _random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_complex_lse_examples():
    b = np.array([[1 + 2j, 3], [4j, -1]])
    np.testing.assert_allclose(complex_lse(np.eye(2), b), b)
    assert complex_lse(np.array([[1], [1]]), np.array([[2], [4]]))[0, 0] == pytest.approx(3)
    x = complex_lse(np.array([[1], [1j]]), np.array([[1j], [1]]))
    assert abs(x[0, 0]) < 1e-15


def test_complex_lse_vector_rhs():
    rng = np.random.default_rng(0)
    a, b = _random_complex(rng, 10, 3), _random_complex(rng, 10)
    assert complex_lse(a, b).shape == (3,)


def test_complex_lse_square_is_exact():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, x = _random_complex(rng, 4, 4), _random_complex(rng, 4, 2)
        np.testing.assert_allclose(complex_lse(a, a @ x), x, rtol=1e-12 * condition_number(a))


def test_complex_lse_matches_normal_equations():
    rng = np.random.default_rng(2)
    a, b = _random_complex(rng, 60, 2), _random_complex(rng, 60, 2)
    oracle = np.linalg.solve(a.conj().T @ a, a.conj().T @ b)
    np.testing.assert_allclose(complex_lse(a, b), oracle, rtol=1e-12)


def test_complex_lse_errors():
    with pytest.raises(IllConditionedError) as err:
        complex_lse(np.array([[1, 2], [2, 4], [3, 6]]), np.ones(3))
    assert err.value.condition > 1e10
    with pytest.raises(CalibrationError):
        complex_lse(np.ones((1, 2)), np.ones(1))
    with pytest.raises(CalibrationError):
        complex_lse(np.eye(2), np.ones(3))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(3, 80), m=st.integers(1, 3))
def test_complex_lse_residual_orthogonal(seed, n, m):
    rng = np.random.default_rng(seed)
    a, b = _random_complex(rng, n, m), _random_complex(rng, n, 2)
    r = a @ complex_lse(a, b) - b
    assert np.linalg.norm(a.conj().T @ r) < 1e-10 * np.linalg.norm(a) * np.linalg.norm(b)


def test_box_qp_examples():
    assert box_qp([[1.0]], [2.0], [0.0], [1.0])[0] == pytest.approx(1.0)
    assert box_qp([[1.0]], [2.0], [0.0], [3.0])[0] == pytest.approx(2.0)
    k = box_qp([[1, 1], [1, -1]], [2, 0], [0, 0], [0.8, 0.8])
    np.testing.assert_allclose(k, [0.8, 0.8], atol=1e-12)


def test_box_qp_errors():
    with pytest.raises(CalibrationError):
        box_qp(np.eye(2), np.ones(2), [0, 1], [1, 0])
    with pytest.raises(CalibrationError):
        box_qp(np.eye(2), [np.nan, 1], [0, 0], [1, 1])
    with pytest.raises(CalibrationError):
        box_qp(np.eye(2), np.ones(2), [0], [1])


def _objective(g, h, k):
    r = g @ k - h
    return float(r @ r)


def test_box_qp_wide_bounds_match_unconstrained():
    rng = np.random.default_rng(3)
    for _ in range(20):
        g, h = rng.normal(size=(40, 6)), rng.normal(size=40)
        oracle = np.linalg.lstsq(g, h, rcond=None)[0]
        np.testing.assert_allclose(box_qp(g, h, -1e6 * np.ones(6), 1e6 * np.ones(6)), oracle, atol=1e-8)


def test_box_qp_dominates_random_feasible_points():
    rng = np.random.default_rng(4)
    g, h = rng.normal(size=(30, 4)), 3 * rng.normal(size=30)
    lo, hi = -0.5 * np.ones(4), 0.5 * np.ones(4)
    best = _objective(g, h, box_qp(g, h, lo, hi))
    pts = rng.uniform(lo, hi, size=(10_000, 4))
    values = np.sum((pts @ g.T - h) ** 2, axis=1)
    assert best <= values.min() + 1e-12


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 8))
def test_box_qp_kkt(seed, d):
    rng = np.random.default_rng(seed)
    g, h = rng.normal(size=(3 * d, d)), 2 * rng.normal(size=3 * d)
    lo = rng.uniform(-1, 0, d)
    hi = lo + rng.uniform(0, 1, d)
    k = box_qp(g, h, lo, hi)
    assert np.all(k >= lo) and np.all(k <= hi)
    grad = 2 * g.T @ (g @ k - h)
    scale = max(1.0, np.linalg.norm(g.T @ h))
    interior = (k > lo + 1e-12) & (k < hi - 1e-12)
    assert np.all(np.abs(grad[interior]) < 1e-8 * scale)
    assert np.all(grad[(k <= lo) & ~interior] >= -1e-8 * scale)
    assert np.all(grad[(k >= hi) & ~interior] <= 1e-8 * scale)


def test_box_qp_agrees_with_scipy_bvls():
    from scipy.optimize import lsq_linear

    rng = np.random.default_rng(11)
    for _ in range(50):
        g = rng.normal(size=(40, 8))
        h = rng.normal(size=40) * 3
        lower, upper = -rng.uniform(0.1, 1, 8), rng.uniform(0.1, 1, 8)
        ref = lsq_linear(g, h, bounds=(lower, upper), method="bvls").x
        k = box_qp(g, h, lower, upper)
        assert np.sum((g @ k - h) ** 2) <= np.sum((g @ ref - h) ** 2) + 1e-9
        np.testing.assert_allclose(k, ref, atol=1e-7)
