import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fields
from geoswarm.errors import DegenerateVelocity, InputError, NonFiniteState
from geoswarm.geodesic import (
    detect_conjugate,
    g_speed,
    geodesic_rhs,
    integrate,
    launch_state,
    march,
    orthonormal_launch,
)
from geoswarm.manifold import PotentialField, metric_at


def test_rhs_examples(flat, ell20, sincos2):
    np.testing.assert_array_equal(geodesic_rhs(flat, [0, 0, 1, 0]), [1, 0, 0, 0])
    np.testing.assert_allclose(geodesic_rhs(ell20, [1, 0, 1, 0]), [1, 0, -0.1 * 0.1 / 1.01, 0], atol=1e-15)
    np.testing.assert_array_equal(geodesic_rhs(sincos2, [0.3, 0.2, 0, 0]), 0.0)


def test_rhs_matches_christoffel_contraction(sincos2):
    s = np.array([0.4, -1.1, 0.6, 0.8])
    G = metric_at(sincos2, s[:2]).gamma
    acc = -np.einsum("kij,i,j->k", G, s[2:], s[2:])
    np.testing.assert_allclose(geodesic_rhs(sincos2, s)[2:], acc, rtol=1e-12)


def test_flat_straight_line(flat):
    path = integrate(flat, [0, 0, 1, 0], 5.0)
    np.testing.assert_allclose(path.states[-1], [5, 0, 1, 0], atol=1e-12)
    assert path.times[-1] == 5.0


def test_flat_geodesics_are_affine(flat):
    path = integrate(flat, [1.0, -2.0, 0.3, 0.7], 3.0, step=0.01)
    expected = np.array([1.0, -2.0]) + path.times[:, None] * [0.3, 0.7]
    np.testing.assert_allclose(path.positions, expected, atol=1e-12)


def test_symmetry_axis_is_geodesic(ell20):
    path = integrate(ell20, [0, 0, 1, 0], 2.0)
    assert np.max(np.abs(path.positions[:, 1])) <= 1e-12


def test_partial_last_step_lands_on_t_end(ell20):
    path = integrate(ell20, [0, 0, 1, 0], 1.0005, step=1e-3)
    assert path.times[-1] == 1.0005
    assert len(path) == 1002
    np.testing.assert_allclose(np.diff(path.times[:-1]), 1e-3, rtol=1e-9)


def test_sincos_speed_conserved(sincos2):
    s0 = [0, 0, np.cos(np.pi / 18), np.sin(np.pi / 18)]
    path = integrate(sincos2, s0, 20.0)
    assert g_speed(sincos2, path.states[-1]) == pytest.approx(g_speed(sincos2, path.states[0]), abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(
    fields,
    st.tuples(st.floats(-4, 4), st.floats(-4, 4)),
    st.floats(0, 2 * np.pi),
)
def test_speed_conservation_property(field, p, angle):
    s0 = launch_state(p, [np.cos(angle), np.sin(angle)])
    path = integrate(field, s0, 10.0, step=1e-2)
    speeds = g_speed(field, path.states)
    # 1e-6 per 10 time units at the default step; the coarser step here keeps the test quick
    assert np.max(np.abs(speeds - speeds[0])) <= 1e-6


def test_rk4_order(ell20):
    s0 = np.array([0.5, -0.5, 0.8, 0.6])
    T, h = 4.0, 0.04
    ref = integrate(ell20, s0, T, h / 16).states[-1, :2]
    e1 = np.linalg.norm(integrate(ell20, s0, T, h).states[-1, :2] - ref)
    e2 = np.linalg.norm(integrate(ell20, s0, T, h / 2).states[-1, :2] - ref)
    assert 12 <= e1 / e2 <= 20


@pytest.mark.parametrize("kind", ["elliptic_paraboloid", "hyperbolic_paraboloid", "sincos"])
def test_time_reversal(kind):
    field = PotentialField(kind, 2.0)
    s0 = np.array([0.3, 0.1, 0.6, -0.8])
    fwd = integrate(field, s0, 5.0).states[-1]
    back = integrate(field, np.concatenate([fwd[:2], -fwd[2:]]), 5.0).states[-1]
    np.testing.assert_allclose(back[:2], s0[:2], atol=1e-6)
    np.testing.assert_allclose(-back[2:], s0[2:], atol=1e-6)


def test_integrate_validation(flat):
    with pytest.raises(InputError):
        integrate(flat, [0, 0, 1, 0], -1.0)
    with pytest.raises(InputError):
        integrate(flat, [0, 0, 1, 0], 1.0, step=2.0)
    with pytest.raises(InputError):
        integrate(flat, [0, 0, 1], 1.0)


def test_blow_up_raises_nonfinite():
    # a huge step on a strongly curved surface overflows
    field = PotentialField("elliptic_paraboloid", 1e-3)
    with pytest.raises(NonFiniteState):
        march(field, np.array([1.0, 1.0, 1e3, 1e3]), 10.0, 50)


def test_launch_examples(flat, ell20):
    np.testing.assert_allclose(orthonormal_launch(flat, [0, 0], [1, 0]), [0, 0, 0, 1])
    np.testing.assert_allclose(orthonormal_launch(flat, [0, 0], [0, 2]), [0, 0, -1, 0])
    s = orthonormal_launch(ell20, [1, 0], [1, 0])
    g = np.array([[1.01, 0], [0, 1]])
    w = s[2:]
    np.testing.assert_allclose(w, [0, 1], atol=1e-15)
    assert w @ g @ [1, 0] == pytest.approx(0, abs=1e-15)
    assert w @ g @ w == pytest.approx(1)


@settings(max_examples=200, deadline=None)
@given(
    fields,
    st.tuples(st.floats(-6, 6), st.floats(-6, 6)),
    st.tuples(st.floats(-3, 3), st.floats(-3, 3)).filter(lambda v: np.hypot(*v) > 1e-3),
)
def test_launch_is_g_orthonormal_and_left(field, p, v):
    v = np.array(v)
    s = orthonormal_launch(field, p, v)
    g = metric_at(field, p).g
    w = s[2:]
    assert abs(w @ g @ v) <= 1e-9 * max(1.0, np.sqrt(v @ g @ v))
    assert w @ g @ w == pytest.approx(1, abs=1e-9)
    assert v[0] * w[1] - v[1] * w[0] > 0


def test_launch_degenerate(flat):
    with pytest.raises(DegenerateVelocity):
        orthonormal_launch(flat, [0, 0], [0, 0])


def test_detect_conjugate():
    d = 0.1
    assert detect_conjugate([(k * d, d) for k in range(10)], d) is None
    seq = [(0.0, d), (0.1, 0.5 * d), (0.2, 0.05 * d), (0.3, 0.2 * d)]
    assert detect_conjugate(seq, d) == 0.2
    with pytest.raises(InputError):
        detect_conjugate([], d)
