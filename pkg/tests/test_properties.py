import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from qtraj import fields
from qtraj.finsler import ExtendedState, cartan_tensor, constant_q, lambda_fn, metric
from qtraj.finsler.geometry import bordered_hessian

finite = st.floats(-3.0, 3.0, allow_nan=False)
speed = st.floats(0.2, 2.0)
sign = st.sampled_from([-1.0, 1.0])


@st.composite
def states(draw):
    n = draw(st.integers(1, 3))
    q = [draw(finite) for _ in range(n)]
    qdot = [draw(speed) * draw(sign) for _ in range(n)]
    return ExtendedState.from_parts(draw(finite), q, qdot, draw(st.floats(0.5, 2.0)))


@settings(max_examples=60, deadline=None)
@given(states(), st.floats(-3.0, -0.1), st.floats(0.1, 10.0))
def test_lambda_homogeneity_and_metric_contraction(s, P, k):
    oracle = constant_q(s.n, P)
    L = lambda_fn(s, oracle)
    assert np.isclose(lambda_fn(s.scaled(k), oracle), k * L, rtol=1e-12)
    me = metric(s, oracle)
    assert np.allclose(me.g, me.g.T)
    assert np.isclose(s.y @ me.g @ s.y, L * L, rtol=1e-9)
    assert np.max(np.abs(np.einsum("abc,c->ab", cartan_tensor(s), s.y))) < 1e-9 * max(1.0, np.max(np.abs(me.g)))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-3.0, 3.0), st.floats(0.3, 3.0), st.floats(-5.0, 5.0))
def test_bordered_determinant_is_never_positive(u, w, m, P):
    d = np.linalg.det(bordered_hessian(u, w, m, P))
    scale = max(1.0, (m / u) * (0.5 * m * w * w / u**2 + abs(P)) ** 2)
    assert d <= 1e-9 * scale


@settings(max_examples=25, deadline=None)
@given(st.integers(8, 20), st.integers(8, 20), st.floats(-1e3, 1e3), st.integers(0, 2**32 - 1))
def test_snapshot_round_trip_is_bit_exact(nx, ny, t, seed):
    import tempfile
    from pathlib import Path

    g = fields.grid((nx, ny), (float(nx), 2.0 * ny))
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(nx, ny)) + 1j * rng.normal(size=(nx, ny))
    with tempfile.TemporaryDirectory() as d:
        p = fields.write_snapshot(Path(d) / "s.qsnap", v, g, t)
        back, g2, t2, _ = fields.read_snapshot(p)
    assert np.array_equal(back, v) and t2 == t and g2.shape == g.shape


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.floats(-1.0, 1.0))
def test_interpolation_reproduces_bilinear_functions(p, c):
    g = fields.grid((16, 16), (32.0, 32.0), origin=(-16.0, -16.0))
    x, y = g.mesh()
    f = c * x * y + 2.0 * x - y
    got = fields.interpolate(f, g, np.array([p]))[0]
    assert np.isclose(got, c * p[0] * p[1] + 2.0 * p[0] - p[1], atol=1e-9)
