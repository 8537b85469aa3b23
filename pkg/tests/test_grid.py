import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from degdiff.grid import (
    Grid,
    cdf_edges,
    gaussian,
    integrate,
    l1_distance,
    l2_inner,
    linf_norm,
    read_field_csv,
    sample_inverse_cdf,
    total_variation,
    write_field_csv,
)


def test_grid_geometry():
    g = Grid(1.0, 4)
    assert g.h == 0.5
    np.testing.assert_array_equal(g.x, [-0.75, -0.25, 0.25, 0.75])
    np.testing.assert_array_equal(g.edges, [-1.0, -0.5, 0.0, 0.5, 1.0])
    np.testing.assert_allclose(g.x, -g.x[::-1])


@pytest.mark.parametrize("L, n", [(1.0, 2), (0.0, 10), (-1.0, 10)])
def test_invalid_grid(L, n):
    with pytest.raises(ValueError):
        Grid(L, n)


def test_field_rejects_nonfinite_and_bad_shape():
    g = Grid(1.0, 4)
    with pytest.raises(ValueError):
        g.field([0.0, np.nan, 0.0, 0.0])
    with pytest.raises(ValueError):
        g.field([0.0, 1.0])


def test_integrate_examples():
    g = Grid(0.5, 10)
    assert integrate(g.field(np.ones(10))) == pytest.approx(1.0, abs=1e-15)
    assert integrate(g.sample(lambda x: x)) == pytest.approx(0.0, abs=1e-15)
    big = Grid(10.0, 2000)
    assert abs(integrate(big.sample(lambda x: gaussian(x, 1.0))) - 1.0) <= 1e-6


@pytest.mark.parametrize(
    "values, expected",
    [([0, 0, 1, 1], 1.0), ([0, 1, 2, 3], 3.0), ([0, 0.5, 1, 0.5, 0], 2.0)],
)
def test_total_variation_examples(values, expected):
    assert total_variation(np.array(values, dtype=float)) == expected


def test_norm_examples():
    g = Grid(1.0, 8)
    assert l1_distance(g.field(np.zeros(8)), g.field(np.ones(8))) == pytest.approx(2.0)
    assert linf_norm(np.array([-3.0, 2.0])) == 3.0
    g4 = Grid(2.0, 10)
    assert l2_inner(g4.field(np.ones(10)), g4.field(np.ones(10))) == pytest.approx(4.0)
    with pytest.raises(TypeError):
        l1_distance(np.zeros(3), np.ones(3))


def test_inverse_cdf_examples():
    g = Grid(1.0, 20)
    uniform = g.sample(lambda x: ((x > 0) & (x < 1)).astype(float))
    assert sample_inverse_cdf(uniform, [0.25])[0] == pytest.approx(0.25, abs=1e-14)
    assert sample_inverse_cdf(uniform, [0.0])[0] == pytest.approx(0.0, abs=1e-14)
    gauss = Grid(10.0, 2000)
    med = sample_inverse_cdf(gauss.sample(lambda x: gaussian(x, 1.0)), [0.5])[0]
    assert abs(med) <= gauss.h


def test_inverse_cdf_rejects_bad_input():
    g = Grid(1.0, 10)
    with pytest.raises(ValueError):
        sample_inverse_cdf(g.field(np.zeros(10)), [0.5])
    with pytest.raises(ValueError):
        sample_inverse_cdf(g.field(np.ones(10)), [1.5])


def test_inverse_cdf_reproduces_gaussian_quantiles():
    from scipy.stats import norm

    g = Grid(8.0, 1600)
    d = g.sample(lambda x: gaussian(x, 1.0))
    q = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(sample_inverse_cdf(d, q), norm.ppf(q), atol=2 * g.h)


@given(arrays(float, 12, elements=st.floats(0.0, 5.0)), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=30))
def test_inverse_cdf_monotone_and_in_range(vals, qs):
    g = Grid(1.5, 12)
    if vals.sum() == 0:
        vals[3] = 1.0
    q = np.sort(qs)
    y = sample_inverse_cdf(g.field(vals), q)
    assert np.all(np.diff(y) >= -1e-15)
    assert np.all((y >= -g.L) & (y <= g.L))
    F = cdf_edges(g.field(vals))
    assert F[0] == 0.0 and F[-1] == 1.0


@given(
    arrays(float, 9, elements=st.floats(-10, 10)),
    arrays(float, 9, elements=st.floats(-10, 10)),
    st.floats(-3, 3),
)
def test_linearity_and_triangle(a, b, s):
    g = Grid(1.0, 9)
    assert integrate(g.field(a + s * b)) == pytest.approx(integrate(g.field(a)) + s * integrate(g.field(b)), abs=1e-10)
    assert total_variation(a + b) <= total_variation(a) + total_variation(b) + 1e-12


def test_csv_round_trip(tmp_path):
    g = Grid(1.0, 7)
    v = np.array([0.1, 1 / 3, 2.0, np.pi, 1e-300, -0.0, 5.5])
    path = tmp_path / "f.csv"
    write_field_csv(path, {"x": g.x, "value": v})
    assert path.read_text().splitlines()[0] == "x,value"
    back = read_field_csv(path)
    np.testing.assert_array_equal(back["value"], v)
    np.testing.assert_array_equal(back["x"], g.x)
