import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotsig.cameron_martin import (
    GridFunction,
    cm_factor,
    cm_gram,
    cm_norm_discrete,
    concat_grid_paths,
    dirichlet_norm,
    rescale_check,
    uniform_grid,
)


@pytest.mark.parametrize("H", [0.3, 0.5, 0.75])
def test_gram_positive_definite(H):
    assert np.linalg.eigvalsh(cm_gram(uniform_grid(32), H)).min() > 0
    assert cm_factor(uniform_grid(32), H)[1] == 0.0


@pytest.mark.parametrize("H", [0.3, 0.5, 0.75])
def test_reproducing_property(rng, H):
    grid = np.sort(rng.uniform(0.05, 2.0, 12))
    G = cm_gram(grid, H)
    for j in range(grid.size):
        h = GridFunction(grid, G[:, j], H)
        assert cm_norm_discrete(h) == pytest.approx(np.sqrt(G[j, j]), rel=1e-10)
    # kernel combination sum_j a_j R(., t_j) has squared norm a^T G a
    a = rng.standard_normal((grid.size, 2))
    h = GridFunction(grid, G @ a, H)
    assert cm_norm_discrete(h) ** 2 == pytest.approx(np.sum(a * (G @ a)), rel=1e-9)


def test_brownian_linear_path_has_unit_norm(rng):
    for grid in (uniform_grid(7), np.append(np.sort(rng.uniform(0, 1, 9)), 1.0)):
        h = GridFunction(grid, grid, 0.5)
        assert cm_norm_discrete(h) == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 40))
def test_brownian_norm_is_dirichlet_energy(seed, m):
    rng = np.random.default_rng(seed)
    grid = np.cumsum(rng.uniform(0.01, 1.0, m))
    h = GridFunction(grid, rng.standard_normal((m, 2)), 0.5)
    assert cm_norm_discrete(h) == pytest.approx(dirichlet_norm(h), rel=1e-12)


def test_refinement_is_monotone(rng):
    for H in (0.3, 0.75):
        for _ in range(5):
            a, b = rng.standard_normal(2)
            f = lambda t: np.sin(3 * a * t) + b * t**2  # noqa: E731
            coarse = GridFunction(uniform_grid(16), f(uniform_grid(16)), H)
            fine = GridFunction(uniform_grid(32), f(uniform_grid(32)), H)
            assert cm_norm_discrete(coarse) <= cm_norm_discrete(fine) * (1 + 1e-10)


def test_rescaling_examples(rng):
    h = GridFunction(uniform_grid(10), uniform_grid(10), 0.5)
    rep = rescale_check(h, 2.0)
    assert rep.ratio == pytest.approx(0.5**0.5, rel=1e-10)
    g = GridFunction(uniform_grid(20), rng.standard_normal((20, 3)), 0.75)
    rep = rescale_check(g, 4.0)
    assert abs(rep.ratio - 4.0**-0.75) < 1e-10
    assert rep.expected == pytest.approx(4.0**-0.75)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), H=st.floats(0.1, 0.9), T2=st.floats(0.1, 10.0))
def test_rescaling_is_exact(seed, H, T2):
    rng = np.random.default_rng(seed)
    g = GridFunction(np.cumsum(rng.uniform(0.05, 0.5, 8)), rng.standard_normal((8, 2)), H)
    rep = rescale_check(g, T2)
    assert abs(rep.ratio - rep.expected) < 1e-10


def test_concatenation_is_bounded(rng):
    ratios = []
    for _ in range(100):
        H = rng.uniform(0.3, 0.9)
        h1 = GridFunction(uniform_grid(8, rng.uniform(0.5, 2)), rng.standard_normal((8, 2)), H)
        h2 = GridFunction(uniform_grid(8, rng.uniform(0.5, 2)), rng.standard_normal((8, 2)), H)
        joined = concat_grid_paths(h1, h2)
        assert joined.T == pytest.approx(h1.T + h2.T)
        assert np.allclose(joined.endpoint, h1.endpoint + h2.endpoint)
        ratios.append(cm_norm_discrete(joined) / (cm_norm_discrete(h1) + cm_norm_discrete(h2)))
    assert np.all(np.isfinite(ratios)) and max(ratios) < 10


def test_concatenation_of_brownian_controls_adds_energies(rng):
    h1 = GridFunction(uniform_grid(6), rng.standard_normal((6, 2)), 0.5)
    h2 = GridFunction(uniform_grid(4, 2.0), rng.standard_normal((4, 2)), 0.5)
    joined = concat_grid_paths(h1, h2)
    assert cm_norm_discrete(joined) ** 2 == pytest.approx(cm_norm_discrete(h1) ** 2 + cm_norm_discrete(h2) ** 2)


def test_validation():
    with pytest.raises(ValueError):
        GridFunction([0.0, 1.0], [1.0, 2.0], 0.5)
    with pytest.raises(ValueError):
        GridFunction([0.5, 1.0], [1.0], 0.5)
    with pytest.raises(ValueError):
        GridFunction([0.5, 1.0], [1.0, 2.0], 1.5)
    h = GridFunction([1.0], [1.0], 0.5)
    with pytest.raises(ValueError):
        concat_grid_paths(h, GridFunction([1.0], [1.0], 0.6))
    with pytest.raises(ValueError):
        rescale_check(h, -1.0)


def test_jitter_is_reported(caplog):
    grid = 1.0 + 1e-12 * np.arange(4)
    with caplog.at_level("WARNING"):
        L, jitter = cm_factor(grid, 0.9)
    assert jitter > 0
    assert "jitter" in caplog.text
    assert np.all(np.isfinite(L))
