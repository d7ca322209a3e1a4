import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from regmod.errors import ConfigError, NoExactFormula, UsageError
from regmod.model import (
    PLQTable,
    as_point,
    catalog_names,
    evaluate,
    get_instance,
    load_instance,
    min_norm_subgradient,
    random_subgradient,
    reference_level,
    sampling_coordinates,
    smooth_gradient,
    subdiff_distance,
    unvec_bilinear,
    vec_bilinear,
)

# closed-form values frozen from tests/oracles/derive.py


def test_zq3_point_values(inst):
    f = inst("zq3")
    x = [1.1, 0.9, 0.0]
    assert evaluate(f, x) == pytest.approx(0.02, abs=1e-15)
    assert evaluate(f, [1.0, 1.0, 1.0]) == math.inf
    np.testing.assert_allclose(smooth_gradient(f, x), [0.2, -0.2, 0.0], atol=1e-15)
    assert subdiff_distance(f, x) == pytest.approx(0.28284271247461901, rel=1e-14)


def test_lasso_and_quartic_values(inst):
    lasso = inst("lasso-toy")
    assert evaluate(lasso, [0.0]) == pytest.approx(0.5)
    assert subdiff_distance(lasso, [0.8]) == pytest.approx(0.3, abs=1e-15)
    assert subdiff_distance(lasso, [0.5]) == 0.0
    assert subdiff_distance(lasso, [0.0]) == pytest.approx(0.5)
    q = inst("quartic-gap")
    assert evaluate(q, [0.0]) == -1.0
    assert evaluate(q, [0.5]) == pytest.approx(0.0625)
    assert subdiff_distance(q, [0.1]) == pytest.approx(0.004, rel=1e-12)
    assert subdiff_distance(q, [0.0]) == 0.0
    assert reference_level(q, [0.0]) == 0.0
    assert reference_level(lasso, [0.5]) == evaluate(lasso, [0.5])


def test_subdiff_distance_off_domain_is_infinite(inst):
    assert subdiff_distance(inst("zq3"), [1.0, 1.0, 1.0]) == math.inf
    assert subdiff_distance(inst("zq3-nonneg"), [1.0, -1.0, 0.0]) == math.inf


def test_partial_support_has_no_formula(inst):
    with pytest.raises(NoExactFormula):
        subdiff_distance(inst("zq3"), [1.0, 0.0, 0.0])
    with pytest.raises(NoExactFormula):
        min_norm_subgradient(inst("sparsity-indicator"), [1.0, 0.0, 0.0, 0.0])


def test_as_point_validates(inst):
    with pytest.raises(UsageError):
        as_point(inst("zq3"), [1.0, 2.0])
    with pytest.raises(UsageError):
        as_point(inst("zq3"), [1.0, np.nan, 0.0])


def test_catalog_loads_every_instance():
    names = catalog_names()
    for must in ("zq3", "zq3-nonneg", "bilinear-4x4", "lasso-toy", "quartic-gap", "half-square", "abs",
                 "neg-half-square", "sparsity-indicator"):
        assert must in names
    for name in names:
        inst = get_instance(name)
        again = load_instance(inst.to_config())
        assert again.source == inst.source


def test_get_instance_accepts_a_path(tmp_path):
    path = tmp_path / "mine.json"
    path.write_text(json.dumps({"family": "quadratic", "name": "mine", "M": [[2.0]]}))
    inst = get_instance(str(path))
    assert inst.name == "mine" and inst.L == pytest.approx(2.0)


def test_asymmetric_matrix_is_symmetrized():
    a = load_instance({"family": "quadratic", "M": [[1.0, 2.0], [0.0, 1.0]]})
    b = load_instance({"family": "quadratic", "M": [[1.0, 1.0], [1.0, 1.0]]})
    x = np.array([0.3, -1.7])
    assert evaluate(a, x) == pytest.approx(evaluate(b, x))
    np.testing.assert_allclose(smooth_gradient(a, x), smooth_gradient(b, x))


@pytest.mark.parametrize(
    "cfg, path",
    [
        ({"family": "zero-norm-quadratic", "M": [[1.0]], "kappa0": 1, "colour": 1}, "colour"),
        ({"family": "zero-norm-quadratic", "M": [[1.0, 0], [0, 1.0]], "kappa0": 3}, "kappa0"),
        ({"family": "nope", "M": [[1.0]]}, "family"),
        ({"family": "zero-norm-quadratic", "M": np.eye(25).tolist(), "kappa0": 2}, "p"),
        ({"family": "plq-least-squares", "A": [[1.0]], "b": [0.0],
          "plq": {"breaks": [0.0], "pieces": [[0, 0, 0], [0, 1, 1]]}}, "plq.breaks[0]"),
        ({"family": "plq-least-squares", "A": [[1.0]], "b": [0.0],
          "plq": {"breaks": [0.0], "pieces": [[0, 1, 0], [0, -1, 0]]}}, "plq.breaks[0]"),
    ],
)
def test_config_errors_name_the_field(cfg, path):
    with pytest.raises(ConfigError) as err:
        load_instance(cfg)
    assert err.value.path == path


def test_premise_defaults_follow_convexity(inst):
    assert inst("half-square").premises.continuous_on_crit
    assert inst("lasso-toy").convex and inst("lasso-toy").premises.crit_local_min
    assert not inst("neg-half-square").convex
    assert not inst("quartic-gap").premises.continuous_on_crit
    assert not inst("bilinear-4x4").premises.crit_local_min


def test_bilinear_vectorization_matches_matrix_form(inst, rng):
    f = inst("bilinear-4x4")
    A = np.ones((4, 4))
    for _ in range(20):
        U, V = rng.standard_normal((4, 1)), rng.standard_normal((4, 1))
        x = vec_bilinear(U, V)
        U2, V2 = unvec_bilinear(f, x)
        np.testing.assert_array_equal(U, U2)
        np.testing.assert_array_equal(V, V2)
        assert f.smooth.value(x) == pytest.approx(float(np.trace(U.T @ A @ V)), abs=1e-12)
    x = vec_bilinear(np.array([[1.0], [-1.0], [0], [0]]), np.array([[1.0], [-1.0], [0], [0]]))
    assert evaluate(f, x) == pytest.approx(0.0, abs=1e-12)
    assert evaluate(f, x + 0.1) == math.inf


def _domain_point(inst, rng):
    """A random point inside dom f (on-manifold with full support for the indicators)."""
    x = rng.uniform(-1.5, 1.5, inst.p)
    ns = inst.nonsmooth
    if ns.indicator:
        out = np.zeros(inst.p)
        for idx, level in ns.blocks:
            keep = rng.choice(np.asarray(idx), size=min(level, len(idx)), replace=False)
            out[keep] = x[keep]
        x = np.abs(out) if ns.kind == "sparsity-nonneg" else out
    return x


@pytest.mark.parametrize("name", catalog_names())
def test_gradient_matches_central_differences(name, rng):
    f = get_instance(name)
    h = 1e-5
    for _ in range(25):
        x = _domain_point(f, rng)
        g = f.smooth.grad(x)
        fd = np.array([(f.smooth.value(x + h * e) - f.smooth.value(x - h * e)) / (2 * h) for e in np.eye(f.p)])
        assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("name", catalog_names())
def test_subgradients_have_the_reported_distance(name, rng):
    f = get_instance(name)
    for _ in range(25):
        x = _domain_point(f, rng)
        try:
            d = subdiff_distance(f, x)
        except NoExactFormula:
            continue
        v = min_norm_subgradient(f, x)
        assert np.linalg.norm(v) == pytest.approx(d, abs=1e-12)
        w = random_subgradient(f, x, rng)
        assert np.linalg.norm(w) >= d - 1e-12


def test_sampling_coordinates(inst):
    assert sampling_coordinates(inst("zq3"), [1, 1, 0]).tolist() == [0, 1]
    assert sampling_coordinates(inst("lasso-toy"), [0.5]).tolist() == [0]
    assert sampling_coordinates(inst("bilinear-4x4"), [1, -1, 0, 0, 1, -1, 0, 0]).tolist() == [0, 1, 4, 5]


finite = st.floats(-5, 5, allow_nan=False)


@given(z=finite, tau=st.floats(0.05, 3.0))
def test_plq_prox_beats_a_dense_grid(z, tau):
    table = PLQTable((-1.0, 1.0), ((0.0, -1.0, -0.5), (1.0, 0.0, 0.0), (0.0, 1.0, -0.5)))
    table.validate()
    u = table.prox(z, tau)
    obj = lambda t: table.value(t) + (t - z) ** 2 / (2 * tau)
    grid = np.linspace(-8, 8, 16001)
    assert obj(u) <= min(obj(t) for t in grid) + 1e-12
    # first-order condition: (z - u)/tau lies in the subdifferential at u
    lo, hi = table.derivative_interval(u)
    assert lo - 1e-9 <= (z - u) / tau <= hi + 1e-9


def test_l1_table_matches_abs():
    t = PLQTable.l1(0.7)
    t.validate()
    for v in (-2.0, -0.1, 0.0, 0.4, 3.0):
        assert t.value(v) == pytest.approx(0.7 * abs(v))
    assert t.derivative_interval(0.0) == (-0.7, 0.7)
