import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from regmod.errors import CapabilityError, InsufficientData, UsageError
from regmod.estimators import (
    check_luo_tseng,
    check_prox_regularity,
    divergence_check,
    estimate_all,
    estimate_kl,
    estimate_quadratic_growth,
    estimate_subregularity,
    sample_cloud,
)
from regmod.model import evaluate

RADII = (0.2, 0.1, 0.05)


@pytest.fixture(scope="module")
def zq3_bundle():
    from regmod.model import get_instance

    return estimate_all(sample_cloud(get_instance("zq3"), [1, 1, 0], RADII, 512, 7))


def test_cloud_shape_and_containment(inst):
    f = inst("zq3")
    cloud = sample_cloud(f, [1, 1, 0], RADII, 128, 7)
    assert len(cloud) == 384
    dist = np.linalg.norm(cloud.points - cloud.base, axis=1)
    assert np.all(dist <= RADII[0] + 1e-12) and np.all(dist > 0)
    assert np.all(cloud.points[:, 2] == 0.0)
    assert np.all(np.isfinite([evaluate(f, x) for x in cloud.points]))
    for j, eps in enumerate(RADII):
        d = dist[cloud.radius_index == j]
        assert d.size == 128 and np.all(d <= eps + 1e-12) and np.all(d >= eps / 2 - 1e-12)


def test_quartic_cloud_excludes_the_base(inst):
    cloud = sample_cloud(inst("quartic-gap"), [0.0], RADII, 64, 3)
    x = cloud.points[:, 0]
    assert np.all(x != 0.0) and np.all(np.abs(x) <= 0.2)
    assert np.all(cloud.fgap >= -1e-12)


def test_same_seed_same_cloud(inst):
    a = sample_cloud(inst("zq3-nonneg"), [1, 1, 0], RADII, 64, 99)
    b = sample_cloud(inst("zq3-nonneg"), [1, 1, 0], RADII, 64, 99)
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.sdist, b.sdist)
    c = sample_cloud(inst("zq3-nonneg"), [1, 1, 0], RADII, 64, 100)
    assert not np.array_equal(a.points, c.points)


def test_cloud_preconditions(inst):
    f = inst("zq3")
    with pytest.raises(UsageError):
        sample_cloud(f, [1, 1, 1], RADII, 64, 1)
    with pytest.raises(UsageError):
        sample_cloud(f, [1, 1, 0], RADII, 16, 1)
    with pytest.raises(UsageError):
        sample_cloud(f, [1, 1, 0], (0.1, 0.2), 64, 1)


def test_zq3_oracle_values(zq3_bundle):
    # frozen from tests/oracles/derive.py
    b = zq3_bundle
    assert b.kl.details["theta"] == pytest.approx(0.5, abs=0.01)
    assert b.kl.value == pytest.approx(2.0, rel=0.02)
    assert b.subregularity.value == pytest.approx(0.5, rel=0.02)
    assert b.growth.value == pytest.approx(1.0, rel=0.02)
    assert b.luo_tseng.value == pytest.approx(0.5, rel=0.02)
    assert not b.subregularity.divergence
    assert b.subregularity.samples_used == 1536


@pytest.mark.parametrize(
    "name, base, c, kappa, nu, varpi",
    [
        ("half-square", [0.0], math.sqrt(2), 1.0, 0.5, 1.0),
        ("lasso-toy", [0.5], math.sqrt(2), 1.0, 0.5, 1.0),
        ("shifted-square", [1.0], math.sqrt(2), 1.0, 0.5, 1.0),
        ("huber-ls", [2.0, 0.25], math.sqrt(2), 1.0, 0.5, 1.0),
    ],
)
def test_scalar_oracles(inst, name, base, c, kappa, nu, varpi):
    b = estimate_all(sample_cloud(inst(name), base, RADII, 512, 5))
    assert b.kl.value == pytest.approx(c, rel=0.02)
    assert b.subregularity.value == pytest.approx(kappa, rel=0.02)
    assert b.growth.value == pytest.approx(nu, rel=0.02)
    assert b.luo_tseng.value == pytest.approx(varpi, rel=0.02)


def test_abs_is_sharp(inst):
    cloud = sample_cloud(inst("abs"), [0.0], (0.5,), 512, 5)
    kl = estimate_kl(cloud)
    assert abs(kl.details["theta"]) <= 0.05
    # growth modulus is 1/radius, attained at the outer edge of the ball
    assert estimate_quadratic_growth(cloud).value == pytest.approx(2.0, rel=0.02)


def test_quartic_subregularity_diverges(inst):
    cloud = sample_cloud(inst("quartic-gap"), [0.0], RADII, 512, 7)
    sub = estimate_subregularity(cloud)
    assert sub.divergence
    assert all(3.5 <= g <= 4.5 for g in sub.growth_factors)
    kl = estimate_kl(cloud)
    assert kl.details["theta"] == pytest.approx(0.75, abs=0.05)
    with pytest.raises(CapabilityError):
        check_luo_tseng(cloud)


def test_bilinear_saddle(inst):
    b = estimate_all(sample_cloud(inst("bilinear-4x4"), [1, -1, 0, 0, 1, -1, 0, 0], RADII, 512, 11))
    assert b.subregularity.value == pytest.approx(0.5, rel=0.02)
    assert b.kl.value == pytest.approx(2.0, rel=0.02)
    assert b.luo_tseng.value == pytest.approx(0.5, rel=0.02)
    assert b.growth.value < 0 and b.growth.details["growth_failure"]


def test_flat_instance_has_too_few_strict_gaps(inst):
    cloud = sample_cloud(inst("sparsity-indicator"), [1, 1, 0, 0], RADII, 64, 1)
    with pytest.raises(InsufficientData):
        estimate_kl(cloud)
    assert estimate_subregularity(cloud).value == 0.0  # every sample is critical: all 0/0


def test_quadratic_growth_needs_a_critical_base(inst):
    cloud = sample_cloud(inst("lasso-toy"), [1.0], RADII, 64, 1)
    with pytest.raises(UsageError):
        estimate_quadratic_growth(cloud)


def test_divergence_rule():
    assert divergence_check([1.0, 4.0, 16.0], "up")[0]
    assert not divergence_check([1.0, 4.0, 5.0], "up")[0]
    assert not divergence_check([1.0, 1.5, 2.2, 3.3], "up")[0]
    assert divergence_check([1.0, 0.5, 0.25], "down")[0]
    flag, factors = divergence_check([1.0, math.inf, math.inf], "up")
    assert factors == (math.inf, 1.0) and not flag


@pytest.fixture(scope="module")
def nested_clouds():
    from regmod.model import get_instance

    return {
        name: sample_cloud(get_instance(name), base, RADII, 64, 21)
        for name, base in (("zq3", [1, 1, 0]), ("hinge-ls", [0, 0]), ("quartic-gap", [0.0]), ("abs", [0.0]))
    }


@pytest.mark.parametrize("name", ["zq3", "hinge-ls", "quartic-gap", "abs"])
@given(bits=st.lists(st.booleans(), min_size=192, max_size=192))
def test_enlarging_a_cloud_is_monotone(nested_clouds, name, bits):
    big = nested_clouds[name]
    mask = np.array(bits)
    mask[:20] = True  # keep enough strict-gap samples for the KL estimator
    small = big.subset(mask)
    assert estimate_subregularity(big).value >= estimate_subregularity(small).value
    assert estimate_kl(big).value <= estimate_kl(small).value
    if big.instance.composite:
        assert check_luo_tseng(big).value >= check_luo_tseng(small).value
    nb, ns = estimate_quadratic_growth(big).value, estimate_quadratic_growth(small).value
    assert nb <= ns


def test_prox_regularity_certificates(inst):
    ok = check_prox_regularity(inst("sparsity-indicator"), [1.0, -2.0, 0.0, 0.0], 0.0, 0.5, 1000, 3)
    assert ok.passed and ok.pairs == 1000
    assert check_prox_regularity(inst("zq3"), [1, 1, 0], 2.0, 0.2, 1000, 3).passed
    neg = inst("neg-half-square")
    bad = check_prox_regularity(neg, [0.0], 0.5, 0.5, 1000, 3)
    assert not bad.passed and bad.violation is not None
    x, y = bad.violation["x"][0], bad.violation["y"][0]
    # frozen from tests/oracles/derive.py: slack = (rho - 1)/2 (y - x)^2
    assert bad.violation["slack"] == pytest.approx(-0.25 * (y - x) ** 2, abs=1e-14)
    assert check_prox_regularity(neg, [0.0], 1.0, 0.5, 1000, 3).passed
    with pytest.raises(UsageError):
        check_prox_regularity(neg, [0.0], 1.0, 0.0, 10, 3)


def test_kl_fit_is_order_independent(inst):
    cloud = sample_cloud(inst("hinge-ls"), [0, 0], RADII, 64, 4)
    perm = np.random.default_rng(0).permutation(len(cloud))
    a, b = estimate_kl(cloud), estimate_kl(cloud.subset(perm))
    assert a.details["theta"] == b.details["theta"] and a.value == b.value
