import numpy as np
import pytest

import oracles
from coupledtl import (
    RegularizationParams,
    SparsityBudget,
    SyntheticSpec,
    coupled_objective,
    gen_synthetic_coupled,
    semi_coupled_fit,
    sym_coupled_fit,
    update_codes_semi,
    update_codes_sym,
    update_mapping,
)
from coupledtl.coupled import update_codes_joint
from coupledtl.errors import ShapeError, SingularInputError


def test_semi_codes_zero_coupling(rng):
    a, b, z2 = (rng.standard_normal((3, 5)) for _ in range(3))
    m = rng.standard_normal((3, 3))
    z1n, z2n = update_codes_semi(a, b, z2, m, 0.0)
    assert np.array_equal(z1n, a) and np.array_equal(z2n, b)


def test_semi_codes_strong_coupling(rng):
    c = rng.standard_normal((4, 6))
    # sequential: the partner codes start at the common analysis
    z1, z2 = update_codes_semi(c, c, c, np.eye(4), 1e8)
    np.testing.assert_allclose(z1, c, atol=1e-6)
    np.testing.assert_allclose(z2, c, atol=1e-6)
    # joint: no starting point involved
    z1, z2 = update_codes_joint(c, c, (np.eye(4),), 1e8)
    np.testing.assert_allclose(z1, c, atol=1e-6)
    np.testing.assert_allclose(z2, c, atol=1e-6)


def test_sym_codes_zero_coupling(rng):
    a, b, z2 = (rng.standard_normal((3, 5)) for _ in range(3))
    z1n, z2n = update_codes_sym(a, b, z2, np.eye(3), np.eye(3), 0.0)
    assert np.array_equal(z1n, a) and np.array_equal(z2n, b)


def test_sym_codes_fixed_point(rng):
    c = rng.standard_normal((4, 6))
    z1, z2 = update_codes_sym(c, c, c, np.eye(4), np.eye(4), 2.5)
    np.testing.assert_allclose(z1, c, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(z2, c, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("kind", ["semi", "symmetric"])
def test_joint_codes_are_stationary(rng, kind):
    for _ in range(20):
        d, n = int(rng.integers(1, 7)), int(rng.integers(1, 12))
        mu = float(rng.uniform(0.01, 10))
        t1x1, t2x2 = rng.standard_normal((d, n)), rng.standard_normal((d, n))
        m12, m21 = rng.standard_normal((d, d)), rng.standard_normal((d, d))
        if kind == "semi":
            z1, z2 = update_codes_joint(t1x1, t2x2, (m12,), mu)
            g1 = oracles.semi_z1_grad(z1, t1x1, z2, m12, mu)
            g2 = oracles.semi_z2_grad(z2, t2x2, z1, m12, mu)
        else:
            z1, z2 = update_codes_joint(t1x1, t2x2, (m12, m21), mu)
            g1 = oracles.sym_z1_grad(z1, t1x1, z2, m12, m21, mu)
            g2 = oracles.sym_z2_grad(z2, t2x2, z1, m12, m21, mu)
        for g, scale in (g1, g2):
            assert g <= 1e-9 * (1 + scale)


def test_code_shape_errors(rng):
    with pytest.raises(ShapeError):
        update_codes_semi(np.ones((2, 3)), np.ones((2, 4)), np.ones((2, 4)), np.eye(2), 1.0)
    with pytest.raises(ShapeError):
        update_codes_sym(np.ones((2, 3)), np.ones((2, 3)), np.ones((2, 3)), np.eye(3), np.eye(2), 1.0)


def test_mapping_identity_and_scale(rng):
    z = rng.standard_normal((4, 20))
    np.testing.assert_allclose(update_mapping(z, z), np.eye(4), atol=1e-10)
    np.testing.assert_allclose(update_mapping(z, 2 * z), 2 * np.eye(4), atol=1e-10)


def test_mapping_optimality_spot_check(rng):
    zf, zt = rng.standard_normal((3, 15)), rng.standard_normal((3, 15))
    m = update_mapping(zf, zt)
    best = np.linalg.norm(zt - m @ zf)
    for _ in range(1000):
        a = m + 0.1 * rng.standard_normal((3, 3))
        assert best <= np.linalg.norm(zt - a @ zf)
    np.testing.assert_allclose(m, oracles.lstsq_map(zf, zt), rtol=1e-8, atol=1e-10)


def test_mapping_rank_deficient():
    zf = np.vstack([np.arange(6.0), np.arange(6.0)])
    zt = np.ones((2, 6))
    with pytest.raises(SingularInputError):
        update_mapping(zf, zt, auto_ridge=False)
    m = update_mapping(zf, zt)
    assert np.all(np.isfinite(m))
    assert np.all(np.isfinite(update_mapping(zf, zt, ridge=1e-3, auto_ridge=False)))


def test_coupled_objective_terms(rng):
    from coupledtl import TransformLayer
    p = RegularizationParams(0.5, 1.0, 2.0)
    l1, l2 = TransformLayer(np.eye(2), p), TransformLayer(np.eye(2), p)
    x = rng.standard_normal((2, 4))
    z1, z2 = x, x + 1
    c = coupled_objective(l1, l2, x, x, z1, z2, (np.eye(2),), 2.0)
    assert c.coupling == pytest.approx(2.0 * 8)
    c2 = coupled_objective(l1, l2, x, x, z1, z2, (np.eye(2), np.eye(2)), 2.0)
    assert c2.coupling == pytest.approx(2.0 * 16)


@pytest.mark.parametrize("fit", [semi_coupled_fit, sym_coupled_fit])
def test_every_update_descends(rng, fit):
    x1 = rng.standard_normal((5, 50))
    x2 = rng.standard_normal((5, 5)) @ x1 + 0.2 * rng.standard_normal((5, 50))
    seen = []
    _, costs = fit(x1, x2, RegularizationParams(0.1, 1.0, 3.0), iters=30, tol=0,
                   on_update=lambda stage, c: seen.append((stage, c.total)))
    totals = [t for _, t in seen]
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(totals, totals[1:]))
    per_sweep = 4 if fit is semi_coupled_fit else 5  # t1, t2, codes, map(s)
    assert len(seen) == per_sweep * 30
    assert len(costs) == 30


def _planted(kind):
    spec = SyntheticSpec(dim=8, subjects=60, samples=2, cond_bound=10.0, seed=11)
    x1, x2, _, truth = gen_synthetic_coupled(spec)
    params = RegularizationParams(0.01, 1.0, 1.0)
    fit = semi_coupled_fit if kind == "semi" else sym_coupled_fit
    return fit(x1, x2, params, iters=200, tol=0)[0]


def test_semi_planted_coupling_residual():
    model = _planted("semi")
    r = model.z2 - model.mapping @ model.z1
    assert np.sum(r * r) < 1e-4 * np.sum(model.z2 ** 2)


def test_sym_planted_coupling_residuals():
    model = _planted("symmetric")
    r12 = model.z2 - model.map_12 @ model.z1
    r21 = model.z1 - model.map_21 @ model.z2
    assert np.sum(r12 ** 2) < 1e-4 * np.sum(model.z2 ** 2)
    assert np.sum(r21 ** 2) < 1e-4 * np.sum(model.z1 ** 2)


def test_sym_swap_symmetry_joint(rng):
    x1 = rng.standard_normal((4, 40))
    x2 = rng.standard_normal((4, 4)) @ x1 + 0.3 * rng.standard_normal((4, 40))
    params = RegularizationParams(0.2, 1.0, 1.5)
    a, _ = sym_coupled_fit(x1, x2, params, iters=25, tol=0, code_update="joint")
    b, _ = sym_coupled_fit(x2, x1, params, iters=25, tol=0, code_update="joint")
    for u, v in ((a.layer1.t, b.layer2.t), (a.layer2.t, b.layer1.t), (a.map_12, b.map_21), (a.map_21, b.map_12)):
        np.testing.assert_allclose(u, v, atol=1e-8)


def test_budget_in_coupled_fit(rng):
    x1, x2 = rng.standard_normal((6, 30)), rng.standard_normal((6, 30))
    model, _ = semi_coupled_fit(x1, x2, RegularizationParams(), SparsityBudget(2), iters=5)
    assert np.all(np.count_nonzero(model.z1, axis=0) <= 2)
    assert np.all(np.count_nonzero(model.z2, axis=0) <= 2)


def test_fit_input_errors(rng):
    with pytest.raises(ShapeError):
        semi_coupled_fit(np.ones((3, 4)), np.ones((3, 5)))
    with pytest.raises(ShapeError):
        semi_coupled_fit(np.ones((3, 4)), np.ones((2, 4)))
    with pytest.raises(ValueError):
        sym_coupled_fit(np.ones((2, 4)), np.ones((2, 4)), ridge_mode="sometimes")
    with pytest.raises(ValueError):
        sym_coupled_fit(np.ones((2, 4)), np.ones((2, 4)), code_update="parallel")
