import numpy as np
import pytest

from coupledtl import (
    DeepTransformer,
    LayerConfig,
    LayerSchedule,
    RegularizationParams,
    SparsityBudget,
    SyntheticSpec,
    TransformLayer,
    encode,
    fit_deep,
    gen_synthetic_coupled,
    map_codes,
    semi_coupled_fit,
    sym_coupled_fit,
)
from coupledtl.deep import from_coupled, stack_product
from coupledtl.errors import ShapeError, UnsupportedDirectionError


@pytest.fixture
def pair(rng):
    x1 = rng.standard_normal((5, 40))
    x2 = rng.standard_normal((5, 5)) @ x1 + 0.1 * rng.standard_normal((5, 40))
    return x1, x2


@pytest.mark.parametrize("kind,fit", [("semi", semi_coupled_fit), ("symmetric", sym_coupled_fit)])
def test_depth_one_is_coupled_fit(pair, kind, fit):
    cfg = LayerConfig(RegularizationParams(0.1, 1.0, 2.0), iters=15)
    model, report = fit_deep(*pair, kind, LayerSchedule.uniform(1, cfg))
    ref, costs = fit(*pair, cfg.params, cfg.budget, cfg.iters, cfg.tol)
    assert model.depth == 1 and report.uncoupled == []
    assert np.array_equal(model.layers1[0].t, ref.layer1.t)
    assert np.array_equal(model.layers2[0].t, ref.layer2.t)
    assert np.array_equal(model.map_12, ref.maps[0])
    assert [c.total for c in report.coupled] == [c.total for c in costs]
    wrapped = from_coupled(ref)
    assert wrapped.kind == kind and np.array_equal(wrapped.map_12, model.map_12)


def test_per_layer_traces_monotone(pair):
    model, report = fit_deep(*pair, "symmetric", LayerSchedule.uniform(3, LayerConfig(iters=20, tol=0)))
    traces = [t for layer in report.uncoupled for t in layer] + [report.coupled]
    assert len(traces) == 5
    for trace in traces:
        totals = [c.total for c in trace]
        assert all(b <= a + 1e-9 * abs(a) for a, b in zip(totals, totals[1:]))


def test_per_layer_parameters_differ(pair):
    layers = (LayerConfig(RegularizationParams(0.5), SparsityBudget(2), 5),
              LayerConfig(RegularizationParams(0.05, mu=3.0), SparsityBudget(), 7))
    model, report = fit_deep(*pair, "semi", LayerSchedule(layers))
    assert model.layers1[0].params.lam == 0.5 and model.layers1[0].budget.tau == 2
    assert model.layers2[1].params.mu == 3.0
    assert len(report.uncoupled[0][0]) == 5 and len(report.coupled) == 7


def test_planted_two_level_model():
    spec = SyntheticSpec(dim=8, subjects=80, samples=2, cond_bound=10.0, seed=3)
    x1, x2, _, _ = gen_synthetic_coupled(spec)
    cfg = LayerConfig(RegularizationParams(0.01, 1.0, 1.0), iters=100, tol=0)
    model, report = fit_deep(x1, x2, "semi", LayerSchedule.uniform(2, cfg))
    z1, z2 = report.final.z1, report.final.z2
    r = z2 - model.map_12 @ z1
    assert np.sum(r * r) < 1e-3 * np.sum(z2 * z2)


def test_encode_identity():
    eye = TransformLayer.identity(3)
    model = DeepTransformer("semi", [eye], [eye], np.eye(3))
    x = np.arange(12.0).reshape(3, 4)
    assert np.array_equal(encode(model, x, 1), x)
    assert np.array_equal(map_codes(model, x), x)


def test_encode_reproduces_training_codes():
    spec = SyntheticSpec(dim=6, subjects=50, samples=2, cond_bound=5.0, seed=2)
    x1, x2, _, _ = gen_synthetic_coupled(spec)
    cfg = LayerConfig(RegularizationParams(1e-4, 1.0, 1.0), iters=300, tol=0)
    model, report = fit_deep(x1, x2, "symmetric", LayerSchedule.uniform(2, cfg))
    for domain, x, z in ((1, x1, report.final.z1), (2, x2, report.final.z2)):
        got = encode(model, x, domain)
        assert np.linalg.norm(got - z) <= 1e-3 * np.linalg.norm(z)


def test_encode_threshold_flag(pair):
    cfg = LayerConfig(budget=SparsityBudget(2), iters=5)
    model, _ = fit_deep(*pair, "semi", LayerSchedule.uniform(2, cfg))
    z = encode(model, pair[0], 1, threshold=True)
    assert np.all(np.count_nonzero(z, axis=0) <= 2)
    dense = encode(model, pair[0], 1)
    assert np.count_nonzero(dense) > np.count_nonzero(z)


def test_stack_product_order(rng):
    a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    np.testing.assert_array_equal(stack_product([TransformLayer(a), TransformLayer(b)]), b @ a @ np.eye(3))


def test_map_directions(pair):
    semi, _ = fit_deep(*pair, "semi", LayerSchedule.uniform(1, LayerConfig(iters=3)))
    z = encode(semi, pair[0], 1)
    with pytest.raises(UnsupportedDirectionError):
        map_codes(semi, z, "2to1")
    with pytest.raises(UnsupportedDirectionError):
        map_codes(semi, z, "sideways")
    sym, _ = fit_deep(*pair, "symmetric", LayerSchedule.uniform(1, LayerConfig(iters=3)))
    np.testing.assert_array_equal(map_codes(sym, z, "2to1"), sym.map_21 @ z)


def test_encode_errors(pair):
    model, _ = fit_deep(*pair, "semi", LayerSchedule.uniform(1, LayerConfig(iters=2)))
    with pytest.raises(ShapeError):
        encode(model, np.ones((4, 2)), 1)
    with pytest.raises(ValueError):
        encode(model, pair[0], 3)
    with pytest.raises(ShapeError):
        map_codes(model, np.ones((4, 2)))


def test_model_invariants():
    eye = TransformLayer.identity(2)
    with pytest.raises(ValueError):
        DeepTransformer("semi", [eye], [eye, eye], np.eye(2))
    with pytest.raises(ValueError):
        DeepTransformer("semi", [eye], [eye], np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        DeepTransformer("symmetric", [eye], [eye], np.eye(2))
    with pytest.raises(ValueError):
        fit_deep(np.ones((2, 3)), np.ones((2, 3)), "triangular")
