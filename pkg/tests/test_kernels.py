import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from coupledtl import kernels

BACKENDS = sorted(kernels.available_backends())
# small integer-valued entries make magnitude ties common
tie_prone = st.integers(-3, 3).map(float)
values = st.one_of(tie_prone, st.floats(-1e6, 1e6, allow_nan=False))


def test_backend_selected():
    assert kernels.BACKEND in BACKENDS


@settings(max_examples=300, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 12)), elements=values),
       st.integers(1, 9))
def test_threshold_backends_agree(a, tau):
    tau = min(tau, a.shape[0])
    outs = [kernels.hard_threshold(a, tau, backend=b) for b in BACKENDS]
    for out in outs[1:]:
        assert out.tobytes() == outs[0].tobytes()


@pytest.mark.parametrize("name", BACKENDS)
def test_threshold_tie_rule(name):
    a = np.array([[2.0, 0.0], [-2.0, 1.0], [2.0, -1.0], [1.0, 1.0]])
    out = kernels.hard_threshold(a, 2, backend=name)
    assert out[:, 0].tolist() == [2.0, -2.0, 0.0, 0.0]
    assert out[:, 1].tolist() == [0.0, 1.0, -1.0, 0.0]


@pytest.mark.parametrize("name", BACKENDS)
def test_threshold_non_contiguous(name):
    a = np.arange(24.0).reshape(4, 6)[:, ::2] * np.array([1, -1, 1])
    expected = np.where(np.abs(a) >= np.sort(np.abs(a), axis=0)[-2], a, 0.0)
    assert np.array_equal(kernels.hard_threshold(a, 2, backend=name), expected)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 15), st.integers(1, 8), st.randoms(use_true_random=False))
def test_label_min_backends_agree(n_labels, n_cols, n_probes, rnd):
    rng = np.random.default_rng(rnd.getrandbits(32))
    idx = np.concatenate([np.arange(n_labels), rng.integers(0, n_labels, n_cols)])
    dist = rng.random((n_probes, len(idx)))
    outs = [kernels.label_min(dist, idx, n_labels, backend=b) for b in BACKENDS]
    expected = np.array([[dist[p, idx == j].min() for j in range(n_labels)] for p in range(n_probes)])
    for out in outs:
        assert np.array_equal(out, expected)
