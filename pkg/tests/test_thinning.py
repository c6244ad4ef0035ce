import numpy as np
import pytest

from oracles import greedy_rescan, vstat_loops
from thincpd.errors import InputError
from thincpd.kernel import Kernel, median_heuristic
from thincpd.thinning import SamplePool, thin, subset_mmd


def test_rejects_single_point_pool():
    with pytest.raises(InputError):
        thin(Kernel(), SamplePool([(0.0,)]), 1)


@pytest.mark.parametrize("m", [1, 4])
def test_size_bounds(m):
    with pytest.raises(InputError):
        thin(Kernel(), SamplePool([(0.0,), (1.0,), (2.0,)]), m)


def test_rejects_thinned_pool():
    with pytest.raises(InputError):
        thin(Kernel(), SamplePool([(0.0,), (1.0,), (2.0,)], "thinned"), 2)


def test_skips_near_duplicate():
    res = thin(Kernel("rbf", 1.0), SamplePool([(0.0,), (0.0,), (5.0,)]), 2)
    assert res.selected_indices.tolist() == [0, 2]


def test_matches_rescan_oracle_small():
    X = np.random.default_rng(10).standard_normal((10, 1))
    gamma = median_heuristic(X)
    res = thin(Kernel("rbf", gamma), SamplePool(X), 3)
    assert res.selected_indices.tolist() == greedy_rescan("rbf", gamma, X.tolist(), 3)


def test_trace_is_vstat():
    X = np.random.default_rng(4).normal(size=(30, 2))
    k = Kernel("laplace", 1.2)
    res = thin(k, SamplePool(X), 8)
    assert len(res.trace) == 8
    for s in (1, 4, 8):
        S = X[res.selected_indices[:s]]
        assert res.trace[s - 1] == pytest.approx(subset_mmd(k, S, X), abs=1e-12)
    assert res.objective_value == res.trace[-1]


def test_structure_and_determinism():
    X = np.random.default_rng(8).normal(size=(60, 3))
    k = Kernel("rbf", 2.0)
    a = thin(k, SamplePool(X), 20)
    b = thin(k, SamplePool(X), 20)
    idx = a.selected_indices
    assert len(set(idx.tolist())) == 20 and idx.min() >= 0 and idx.max() < 60
    np.testing.assert_array_equal(idx, b.selected_indices)
    sub = a.subset(SamplePool(X))
    assert sub.provenance == "thinned" and len(sub) == 20


class TestSubsetMMD:
    def test_identical(self):
        X = np.random.default_rng(1).normal(size=(12, 2))
        assert abs(subset_mmd(Kernel(), X, X)) <= 1e-12

    def test_identical_by_value(self):
        assert abs(subset_mmd(Kernel(), [(0.0,)], [(0.0,), (0.0,)])) <= 1e-12

    def test_matches_loops(self):
        rng = np.random.default_rng(3)
        P = rng.normal(size=(8, 2))
        S = P[[1, 4, 6]]
        assert subset_mmd(Kernel("rbf", 0.8), S, P) == pytest.approx(
            vstat_loops("rbf", 0.8, S.tolist(), P.tolist()), abs=1e-12
        )

    def test_nonnegative(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            P = rng.normal(size=(15, 3))
            S = P[rng.choice(15, 4, replace=False)]
            assert subset_mmd(Kernel("laplace", 1.0), S, P) >= -1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            subset_mmd(Kernel(), [(0.0, 1.0)], [(0.0,)])
