from itertools import combinations

import numpy as np
import pytest

from ustatlab.core_models import KernelFamily, TensorField
from ustatlab.decomp import check_reconstruction, four_summand, multilevel_decompose
from ustatlab.hoeffding import hoeffding_project, level_projector
from ustatlab.interp import k_functional
from ustatlab.norms import norm, parse_couple
from ustatlab.oracles import bucket_optimum, constrained_grid_k, grid_k, inclusion_exclusion_project, truncation_k
from ustatlab.spaces import field, make_space, uniform
from ustatlab.utils.errors import BadSpecError, TooLargeError


def test_inclusion_exclusion_matches_projections():
    rng = np.random.default_rng(31)
    base = make_space([0.1, 0.6, 0.3])
    f = field((base,) * 3, rng.standard_normal((3, 3, 3)))
    for size in range(4):
        for a in combinations((1, 2, 3), size):
            expected = hoeffding_project(f, a).values
            assert np.abs(inclusion_exclusion_project(f, a).values - expected).max() <= 1e-12


def test_grid_oracle_refuses_large_inputs():
    f = field((uniform(5),), np.ones(5))
    with pytest.raises(TooLargeError):
        grid_k(f, 1.0, parse_couple("L1,L2", 1))


def test_truncation_oracle_agrees_with_grid():
    rng = np.random.default_rng(32)
    f = field((uniform(3),), rng.standard_normal(3))
    for couple in ("L1,L2", "L1,L3"):
        c = parse_couple(couple, 1)
        for t in (0.2, 1.0, 3.0):
            exact = truncation_k(f, t, c).value
            grid = grid_k(f, t, c).value
            assert exact <= grid * (1.0 + 1e-9)
            assert grid - exact <= 1e-5 * grid


def test_truncation_oracle_needs_scalar_couples():
    f = field((uniform(2), uniform(2)), np.ones((2, 2)))
    with pytest.raises(BadSpecError):
        truncation_k(f, 1.0, parse_couple("L1(l2),L2(l2)", 2))


def test_bucket_optimum_sits_between_lhs_and_pipeline():
    rng = np.random.default_rng(33)
    base = uniform(2)
    kernels = {(i,): TensorField((base,), rng.uniform(0.1, 1.0, 2)) for i in (1, 2)}
    k = KernelFamily(m=1, n=2, base=base, kernels=kernels, strict=False)
    for p in (1.5, 2.0, 3.0):
        d = multilevel_decompose(k, p)
        best = bucket_optimum(d.target, p)
        assert best.evaluations == 2**4
        assert best.value <= d.certificate_sum * (1.0 + 1e-12)
        assert best.value >= d.lhs * (1.0 - 1e-12)


def test_bucket_optimum_guard():
    target = field((uniform(8),), np.ones(8))
    with pytest.raises(TooLargeError):
        bucket_optimum(target, 2.0, max_assignments=100)


def test_constrained_grid_is_above_the_unconstrained_dual():
    rng = np.random.default_rng(34)
    base = uniform(2)
    raw = field((base, base), rng.standard_normal((2, 2)))
    project = level_projector(raw, 1)
    f = raw.with_values(project(raw.values))
    c = parse_couple("L1,L2", 2)
    for t in (0.5, 2.0):
        constrained = constrained_grid_k(f, t, c, project)
        free = k_functional(f, t, c)
        assert constrained.value >= free.dual * (1.0 - 1e-9)
        assert np.abs(project(constrained.argmin) - constrained.argmin).max() <= 1e-9


def test_constrained_grid_with_trivial_range_keeps_f_in_the_second_space():
    f = field((uniform(3),), np.array([1.0, -2.0, 0.5]))
    c = parse_couple("L1,L2", 1)
    res = constrained_grid_k(f, 0.5, c, np.zeros_like)
    assert res.value == pytest.approx(0.5 * norm(f, c.spec1), rel=1e-12)
    assert not np.any(res.argmin)


def test_four_summand_single_pair_bucket_optimum():
    base = uniform(2)
    k = KernelFamily(m=2, n=1, base=base, kernels={(1, 1): field((base, base), 1.0)}, strict=False)
    d = four_summand(k, 2.0)
    assert check_reconstruction(d) == 0.0
    assert 1.0 <= d.certificate_sum / d.lhs <= d.meta["cap"]
    best = bucket_optimum(d.target, 2.0)
    assert best.value == pytest.approx(1.0, rel=1e-12)
    assert best.evaluations == 4**4
