import math
from itertools import combinations, product

import numpy as np
import pytest

from ustatlab.core_models import KernelFamily, NormSpec, TensorField
from ustatlab.hoeffding import level_projector
from ustatlab.norms import (
    certificate_spec,
    decoupled_square_moment,
    dual_spec,
    lp,
    mixed,
    norm,
    parse_couple,
    square_function,
    ustat_lhs,
    ustat_moment,
)
from ustatlab.spaces import counting, field, make_space, uniform
from ustatlab.utils.errors import BadSpecError, HigherLevelsPresentError, NotNonnegativeError


def test_plain_and_mixed_norms():
    f = field((counting(2),), np.array([3.0, -4.0]))
    assert math.isclose(norm(f, lp(2, (0,))), 5.0)
    g = field((counting(2), counting(2)), np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert math.isclose(norm(g, mixed(1, (0,), 2, (1,))), math.sqrt(5.0) + 5.0)
    assert math.isclose(norm(g, mixed(2, (1,), 1, (0,))), math.sqrt(16.0 + 36.0))
    weighted = field((uniform(2),), np.array([3.0, 4.0]))
    assert math.isclose(norm(weighted, lp(2, (0,))), math.sqrt(12.5))


def test_spec_validation():
    g = field((counting(2), counting(2)), np.ones((2, 2)))
    with pytest.raises(BadSpecError):
        norm(g, lp(2, (0,)))
    with pytest.raises(BadSpecError):
        norm(g, NormSpec(1.0, (0, 0), lp(2, (1,))))
    with pytest.raises(BadSpecError):
        dual_spec(lp(0.5, (0,)))


def test_dual_spec_exponents_and_hoelder():
    spec = mixed(3.0, (0,), 1.0, (1,))
    dual = dual_spec(spec)
    assert [node.exponent for node in dual.nodes()] == [math.inf, 1.5]
    assert dual_spec(dual) == spec

    rng = np.random.default_rng(9)
    axes = (make_space([0.2, 0.8]), counting(3))
    for _ in range(20):
        f = field(axes, rng.standard_normal((2, 3)))
        g = field(axes, rng.standard_normal((2, 3)))
        pairing = float(np.sum(np.multiply.outer(axes[0].w, axes[1].w) * f.values * g.values))
        assert abs(pairing) <= norm(f, spec) * norm(g, dual) * (1.0 + 1e-12)


def test_inf_node_takes_the_maximum():
    f = field((make_space([0.5, 0.5]),), np.array([1.0, -7.0]))
    assert norm(f, lp(math.inf, (0,))) == 7.0


def _family(rng: np.random.Generator, n: int, m: int, r: int, strict: bool = True) -> KernelFamily:
    base = uniform(r)
    tuples = combinations(range(1, n + 1), m) if strict else product(range(1, n + 1), repeat=m)
    kernels = {idx: TensorField((base,) * m, rng.random((r,) * m)) for idx in tuples}
    return KernelFamily(m=m, n=n, base=base, kernels=kernels, strict=strict)


def test_moments_of_one_variable_families():
    rng = np.random.default_rng(1)
    k = _family(rng, 3, 1, 3)
    coupled = ustat_moment(k, 1.0, 2.5, mode="coupled").value
    decoupled = ustat_moment(k, 1.0, 2.5, mode="decoupled").value
    assert math.isclose(coupled, decoupled, rel_tol=1e-12)
    linear = ustat_lhs(k, 1.0).value
    assert math.isclose(linear, sum(float(kern.values.mean()) for kern in k.kernels.values()), rel_tol=1e-12)


def test_lhs_requires_nonnegative_kernels():
    base = uniform(2)
    k = KernelFamily(m=1, n=1, base=base, kernels={(1,): TensorField((base,), np.array([1.0, -1.0]))})
    with pytest.raises(NotNonnegativeError):
        ustat_lhs(k, 2.0)


def test_monte_carlo_estimate_is_seeded_and_thread_independent():
    rng = np.random.default_rng(6)
    k = _family(rng, 3, 2, 2)
    exact = ustat_moment(k, 1.0, 2.0, mode="coupled").value
    one = ustat_moment(k, 1.0, 2.0, mode="coupled", method="mc", samples=20_000, seed=5)
    two = ustat_moment(k, 1.0, 2.0, mode="coupled", method="mc", samples=20_000, seed=5, threads=3)
    assert one.value == two.value
    assert one.samples == 20_000
    assert abs(one.value - exact) <= 5.0 * one.stderr + 1e-12


def test_square_function_parseval_and_level_guard():
    rng = np.random.default_rng(12)
    base = make_space([0.25, 0.75])
    raw = field((base,) * 3, rng.standard_normal((2, 2, 2)))
    s = square_function(raw, 3)
    assert math.isclose(norm(s, lp(2, range(3))), norm(raw, lp(2, range(3))), rel_tol=1e-12)
    with pytest.raises(HigherLevelsPresentError):
        square_function(raw, 1)
    low = raw.with_values(level_projector(raw, 1)(raw.values))
    assert square_function(low, 1).values.shape == (2, 2, 2)


def test_decoupled_square_moment_at_p_two():
    rng = np.random.default_rng(13)
    base = uniform(2)
    raw = field((base,) * 3, rng.standard_normal((2, 2, 2)))
    f = raw.with_values(level_projector(raw, 2)(raw.values))
    # at p = 2 every level contributes its squared L2 norm
    assert math.isclose(decoupled_square_moment(f, 2.0, 2), norm(f, lp(2, range(3))) ** 2, rel_tol=1e-10)


def test_certificate_spec_and_couple_parsing():
    assert certificate_spec(2, (1,), 3.0) == mixed(1.0, (1,), 3.0, (0,))
    assert certificate_spec(2, (), 3.0) == lp(1.0, (0, 1))
    assert certificate_spec(1, (1,), 2.0, outer_p=1.5) == lp(2.0, (0,))
    c = parse_couple("L1,L2", 2)
    assert c.spec0 == lp(1.0, (0, 1)) and c.spec1 == lp(2.0, (0, 1))
    c = parse_couple("L1(l2), L2(l2)", 2)
    assert c.spec0 == mixed(1.0, (0,), 2.0, (1,))
    with pytest.raises(BadSpecError):
        parse_couple("L1", 1)
    with pytest.raises(BadSpecError):
        parse_couple("L1,H2", 1)
