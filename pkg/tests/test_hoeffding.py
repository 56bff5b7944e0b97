from itertools import combinations

import numpy as np
import pytest

from ustatlab.core_models import KernelFamily, TensorField
from ustatlab.hoeffding import (
    assemble_ustat,
    cond_expect,
    extract_kernels,
    hoeffding_decompose,
    hoeffding_level,
    hoeffding_project,
    inner_product,
    level_projector,
    support_projector,
)
from ustatlab.spaces import counting, field, hilbert_axis, make_space, uniform
from ustatlab.utils.errors import BadAxisError, BadLevelError, NotProbabilityError


def _random_space(rng: np.random.Generator, r: int):
    raw = rng.uniform(0.2, 1.0, r)
    w = raw / raw.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return make_space(list(w))


def _subsets(n: int):
    return [frozenset(b) for size in range(n + 1) for b in combinations(range(1, n + 1), size)]


def test_projection_algebra_on_random_fields():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n = int(rng.integers(1, 5))
        r = int(rng.integers(2, 4))
        base = _random_space(rng, r)
        f = field((base,) * n, rng.standard_normal((r,) * n))
        comps = {a: hoeffding_project(f, a) for a in _subsets(n)}
        scale = max(1.0, float(np.abs(f.values).max()))

        total = sum((c.values for c in comps.values()), np.zeros(f.values.shape))
        assert np.abs(total - f.values).max() <= 1e-12 * scale

        for a, pa in comps.items():
            again = hoeffding_project(pa, a)
            assert np.abs(again.values - pa.values).max() <= 1e-12 * scale
            partial = sum((comps[b].values for b in _subsets(n) if b <= a), np.zeros(f.values.shape))
            assert np.abs(partial - cond_expect(f, a).values).max() <= 1e-12 * scale
            for j in a:
                mean = np.tensordot(pa.values, base.w, axes=([j - 1], [0]))
                assert np.abs(mean).max() <= 1e-12 * scale, f"P_{sorted(a)} f not mean zero along {j}"

        keys = list(comps)
        for x in range(len(keys)):
            for y in range(x + 1, len(keys)):
                assert abs(inner_product(comps[keys[x]], comps[keys[y]])) <= 1e-10 * scale**2


def test_projection_is_self_adjoint():
    rng = np.random.default_rng(5)
    base = _random_space(rng, 3)
    f = field((base,) * 3, rng.standard_normal((3, 3, 3)))
    g = field((base,) * 3, rng.standard_normal((3, 3, 3)))
    for a in ({1}, {2, 3}, {1, 2, 3}, set()):
        lhs = inner_product(hoeffding_project(f, a), g)
        rhs = inner_product(f, hoeffding_project(g, a))
        assert abs(lhs - rhs) <= 1e-12


def test_decompose_order_and_levels():
    rng = np.random.default_rng(2)
    base = uniform(2)
    f = field((base,) * 3, rng.standard_normal((2, 2, 2)))
    comps = hoeffding_decompose(f)
    assert [sorted(a) for a in comps][:4] == [[], [1], [2], [3]]
    level2 = hoeffding_level(f, 2)
    direct = sum((comps[a].values for a in comps if len(a) == 2), np.zeros((2, 2, 2)))
    assert np.allclose(level2.values, direct, atol=1e-14)
    with pytest.raises(BadLevelError):
        hoeffding_level(f, 4)


def test_value_axes_are_left_alone():
    rng = np.random.default_rng(8)
    base = uniform(3)
    f = field((base, base, hilbert_axis(2)), rng.standard_normal((3, 3, 2)))
    for c in range(2):
        scalar = field((base, base), f.values[..., c])
        assert np.allclose(hoeffding_project(f, {1}).values[..., c], hoeffding_project(scalar, {1}).values)


def test_level_projector_targets_low_levels():
    rng = np.random.default_rng(4)
    base = make_space([0.3, 0.7])
    f = field((base,) * 3, rng.standard_normal((2, 2, 2)))
    project = level_projector(f, 1)
    low = f.with_values(project(f.values))
    assert np.allclose(project(low.values), low.values, atol=1e-14)
    for a, comp in hoeffding_decompose(low).items():
        if len(a) > 1:
            assert np.abs(comp.values).max() <= 1e-13
        else:
            assert np.allclose(comp.values, hoeffding_project(f, a).values, atol=1e-13)


def test_support_projector():
    mask = np.array([[True, False], [False, True]])
    project = support_projector(mask)
    out = project(np.ones((2, 2)))
    assert out.tolist() == [[1.0, 0.0], [0.0, 1.0]]


def test_extracted_kernels_reassemble_the_level():
    rng = np.random.default_rng(21)
    base = make_space([0.2, 0.5, 0.3])
    f = field((base,) * 4, rng.standard_normal((3,) * 4))
    for m in range(5):
        k = extract_kernels(f, m)
        assert all(len(idx) == m for idx in k.kernels)
        coupled = assemble_ustat(k)
        assert np.allclose(coupled.values, hoeffding_level(f, m).values, atol=1e-12)


def test_decoupled_assembly_layout():
    base = uniform(2)
    kern = TensorField((base, base), np.array([[0.0, 1.0], [2.0, 3.0]]))
    k = KernelFamily(m=2, n=2, base=base, kernels={(1, 2): kern})
    dec = assemble_ustat(k, decoupled=True)
    assert dec.values.shape == (2, 2, 2, 2)
    # slot 1 coordinate 1 on axis 0, slot 2 coordinate 2 on axis 3
    assert dec.values[1, 0, 0, 1] == 3.0
    assert dec.values[1, 1, 1, 0] == 2.0


def test_errors():
    base = uniform(2)
    with pytest.raises(NotProbabilityError):
        cond_expect(field((counting(2),) * 2, np.ones((2, 2))), {1})
    with pytest.raises(BadAxisError):
        hoeffding_project(field((base,) * 2, np.ones((2, 2))), {3})
    loose = KernelFamily(m=2, n=2, base=base, kernels={(1, 1): field((base, base), np.ones((2, 2)))}, strict=False)
    with pytest.raises(BadAxisError):
        assemble_ustat(loose)
