import math

import numpy as np
import pytest

from ustatlab.core_models import KernelFamily, TensorField
from ustatlab.spaces import (
    atoms_field,
    coproduct_to_family,
    counting,
    disjoint_union,
    expectation,
    family_to_coproduct,
    field,
    hilbert_axis,
    indicator,
    integrate,
    make_space,
    permute_atoms,
    product,
    split_blocks,
    tensor,
    uniform,
)
from ustatlab.utils.errors import (
    BadAxisError,
    InvalidMeasureError,
    NonFiniteValueError,
    NotProbabilityError,
    TooLargeError,
)


def test_make_space_rejects_bad_weights():
    with pytest.raises(InvalidMeasureError):
        make_space([])
    with pytest.raises(InvalidMeasureError):
        make_space([0.5, 0.0, 0.5])
    with pytest.raises(NotProbabilityError):
        make_space([0.5, 0.6])
    assert make_space([2.0, 3.0], "sigma_finite").mass == 5.0


def test_product_and_disjoint_union():
    s = product([uniform(2), make_space([0.3, 0.7])])
    assert s.kind == "probability"
    assert np.allclose(s.w, [0.15, 0.35, 0.15, 0.35])
    assert s.factors and len(s.factors) == 2

    u = disjoint_union([uniform(2), counting(3)])
    assert u.kind == "sigma_finite"
    assert u.size == 5
    assert u.block_offsets == (0, 2)
    assert math.isclose(u.mass, 4.0)


def test_field_guard_and_validation():
    base = uniform(4)
    with pytest.raises(TooLargeError):
        field((base,) * 3, 0.0, max_elements=32)
    with pytest.raises(TooLargeError):
        TensorField((uniform(2),) * 25, np.zeros(1))
    with pytest.raises(BadAxisError):
        TensorField((base,), np.zeros(3))
    with pytest.raises(NonFiniteValueError):
        TensorField((base,), np.array([0.0, np.nan, 1.0, 2.0]))


def test_integration_of_separated_product():
    rng = np.random.default_rng(3)
    base = make_space([0.2, 0.3, 0.5])
    g = field((base,), rng.standard_normal(3))
    h = field((base,), rng.standard_normal(3))
    gh = tensor(g, h)
    assert abs(expectation(gh) - expectation(g) * expectation(h)) < 1e-14
    partial = integrate(gh, [1])
    assert np.allclose(partial.values, g.values * expectation(h))


def test_integrate_refuses_value_axes():
    f = field((uniform(2), hilbert_axis(3)), np.ones((2, 3)))
    with pytest.raises(BadAxisError):
        integrate(f, [1])
    assert integrate(f, [0]).axes == (hilbert_axis(3),)


def test_indicator_and_permutation():
    base = uniform(3)
    ind = indicator((base, base), (1, 3))
    assert ind.values[0, 2] == 1.0 and ind.values.sum() == 1.0
    moved = permute_atoms(ind, [2, 0, 1])
    assert moved.values[1, 0] == 1.0
    assert math.isclose(expectation(moved), expectation(ind))


def test_coproduct_layout():
    base = make_space([0.4, 0.6])
    kernels = {
        (1, 2): TensorField((base, base), np.array([[1.0, 2.0], [3.0, 4.0]])),
        (2, 2): TensorField((base, base), np.array([[5.0, 0.0], [0.0, 6.0]])),
    }
    k = KernelFamily(m=2, n=2, base=base, kernels=kernels, strict=False)
    bar = family_to_coproduct(k)
    assert bar.values.shape == (4, 4)
    # block (1, 2), atoms (2, 1)
    assert bar.values[1, 2] == 3.0
    assert split_blocks(bar)[1, 1, 1, 1] == 6.0
    back = coproduct_to_family(bar, base, 2)
    assert set(back.kernels) == {(1, 2), (2, 2)}
    assert np.array_equal(back.array((1, 2)), kernels[(1, 2)].values)


def test_atoms_field_kinds():
    one = atoms_field(1.0, [4.0])
    assert one.axes[0].kind == "probability"
    heavy = atoms_field(2.0, [1.0, -1.0])
    assert heavy.axes[0].kind == "sigma_finite"
    assert heavy.axes[0].weights == (2.0, 2.0)
