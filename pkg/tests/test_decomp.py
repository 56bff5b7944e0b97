import numpy as np
import pytest

from ustatlab.core_models import KernelFamily, TensorField, WeightFamily
from ustatlab.decomp import (
    DEFAULT_CAPS,
    canonical_decompose,
    check_disjoint,
    check_reconstruction,
    disjointize,
    four_summand,
    js_decompose,
    level_cut,
    mean_zero_postprocess,
    multilevel_decompose,
    phi_constant,
    subset_order,
    threshold_weights,
)
from ustatlab.norms import norm
from ustatlab.spaces import field, make_space, uniform
from ustatlab.utils.errors import (
    BadInstanceError,
    BadLevelError,
    BadSpecError,
    BadThresholdError,
    NotADecompositionError,
    NotCanonicalError,
    NotNonnegativeError,
    TooLargeError,
)
from ustatlab.verify.common import family_from_arrays, mean_zero, nonneg


def test_constants_and_subset_order():
    assert phi_constant(1.0) == 4.0
    assert phi_constant(2.0) == 12.0
    assert subset_order(1) == [(), (1,)]
    assert subset_order(2) == [(), (2,), (1,), (1, 2)]
    assert len(subset_order(3)) == 8


def test_level_cut_splits_at_the_level():
    f = field((uniform(3),), np.array([0.5, 2.0, 1.0]))
    high, low = level_cut(f, 1.0)
    assert high.values.tolist() == [0.0, 2.0, 1.0]
    assert low.values.tolist() == [0.5, 0.0, 0.0]
    with pytest.raises(BadLevelError):
        level_cut(f, 0.0)
    with pytest.raises(NotNonnegativeError):
        level_cut(f.with_values(np.array([1.0, -1.0, 0.0])), 1.0)


def test_disjointize_assigns_whole_values():
    space = uniform(2)
    f = field((space,), np.array([1.0, 2.0]))
    g, h = disjointize(f, field((space,), np.array([0.7, 0.5])), field((space,), np.array([0.3, 1.5])))
    assert g.values.tolist() == [1.0, 0.0]
    assert h.values.tolist() == [0.0, 2.0]
    with pytest.raises(NotADecompositionError):
        disjointize(f, f, f)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_js_decomposition_sandwich(p: float):
    rng = np.random.default_rng(int(10 * p))
    base = make_space([0.2, 0.5, 0.3])
    for _ in range(5):
        fields = [field((base,), row) for row in nonneg(rng, (4, 3))]
        d = js_decompose(fields, p)
        scale = max(1.0, max(float(fl.values.max()) for fl in fields))
        assert check_reconstruction(d) <= 1e-12 * scale
        assert check_disjoint(d)
        assert set(d.parts) == {"g", "h"}
        assert d.certificate_sum >= d.lhs * (1.0 - 1e-12)
        assert d.certificate_sum <= DEFAULT_CAPS[1] * d.lhs * (1.0 + 1e-12)
        assert d.meta["phi_integral"] <= phi_constant(p) * (1.0 + 1e-9)


def test_js_decomposition_rejects_bad_inputs():
    base = uniform(2)
    with pytest.raises(BadSpecError):
        js_decompose([field((base,), np.ones(2))], 0.5)
    with pytest.raises(BadInstanceError):
        js_decompose([], 2.0)
    with pytest.raises(BadInstanceError):
        js_decompose([field((base,), np.ones(2)), field((uniform(3),), np.ones(3))], 2.0)


def _two_variable_family(rng: np.random.Generator, base, n: int) -> KernelFamily:
    arrays = rng.uniform(0.05, 1.0, (n * n, base.size, base.size))
    return family_from_arrays(base, n, 2, arrays, strict=False)


@pytest.mark.parametrize("p", [1.5, 2.0])
def test_four_summand_agrees_with_two_level_pipeline(p: float):
    rng = np.random.default_rng(41)
    base = make_space([0.3, 0.7])
    k = _two_variable_family(rng, base, 2)
    four = four_summand(k, p)
    multi = multilevel_decompose(k, p)
    assert check_disjoint(four) and check_disjoint(multi)
    for letter, name in {"a": "{}", "c": "{2}", "d": "{1}", "b": "{1,2}"}.items():
        assert np.array_equal(four.parts[letter].values, multi.parts[name].values)
        assert four.certificates[letter] == pytest.approx(multi.certificates[name], rel=1e-12)
    assert four.lhs == pytest.approx(multi.lhs, rel=1e-12)


def test_four_summand_needs_two_variable_kernels():
    base = uniform(2)
    k = family_from_arrays(base, 2, 1, np.ones((2, 2)), strict=False)
    with pytest.raises(BadInstanceError):
        four_summand(k, 2.0)


def test_three_level_pipeline():
    rng = np.random.default_rng(43)
    base = uniform(2)
    k = family_from_arrays(base, 2, 3, nonneg(rng, (8, 2, 2, 2)), strict=False)
    d = multilevel_decompose(k, 2.0)
    assert len(d.parts) == 8
    assert check_reconstruction(d) <= 1e-12
    assert check_disjoint(d)
    assert d.certificate_sum >= d.lhs * (1.0 - 1e-12)
    for name, spec in d.specs.items():
        assert d.certificates[name] == pytest.approx(norm(d.parts[name], spec), rel=1e-12)


def test_pipeline_depth_guard():
    rng = np.random.default_rng(44)
    k = _two_variable_family(rng, uniform(2), 2)
    with pytest.raises(TooLargeError):
        multilevel_decompose(k, 2.0, max_depth=1)


def test_threshold_weights():
    base = uniform(2)
    w = WeightFamily({(1, 2): field((base, base), np.array([[1.0, 0.0], [1.0, 1.0]]))})
    out = threshold_weights(w, 0.75)
    assert out.weights[(1, 2)].values.tolist() == [[0.0, 0.0], [1.0, 1.0]]
    assert out.binary
    with pytest.raises(BadThresholdError):
        threshold_weights(w, 0.0)
    with pytest.raises(BadThresholdError):
        threshold_weights(w, 0.5, eps=0.5)


def _canonical_family(rng: np.random.Generator, n: int, m: int, base) -> KernelFamily:
    count = {2: n * (n - 1) // 2, 1: n}[m]
    raw = rng.standard_normal((count,) + (base.size,) * m)
    return family_from_arrays(base, n, m, mean_zero(raw, base.w, range(1, m + 1)), strict=True)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_canonical_decomposition_reconstructs(p: float):
    rng = np.random.default_rng(45)
    base = make_space([0.25, 0.25, 0.5])
    k = _canonical_family(rng, 3, 2, base)
    d = canonical_decompose(k, p)
    assert len(d.parts) == 4
    assert not d.disjoint
    assert check_reconstruction(d) <= 1e-12 * max(1.0, float(np.abs(d.target.values).max()))
    assert d.lhs > 0.0
    assert all(v >= 0.0 for v in d.certificates.values())


def test_canonical_decomposition_errors():
    rng = np.random.default_rng(46)
    base = uniform(2)
    k = _canonical_family(rng, 3, 2, base)
    with pytest.raises(BadSpecError):
        canonical_decompose(k, 3.0)
    loose = KernelFamily(m=2, n=3, base=base, kernels=dict(k.kernels), strict=False)
    with pytest.raises(BadInstanceError):
        canonical_decompose(loose, 2.0)
    shifted = {idx: TensorField(kern.axes, kern.values + 1.0) for idx, kern in k.kernels.items()}
    with pytest.raises(NotCanonicalError):
        canonical_decompose(KernelFamily(m=2, n=3, base=base, kernels=shifted), 2.0)


def test_mean_zero_postprocess():
    rng = np.random.default_rng(47)
    base = uniform(2)
    k = _canonical_family(rng, 3, 2, base)
    d = mean_zero_postprocess(multilevel_decompose(k, 2.0), 2)
    assert not d.disjoint
    assert d.meta["postprocessed"]
    assert check_reconstruction(d) <= 1e-12 * max(1.0, float(np.abs(d.target.values).max()))

    positive = _two_variable_family(rng, base, 2)
    with pytest.raises(NotCanonicalError):
        mean_zero_postprocess(multilevel_decompose(positive, 2.0), 2)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_single_constant_kernel_lands_in_one_part(m: int):
    base = uniform(2)
    k = KernelFamily(m=m, n=1, base=base, kernels={(1,) * m: field((base,) * m, 1.0)}, strict=False)
    d = multilevel_decompose(k, 2.0)
    assert len(d.parts) == 2**m
    nonzero = [name for name, part in d.parts.items() if np.any(part.values)]
    assert nonzero == ["{}"]
    assert np.array_equal(d.parts["{}"].values, d.target.values)
    assert d.certificates["{}"] == pytest.approx(1.0, rel=1e-12)
    assert d.certificate_sum == pytest.approx(1.0, rel=1e-12)
