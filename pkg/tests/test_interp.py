import math

import numpy as np
import pytest

from ustatlab.core_models import Couple
from ustatlab.hoeffding import level_projector
from ustatlab.interp import (
    SolverSettings,
    intersection_norm,
    k_closedness_ratio,
    k_curve,
    k_functional,
    sum_norm,
    theta_q_norm,
)
from ustatlab.norms import lp, norm, parse_couple
from ustatlab.oracles import constrained_grid_k, grid_k
from ustatlab.spaces import atoms_field, counting, field, make_space, uniform
from ustatlab.utils.errors import BadSpecError

FAST = SolverSettings(max_iters=2000, patience=50)


def test_single_atom_k_functional():
    f = atoms_field(1.0, [4.0])
    res = k_functional(f, 0.25, parse_couple("L1,L2", 1))
    assert abs(res.value - 1.0) <= 1e-9
    assert res.dual <= res.value
    assert np.allclose(res.part0.values + res.part1.values, f.values)


def test_k_functional_respects_trivial_bounds():
    rng = np.random.default_rng(21)
    c = parse_couple("L1,L2", 1)
    for _ in range(10):
        f = field((uniform(5),), rng.standard_normal(5))
        for t in (0.1, 1.0, 10.0):
            res = k_functional(f, t, c)
            bound = min(norm(f, c.spec0), t * norm(f, c.spec1))
            assert res.value <= bound * (1.0 + 1e-12)
            assert res.dual <= res.value
            assert res.gap >= 0.0


@pytest.mark.parametrize("atoms", [2, 3])
def test_solver_matches_grid_oracle(atoms: int):
    rng = np.random.default_rng(100 + atoms)
    space = make_space(rng.dirichlet(np.ones(atoms)).tolist()) if atoms == 2 else uniform(atoms)
    f = field((space,), rng.standard_normal(atoms))
    for couple in ("L1,L2", "L1,L3", "L2,L1.5"):
        c = parse_couple(couple, 1)
        for t in (0.3, 1.0, 2.5):
            res = k_functional(f, t, c)
            oracle = grid_k(f, t, c)
            assert res.value <= oracle.value * (1.0 + 1e-8)
            assert abs(res.value - oracle.value) <= 1e-4 * oracle.value


@pytest.mark.parametrize("couple", ["L1(l2),L2(l2)", "L1,L2(l2)"])
def test_solver_matches_grid_oracle_on_mixed_couples(couple: str):
    rng = np.random.default_rng(109)
    f = field((make_space([0.4, 0.6]), counting(2)), rng.standard_normal((2, 2)))
    c = parse_couple(couple, 2)
    for t in (0.5, 2.0):
        res = k_functional(f, t, c)
        oracle = grid_k(f, t, c, rounds=10)
        assert res.value <= oracle.value * (1.0 + 1e-6)
        assert abs(res.value - oracle.value) <= 1e-4 * oracle.value


def test_zero_field_and_bad_t():
    c = parse_couple("L1,L2", 1)
    zero = field((uniform(3),), np.zeros(3))
    res = k_functional(zero, 1.0, c)
    assert res.value == 0.0 and res.gap == 0.0
    f = field((uniform(3),), np.array([1.0, -2.0, 0.5]))
    with pytest.raises(BadSpecError):
        k_functional(f, 0.0, c)
    with pytest.raises(BadSpecError):
        k_functional(f, -1.0, c)


def test_constraint_must_contain_f():
    rng = np.random.default_rng(4)
    base = uniform(2)
    raw = field((base, base), rng.standard_normal((2, 2)))
    with pytest.raises(BadSpecError):
        k_functional(raw, 1.0, parse_couple("L1,L2", 2), constraint=level_projector(raw, 0))


def test_sum_and_intersection_norms():
    f = field((uniform(4),), np.array([3.0, -1.0, 0.0, 2.0]))
    c = parse_couple("L1,L2", 1)
    n0, n1 = norm(f, c.spec0), norm(f, c.spec1)
    assert intersection_norm(f, c) == max(n0, n1)
    assert sum_norm(f, c) <= min(n0, n1) * (1.0 + 1e-12)


def test_k_curve_is_monotone_and_concave():
    rng = np.random.default_rng(8)
    f = field((uniform(4),), rng.standard_normal(4))
    curve = k_curve(f, parse_couple("L1,L2", 1), [4.0, 0.25, 1.0, 0.5, 2.0], settings=FAST)
    assert curve.ts == [0.25, 0.5, 1.0, 2.0, 4.0]
    assert curve.monotone
    assert curve.concave


def test_k_curve_on_a_fine_grid():
    rng = np.random.default_rng(9)
    f = field((make_space([0.1, 0.2, 0.3, 0.4]),), rng.standard_normal(4))
    ts = [2.0 ** (k / 4) for k in range(-16, 17)]
    curve = k_curve(f, parse_couple("L1,L3", 1), ts, tol=1e-8)
    assert len(curve.ts) == 33
    assert curve.monotone
    assert curve.concave


@pytest.mark.parametrize(("theta", "q"), [(0.25, 1.0), (0.5, 2.0), (0.75, 2.0)])
def test_theta_q_norm_of_identical_couple(theta: float, q: float):
    f = field((make_space([0.2, 0.3, 0.5]),), np.array([1.0, -2.0, 0.5]))
    spec = lp(2.0, (0,))
    value = theta_q_norm(f, Couple(spec, spec), theta, q)
    closed = norm(f, spec) * (1.0 / ((1.0 - theta) * q) + 1.0 / (theta * q)) ** (1.0 / q)
    assert math.isclose(value, closed, rel_tol=1e-3)


def test_theta_q_rejects_bad_parameters():
    f = field((uniform(2),), np.array([1.0, 2.0]))
    c = parse_couple("L1,L2", 1)
    with pytest.raises(BadSpecError):
        theta_q_norm(f, c, 1.0, 2.0)
    with pytest.raises(BadSpecError):
        theta_q_norm(f, c, 0.5, 0.5)


def test_k_closedness_ratio_on_low_levels():
    rng = np.random.default_rng(17)
    base = make_space([0.4, 0.6])
    raw = field((base, base), rng.standard_normal((2, 2)))
    project = level_projector(raw, 1)
    f = raw.with_values(project(raw.values))
    c = parse_couple("L1,L2", 2)
    ratio = k_closedness_ratio(f, 0.7, c, project, settings=FAST)
    inside = k_functional(f, 0.7, c, constraint=project, settings=FAST)
    outside = k_functional(f, 0.7, c, settings=FAST)
    assert math.isfinite(ratio)
    assert inside.value >= outside.dual * (1.0 - 1e-9)
    assert k_closedness_ratio(f.with_values(np.zeros((2, 2))), 0.7, c, project) == 1.0


def test_k_closedness_matches_constrained_grid_on_three_coordinates():
    rng = np.random.default_rng(18)
    raw = field((uniform(2),) * 3, rng.standard_normal((2, 2, 2)))
    project = level_projector(raw, 1)
    f = raw.with_values(project(raw.values))
    c = parse_couple("L1,L2", 3)
    inside = k_functional(f, 1.0, c, constraint=project)
    grid = constrained_grid_k(f, 1.0, c, project)
    assert inside.value <= grid.value * (1.0 + 1e-6)
    assert abs(inside.value - grid.value) <= 1e-3 * grid.value
    outside = k_functional(f, 1.0, c)
    ratio = k_closedness_ratio(f, 1.0, c, project)
    assert ratio == pytest.approx(grid.value / outside.value, rel=1e-3)
