import numpy as np
import pytest
import scipy.sparse as sp

from penaltystop.chain import TransitionKernel
from penaltystop.lattice import Label, RegionGrid, StateGrid, build_region
from penaltystop.oracle import OracleMethod, OracleRefused, control_enum, random_instance, snell_backward
from penaltystop.payoff import Mode, PayoffSpec, constant, stop_payoff, zero
from penaltystop.penalty_solver import PenaltyConfig, PenaltyProblem


def two_state():
    P = np.array([[0.5, 0.5], [0.0, 1.0]])
    h = 0.1
    alpha = np.log(10 / 9) / h
    kernel = TransitionKernel(sp.csr_matrix(P), h)
    region = build_region(StateGrid(np.array([0.0, 1.0])), lambda x: x < 0.5)
    G = lambda t, x: np.where(np.asarray(x) < 0.5, 1.0, 0.5)
    spec = PayoffSpec(alpha, zero(), G, constant(0.5), mode=Mode.EXIT)
    return kernel, region, spec


def test_two_state_hand_solution():
    kernel, region, spec = two_state()
    assert region.labels.tolist() == [Label.INTERIOR, Label.BOUNDARY]
    res = snell_backward(kernel, region, spec, 200)
    assert res.values[0, 0] == pytest.approx(1.0, abs=1e-12)
    w = PenaltyProblem(kernel, region, spec).solve(2.0**20, PenaltyConfig(tol=1e-13)).values[0, 0]
    assert 1.0 - 1e-4 < w <= 1.0 + 1e-12


def test_zero_payoffs_give_zero():
    kernel, region, _ = random_instance(1, 10, Mode.EXIT)
    spec = PayoffSpec(1.0, zero(), zero(), zero())
    assert np.all(snell_backward(kernel, region, spec, 30).values == 0)
    assert np.all(control_enum(kernel, region, spec, 8.0).values == 0)


def test_horizon_zero_returns_payoff():
    kernel, region, spec = random_instance(2, 10, Mode.GENERAL, jumps=True)
    res = snell_backward(kernel, region, spec, 0)
    assert np.array_equal(res.values[0], stop_payoff(spec, region, 0.0))
    assert res.method is OracleMethod.SNELL_BACKWARD


def test_snell_monotone_in_horizon():
    kernel, region, spec = random_instance(4, 12, Mode.INFINITE)
    prev = None
    for N in (0, 1, 5, 20, 80):
        res = snell_backward(kernel, region, spec, N)
        if prev is not None:
            inc = res.values[0] - prev.values[0]
            assert np.all(inc >= -1e-12) and np.max(inc) <= prev.tail_bound + 1e-12
        prev = res


def test_snell_needs_horizon_when_stationary():
    kernel, region, spec = random_instance(4, 5, Mode.INFINITE)
    with pytest.raises(ValueError):
        snell_backward(kernel, region, spec)


def test_finite_snell_default_horizon():
    kernel, region, spec = random_instance(6, 6, Mode.FINITE, slices=7)
    res = snell_backward(kernel, region, spec)
    assert res.values.shape == (8, 6) and res.tail_bound == 0.0


def test_control_enum_beta_zero_is_no_stopping():
    kernel, region, spec = random_instance(5, 6, Mode.EXIT)
    enum = control_enum(kernel, region, spec, 0.0)
    fld = PenaltyProblem(kernel, region, spec).solve(0.0, PenaltyConfig(tol=1e-13))
    assert np.max(np.abs(enum.values - fld.values)) <= 1e-11


def test_control_enum_self_loops():
    kernel = TransitionKernel(sp.identity(2, format="csr"), 0.2)
    region = RegionGrid(StateGrid(np.array([0.0, 1.0])), np.full(2, Label.INTERIOR))
    spec = PayoffSpec(1.0, zero(), constant(2.0), zero(), mode=Mode.INFINITE)
    res = control_enum(kernel, region, spec, 3.0)
    assert res.values[0, 0] == pytest.approx(3 * 2 / 4)
    assert res.values[0] == pytest.approx([1.5, 1.5])
    assert res.best_policy == 3  # stop in both states


def test_control_enum_refuses_large_instances():
    kernel, region, spec = random_instance(6, 8, Mode.FINITE, slices=10)
    with pytest.raises(OracleRefused, match="policies"):
        control_enum(kernel, region, spec, 2.0)


def test_instance_hash_stable():
    a = snell_backward(*random_instance(9, 6, Mode.EXIT), 5).instance_hash
    b = snell_backward(*random_instance(9, 6, Mode.EXIT), 5).instance_hash
    c = snell_backward(*random_instance(10, 6, Mode.EXIT), 5).instance_hash
    assert a == b != c
