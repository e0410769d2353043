import numpy as np
import pytest

from penaltystop.chain import TransitionKernel
from penaltystop.lattice import Label, StateGrid, below, build_region
from penaltystop.payoff import (
    BoundaryConvention,
    Mode,
    PayoffSpec,
    TabulatedPayoff,
    capped_exp,
    constant,
    discount_weights,
    effective_F,
    functional_value,
    linear,
    zero,
)
import scipy.sparse as sp


@pytest.fixture
def setup():
    g = StateGrid.uniform(0.0, 2.0, 0.5)  # 0, .5, 1, 1.5, 2
    region = build_region(g, below(1.0))  # interior 0, .5; boundary 1; exterior 1.5, 2
    P = sp.diags([np.full(4, 0.5), np.r_[0.5, np.zeros(3), 0.5], np.full(4, 0.5)], [-1, 0, 1])
    kernel = TransitionKernel(sp.csr_matrix(P), 0.1)
    return g, region, kernel


def test_effective_F(setup):
    g, region, _ = setup
    spec = PayoffSpec(1.0, zero(), constant(2.0), constant(3.0), mode=Mode.GENERAL)
    assert effective_F(spec, region, 0.0, 0) == 2.0
    assert effective_F(spec, region, 0.0, 4) == 3.0
    assert effective_F(spec, region, 0.0, 2) == 3.0  # boundary, max convention
    spec_g = PayoffSpec(1.0, zero(), constant(2.0), constant(3.0), mode=Mode.GENERAL,
                        boundary_convention=BoundaryConvention.USE_G)
    assert effective_F(spec_g, region, 0.0, 2) == 2.0
    with pytest.raises(IndexError):
        effective_F(spec, region, 0.0, 9)


def test_alpha_validation():
    with pytest.raises(ValueError):
        PayoffSpec(0.0, zero(), zero(), zero())
    PayoffSpec(0.0, zero(), zero(), zero(), mode=Mode.FINITE, horizon=1.0)
    with pytest.raises(ValueError):
        PayoffSpec(0.5, zero(), zero(), zero(), mode=Mode.FINITE)


@pytest.mark.filterwarnings("ignore:divide by zero")
def test_nonfinite_payoff_rejected(setup):
    _, region, _ = setup
    spec = PayoffSpec(1.0, zero(), lambda t, x: 1.0 / (np.asarray(x) - 1.0), zero())
    with pytest.raises(ValueError, match="not finite"):
        spec.arrays(region)


def test_immediate_stop_pays_G(setup):
    _, region, kernel = setup
    spec = PayoffSpec(1.0, constant(5.0), linear(1.0, 2.0), constant(-1.0))
    assert functional_value(spec, region, kernel, [1, 2, 3], 0) == pytest.approx(2.0)


def test_exit_before_stop_pays_discounted_H(setup):
    _, region, kernel = setup
    spec = PayoffSpec(1.0, zero(), constant(7.0), constant(3.0))
    v = functional_value(spec, region, kernel, [0, 1, 2, 3], stop_step=3)
    assert v == pytest.approx(np.exp(-1.0 * 2 * 0.1) * 3.0)


def test_running_payoff_exact_discount(setup):
    _, region, kernel = setup
    spec = PayoffSpec(2.0, constant(1.0), zero(), zero())
    a, d = discount_weights(2.0, 0.1)
    v = functional_value(spec, region, kernel, [0, 1, 0, 1], stop_step=None)
    assert v == pytest.approx(a * (1 + d + d * d))


def test_pure_discounting_vanishes():
    g = StateGrid(np.arange(3.0))
    region = build_region(g, lambda x: x < 1.5)
    kernel = TransitionKernel(sp.identity(3, format="csr"), 0.5)
    spec = PayoffSpec(1.0, zero(), constant(1.0), constant(1.0), mode=Mode.INFINITE)
    vals = [functional_value(spec, region, kernel, np.zeros(n, dtype=int), n - 1) for n in (2, 20, 200)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-40


def test_finite_horizon_forces_stop(setup):
    _, region, kernel = setup
    spec = PayoffSpec(0.0, zero(), lambda t, x: t + 0 * np.asarray(x), zero(), mode=Mode.FINITE, horizon=0.2)
    v = functional_value(spec, region, kernel, [0, 0, 0, 0, 0], stop_step=None)
    assert v == pytest.approx(0.2)


def test_monotone_in_payoff_data(setup):
    _, region, kernel = setup
    lo = PayoffSpec(0.5, constant(0.1), constant(1.0), constant(0.0))
    hi = PayoffSpec(0.5, constant(0.2), constant(1.5), constant(0.5))
    for path, stop in (([0, 1, 2], None), ([0, 1, 0], 2), ([1, 0, 1, 0], None)):
        assert functional_value(hi, region, kernel, path, stop) >= functional_value(lo, region, kernel, path, stop)


def test_exit_mode_ignores_G_outside_and_H_inside(setup):
    _, region, kernel = setup
    out = ~region.interior
    G1 = lambda t, x: np.where(np.asarray(x) < 0.9, 1.0, 50.0)
    H1 = lambda t, x: np.where(np.asarray(x) < 0.9, -50.0, 2.0)
    a = PayoffSpec(0.5, zero(), G1, H1)
    b = PayoffSpec(0.5, zero(), constant(1.0), constant(2.0))
    for path, stop in (([0, 1, 2], None), ([1, 1, 0], 1), ([0, 1, 2, 3], 3)):
        assert functional_value(a, region, kernel, path, stop) == functional_value(b, region, kernel, path, stop)
    assert out.sum() == 3


def test_tabulated_payoff(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("# test\ntime,state,value\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n")
    tab = TabulatedPayoff.from_csv(path)
    assert tab(0.0, np.array([0.0, 1.0])).tolist() == [1.0, 2.0]
    assert tab(1.5, np.array([1.0])).tolist() == [4.0]
    with pytest.raises(ValueError):
        tab(0.0, np.array([0.5]))
    bad = tmp_path / "bad.csv"
    bad.write_text("t,state,value\n0,0,1\n")
    with pytest.raises(ValueError, match="missing columns"):
        TabulatedPayoff.from_csv(bad)


def test_capped_exp():
    v = capped_exp()(0.0, np.array([-1.0, 1.0, 2.0]))
    assert np.allclose(v, [np.exp(-1), np.e, np.e])
