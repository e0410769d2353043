import numpy as np
import pytest

from penaltystop.chain import build_diffusion_chain, sample_paths
from penaltystop.lattice import StateGrid, build_region, interval
from penaltystop.oracle import random_instance
from penaltystop.payoff import Mode, PayoffSpec, constant, functional_value, gaussian, stop_payoff
from penaltystop.penalty_solver import PenaltyConfig, PenaltyProblem
from penaltystop.policy import StoppingRegion, build_region_eps, estimate_exit_tail, evaluate_policy


@pytest.fixture(scope="module")
def exit_problem():
    grid = StateGrid.uniform(-1.2, 1.2, 0.1)
    kernel = build_diffusion_chain(grid, lambda x: 0.2 + 0 * x, lambda x: 1 + 0 * x, 0.005)
    region = build_region(grid, interval(-1.0, 1.0))
    spec = PayoffSpec(0.5, constant(0.05), gaussian(0.8, 0.0, 0.7), constant(1.0))
    return PenaltyProblem(kernel, region, spec)


def test_masks(exit_problem):
    p = exit_problem
    fld = p.solve(256.0)
    masks = [build_region_eps(fld, p.spec, p.region, e).mask for e in (0.0, 0.01, 0.1, 10.0)]
    for m in masks:
        assert m[0][~p.region.interior].all()
    for lo, hi in zip(masks, masks[1:]):
        assert np.all(lo <= hi)
    assert masks[-1].all()
    with pytest.raises(ValueError):
        build_region_eps(fld, p.spec, p.region, -1.0)


def test_all_true_mask_pays_G_exactly(exit_problem):
    p = exit_problem
    n = p.region.grid.size
    start = p.region.grid.index_of(0.3)
    est = evaluate_policy(p.kernel, p.region, p.spec, StoppingRegion(np.ones((1, n)), 0.0), start, n_paths=500)
    assert est.se == 0.0
    assert est.mean == stop_payoff(p.spec, p.region, 0.0)[start]


def test_never_stop_matches_beta_zero(exit_problem):
    p = exit_problem
    n = p.region.grid.size
    start = p.region.grid.index_of(0.0)
    w0 = p.solve(0.0, PenaltyConfig(tol=1e-12)).values[0, start]
    est = evaluate_policy(p.kernel, p.region, p.spec, StoppingRegion(np.zeros((1, n)), 0.0), start,
                          n_paths=20_000, seed=3)
    assert est.se > 0
    assert est.within(w0)


def test_matches_functional_value_on_same_paths():
    kernel, region, spec = random_instance(31, 10, Mode.FINITE, slices=12, jumps=True)
    rng = np.random.default_rng(0)
    mask = rng.random((13, 10)) < 0.2
    start, seed, n = 4, 17, 300
    est = evaluate_policy(kernel, region, spec, StoppingRegion(mask, 0.0), start, n_paths=n, seed=seed)
    paths = sample_paths(kernel, start, 12, n, seed=seed)
    vals = []
    for path in paths:
        hit = [k for k in range(12) if mask[k, path[k]]]
        vals.append(functional_value(spec, region, kernel, path, hit[0] if hit else None))
    assert est.mean == pytest.approx(np.mean(vals), abs=1e-12)


def test_policy_deterministic_and_validated(exit_problem):
    p = exit_problem
    n = p.region.grid.size
    mask = StoppingRegion(np.zeros((1, n)), 0.0)
    a = evaluate_policy(p.kernel, p.region, p.spec, mask, 10, n_paths=1000, seed=5)
    b = evaluate_policy(p.kernel, p.region, p.spec, mask, 10, n_paths=1000, seed=5)
    assert a == b
    with pytest.raises(ValueError):
        evaluate_policy(p.kernel, p.region, p.spec, mask, 10, n_paths=99)
    with pytest.raises(IndexError):
        evaluate_policy(p.kernel, p.region, p.spec, mask, n, n_paths=100)


def test_exit_tail(exit_problem):
    p = exit_problem
    grid = p.region.grid
    outside = grid.index_of(1.2)
    assert estimate_exit_tail(p.kernel, p.region, outside, 0.1, 500).mean == 0.0
    mid = grid.index_of(0.0)
    assert estimate_exit_tail(p.kernel, p.region, mid, 0.0, 500).mean == 1.0
    etas = [0.005, 0.05, 0.25, 1.0]
    tails = [estimate_exit_tail(p.kernel, p.region, mid, e, 5000, seed=2).mean for e in etas]
    assert tails[0] == 1.0  # one step cannot leave from the centre
    assert all(b <= a for a, b in zip(tails, tails[1:]))
    with pytest.raises(ValueError):
        estimate_exit_tail(p.kernel, p.region, mid, 0.0123, 500)


def test_mask_csv(tmp_path):
    r = StoppingRegion(np.array([[True, False, True]]), 0.1)
    path = tmp_path / "mask.csv"
    r.to_csv(path, "prov")
    assert path.read_text().splitlines() == ["# prov", "slice,state,stop", "0,0,1", "0,1,0", "0,2,1"]
