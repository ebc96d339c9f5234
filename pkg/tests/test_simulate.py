import math

import numpy as np
import pytest

from retrialq import simulate
from retrialq.errors import DomainError, StabilityError
from retrialq.exact import l_inf_series
from retrialq.model import Deterministic, Exponential, Lomax, ModelParams
from retrialq.simulate import SimConfig, replicate, run_replication, simulate_retrial, simulate_standard, stream

from .conftest import E1, E2, MM1

ZHW = 3.0 / simulate.Z95  # 3 standard errors expressed in 95% half-widths


@pytest.fixture(scope="module")
def e1_short():
    return simulate_retrial(E1, SimConfig(horizon=2e5, replications=4, base_seed=3, max_tracked_level=16))


# -- configuration ------------------------------------------------------------

@pytest.mark.parametrize(
    "kw",
    [
        {"horizon": 0.0},
        {"horizon": 100.0, "warmup": 100.0},
        {"horizon": 100.0, "warmup": -1.0},
        {"horizon": math.inf},
        {"horizon": 100.0, "replications": 0},
        {"horizon": 100.0, "max_tracked_level": 0},
        {"horizon": 100.0, "base_seed": -1},
        {"horizon": 100.0, "workers": 0},
    ],
)
def test_invalid_config(kw):
    with pytest.raises(DomainError):
        SimConfig(**kw)


def test_default_warmup():
    assert SimConfig(horizon=1000.0).effective_warmup == 50.0
    assert SimConfig(horizon=1000.0, warmup=0.0).effective_warmup == 0.0


def test_unstable_model():
    p = ModelParams(2.0, 1.0, Deterministic(1), Exponential(1.0))
    with pytest.raises(StabilityError):
        simulate_retrial(p, SimConfig(horizon=10.0))


def test_stream_contract():
    a = stream(7, 3).random(5)
    b = np.random.Generator(np.random.Philox(np.random.SeedSequence([7, 3]))).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(stream(7, 3).random(5), stream(7, 4).random(5))


# -- determinism --------------------------------------------------------------

def _same(a, b):
    for name in ("tail", "tail_hw", "pmf", "d0_tail", "d1_tail", "upcrossings"):
        x, y = getattr(a, name), getattr(b, name)
        assert (x is None and y is None) or np.array_equal(x, y, equal_nan=True), name
    assert a.busy_fraction == b.busy_fraction and a.events == b.events


def test_rerun_is_identical():
    cfg = SimConfig(horizon=2e4, replications=2, base_seed=11, max_tracked_level=8)
    _same(simulate_retrial(E1, cfg), simulate_retrial(E1, cfg))


def test_workers_do_not_change_results():
    cfg = SimConfig(horizon=2e4, replications=3, base_seed=11, max_tracked_level=8)
    par = SimConfig(horizon=2e4, replications=3, base_seed=11, max_tracked_level=8, workers=3)
    _same(simulate_retrial(E1, cfg), simulate_retrial(E1, par))


def test_chunking_does_not_change_results(monkeypatch):
    cfg = SimConfig(horizon=5e3, replications=1, base_seed=5, max_tracked_level=8)
    whole = run_replication(E2, cfg, 0)
    monkeypatch.setattr(simulate, "CHUNK", 97)
    pieces = run_replication(E2, cfg, 0)
    assert np.array_equal(whole.occupancy, pieces.occupancy)
    assert whole.events == pieces.events


def test_distinct_seeds_agree_statistically():
    a = simulate_retrial(MM1, SimConfig(horizon=2e4, replications=8, base_seed=1, max_tracked_level=8))
    b = simulate_retrial(MM1, SimConfig(horizon=2e4, replications=8, base_seed=2, max_tracked_level=8))
    assert a.busy_fraction != b.busy_fraction
    joint = math.hypot(a.busy_fraction_hw, b.busy_fraction_hw)
    assert abs(a.busy_fraction - b.busy_fraction) <= ZHW * joint


def test_half_width_scaling():
    cfg = dict(horizon=2e4, base_seed=9, max_tracked_level=8)
    small = simulate_retrial(MM1, SimConfig(replications=16, **cfg))
    large = simulate_retrial(MM1, SimConfig(replications=64, **cfg))
    assert 1.5 <= small.busy_fraction_hw / large.busy_fraction_hw <= 2.5


def test_single_replication_has_no_interval():
    est = simulate_retrial(MM1, SimConfig(horizon=1e3, max_tracked_level=4))
    assert est.replications == 1
    assert math.isnan(est.busy_fraction_hw)


# -- structure of the estimates -----------------------------------------------

def test_estimate_shapes(e1_short):
    assert e1_short.tail.shape == (16,)
    assert e1_short.pmf.shape == (17,)
    assert e1_short.d0_tail.shape == (16,) and e1_short.d1_tail.shape == (16,)
    assert e1_short.seeds == ((3, 0), (3, 1), (3, 2), (3, 3))


def test_tails_nonincreasing(e1_short):
    for t in (e1_short.tail, e1_short.d0_tail, e1_short.d1_tail):
        assert np.all(np.diff(t) <= 0) and np.all((t >= 0) & (t <= 1))
    assert 0.0 <= e1_short.busy_fraction <= 1.0


def test_top_bucket_keeps_overflow():
    est = simulate_retrial(MM1, SimConfig(horizon=5e4, replications=2, base_seed=4, max_tracked_level=3))
    assert est.pmf.sum() == pytest.approx(1.0, abs=1e-9)
    # the top bucket holds P{L >= 3} = 0.125
    assert est.pmf[-1] == pytest.approx(0.125, abs=0.02)
    assert est.tail[-1] == pytest.approx(est.pmf[-1], abs=1e-9)


def test_conservation_per_replication():
    cfg = SimConfig(horizon=5e4, base_seed=21, max_tracked_level=12)
    est = simulate_retrial(E1, cfg)  # one replication, so means are the replication values
    busy = est.busy_fraction
    recombined = (1 - busy) * est.d0_pmf
    recombined[1:] += busy * est.d1_pmf[:-1]
    recombined[-1] += busy * est.d1_pmf[-1]
    np.testing.assert_allclose(est.pmf, recombined, rtol=1e-9, atol=1e-12)


def test_reliability_flags():
    est = simulate_retrial(E1, SimConfig(horizon=2e3, base_seed=2, max_tracked_level=40))
    assert est.reliable[0]
    assert not est.reliable[-1]
    assert np.all(np.diff(est.reliable.astype(int)) <= 0)


# -- statistical oracles ------------------------------------------------------

@pytest.fixture(scope="module")
def mm1_runs():
    cfg = SimConfig(horizon=1e6, replications=8, base_seed=31, max_tracked_level=16)
    return simulate_retrial(MM1, cfg), simulate_standard(MM1, cfg)


@pytest.mark.parametrize("which", [0, 1], ids=["retrial", "standard"])
def test_mm1_geometric_tail(mm1_runs, which):
    est = mm1_runs[which]
    j = np.arange(11)
    assert np.all(np.abs(est.tail[:11] - 0.5 ** (j + 1)) <= ZHW * est.tail_hw[:11])
    assert abs(est.busy_fraction - 0.5) <= ZHW * est.busy_fraction_hw


def test_standard_system_has_no_orbit(mm1_runs):
    assert mm1_runs[1].system == "standard" and mm1_runs[1].d0_tail is None


def test_pareto_batches_busy_fraction():
    est = simulate_retrial(E2, SimConfig(horizon=2e5, replications=8, base_seed=8, max_tracked_level=8))
    assert abs(est.busy_fraction - E2.rho) <= ZHW * est.busy_fraction_hw


def test_standard_mean_matches_exact():
    # finite service variance, so the time-average size obeys a CLT
    p = ModelParams(0.5, 1.0, Deterministic(1), Lomax(2.5, 3.5))
    est = simulate_standard(p, SimConfig(horizon=2e5, replications=16, base_seed=12, max_tracked_level=8))
    exact_mean = l_inf_series(p, 4096).mean()
    assert abs(est.mean_size - exact_mean) <= ZHW * est.mean_size_hw


def test_replicate_matches_wrappers():
    cfg = SimConfig(horizon=1e3, replications=2, base_seed=1, max_tracked_level=4)
    _same(replicate(MM1, cfg, retrial=False), simulate_standard(MM1, cfg))
