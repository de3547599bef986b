import math

import numpy as np
import pytest

from impatientq.des import run
from impatientq.metrics import (
    batch_means,
    bound_report,
    erlang_b,
    loss_probability,
    mm1_wait_tail,
)
from impatientq.sequences import Deterministic, Exponential, StationaryPath, Uniform
from support import DRAIN, GROWTH, det_spec, iid_spec


def test_erlang_b_values():
    assert erlang_b(1, 1.0) == 0.5
    assert erlang_b(2, 1.0) == pytest.approx(0.2, abs=1e-15)
    assert erlang_b(3, 1.2) == pytest.approx(0.0897755610972568, abs=1e-15)


def test_erlang_b_arguments():
    with pytest.raises(ValueError):
        erlang_b(0, 1.0)
    with pytest.raises(ValueError):
        erlang_b(2, 0.0)
    with pytest.raises(ValueError):
        erlang_b(2, -1.0)


def test_mm1_wait_tail_values():
    assert mm1_wait_tail(0.5, 1.0, 0.0) == 0.5
    assert mm1_wait_tail(0.5, 1.0, math.log(2.0) / 0.5) == pytest.approx(0.25, rel=1e-12)
    assert mm1_wait_tail(0.9, 2.0, 1e6) == pytest.approx(0.0, abs=1e-300)


def test_mm1_wait_tail_arguments():
    with pytest.raises(ValueError):
        mm1_wait_tail(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        mm1_wait_tail(0.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        mm1_wait_tail(0.5, 1.0, -1.0)


def test_loss_probability_no_impatience():
    spec = iid_spec(9, Exponential(1.0), Exponential(2.0), Deterministic(math.inf))
    est = loss_probability(run(StationaryPath(spec), 1, 5_000))
    assert est.probability == 0.0
    assert est.half_width == 0.0


def test_loss_probability_periodic():
    spec = det_spec(1, tau=1.0, sigma=1.5, patience=0.0)
    est = loss_probability(run(StationaryPath(spec), 1, 10_000))
    assert est.probability == 0.5


def test_loss_probability_short_trace_binomial():
    spec = det_spec(1, tau=1.0, sigma=1.5, patience=0.0)
    est = loss_probability(run(StationaryPath(spec), 1, 10))
    assert est.n == 10 and 0.0 <= est.probability <= 1.0
    with pytest.raises(ValueError):
        loss_probability([])


def test_batch_means_basics():
    est = batch_means(np.full(3000, 0.25))
    assert est.probability == 0.25 and est.half_width == 0.0
    rng = np.random.default_rng(0)
    x = rng.uniform(size=30_000)
    est = batch_means(x)
    assert abs(est.probability - 0.5) < 0.02
    assert 0.0 < est.half_width < 0.02
    with pytest.raises(ValueError):
        batch_means(np.ones(10))


def test_bound_report_drain_all_zero():
    rep = bound_report(StationaryPath(DRAIN), 2, 2_000, warmup=100)
    for est in (rep.p_lower, rep.p_loss, rep.p_upper, rep.p_z):
        assert est.probability == 0.0 and est.half_width == 0.0
    assert rep.ordering_ok


def test_bound_report_growth_upper_one():
    rep = bound_report(StationaryPath(GROWTH), 1, 2_000, warmup=100)
    assert rep.p_upper.probability == 1.0
    assert rep.p_z.probability == 1.0
    assert rep.ordering_ok


def test_bound_report_ordering_mm2d():
    spec = iid_spec(23, Exponential(1.0), Exponential(0.6), Deterministic(1.0))
    rep = bound_report(StationaryPath(spec), 2, 30_000, warmup=3_000)
    assert rep.lower_stabilized and rep.upper_stabilized and rep.z_stabilized
    assert rep.ordering_ok
    # the sandwich is strict for this load
    assert rep.p_lower.probability < rep.p_loss.probability
    assert rep.p_loss.probability < rep.p_upper.probability
    chain = [rep.p_lower, rep.p_loss, rep.p_upper, rep.p_z]
    assert all(a.probability <= b.probability for a, b in zip(chain, chain[1:]))


def test_bound_report_samples():
    spec = iid_spec(23, Exponential(1.0), Exponential(0.6), Deterministic(1.0))
    rep = bound_report(StationaryPath(spec), 2, 1_000, warmup=500, keep_samples=True)
    samples = rep.samples
    assert samples.shape == (1_000, 6)
    # pathwise ordering of the sampled processes
    assert np.all(samples[:, 0] <= samples[:, 1] + 1e-9)
    assert np.all(samples[:, 1] <= samples[:, 2] + 1e-9)
    assert np.all(samples[:, 2] <= np.maximum(samples[:, 3], 0.0) + 1e-9)


def test_bound_report_rejects_empty():
    with pytest.raises(ValueError):
        bound_report(StationaryPath(DRAIN), 2, 0)


def test_mm1_wait_tail_matches_simulation():
    # single Markovian server at half load, no impatience
    from impatientq.loynes import exact_states

    rho, mu = 0.5, 2.0
    spec = iid_spec(77, Exponential(1.0), Exponential(mu), Deterministic(math.inf))
    states, _ = exact_states(StationaryPath(spec), 0, 200_000, (0.0,))
    waits = states[2_000:, 0]
    for x in (0.0, 1.0, 2.0):
        emp = batch_means(waits > x)
        want = mm1_wait_tail(rho, mu, x)
        assert abs(emp.probability - want) <= max(3 * emp.half_width, 0.01), (x, emp, want)


def test_top_supremum_roll_matches_per_index_bound():
    # the rolled lag-S supremum must equal an independent truncated
    # computation at each index (clipped comparison, deep truncation)
    from impatientq.metrics import _top_supremum_series
    from impatientq.loynes import supremum_bound

    spec = iid_spec(41, Exponential(1.0), Exponential(0.7), Uniform(0.0, 1.5))
    path = StationaryPath(spec)
    servers, depth, n = 3, 4096, 40
    series = _top_supremum_series(path, 0, n, depth, servers)
    for t in range(0, n, 7):
        zb = supremum_bound(path, t, "upper", depth, servers, window=10**9)
        assert abs(max(series[t], 0.0) - zb.values[0]) <= 1e-9, t


def test_bound_report_single_server():
    spec = iid_spec(53, Exponential(1.0), Exponential(0.8), Deterministic(0.5))
    rep = bound_report(StationaryPath(spec), 1, 20_000, warmup=2_000)
    assert rep.ordering_ok
    assert rep.p_loss.probability > 0.0


def test_bound_report_markov_modulated():
    from support import random_mm_spec
    import numpy as np

    rep = bound_report(StationaryPath(random_mm_spec(np.random.default_rng(2))),
                       2, 20_000, warmup=2_000)
    assert rep.ordering_ok
