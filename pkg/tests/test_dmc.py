import math

import numpy as np
import pytest
from scipy import stats

from parapat.apps import dmc
from parapat.comm import codec
from parapat.population import (
    ExtinctionError,
    do_timestep,
    dynamic_load_balancing,
    parallel_time_integration,
    time_integration,
)

from conftest import run


def ensemble(positions, **kw):
    kw.setdefault("stepsize", 0.01)
    kw.setdefault("rng", np.random.default_rng(0))
    return dmc.WalkerEnsemble(np.asarray(positions, float), **kw)


def test_harmonic_potential():
    v = dmc.harmonic_potential(np.array([[0, 0, 0], [1, 0, 0], [1, 2, 2]], float))
    assert v.tolist() == [0.0, 1.0, 9.0]


def test_branching_factor_examples():
    for u in (0.0, 0.3, 0.999):
        assert dmc.branching_factor(2.0, 4.0, 3.0, 0.1, u) == 1
    ln2 = math.log(2)
    for u in (0.0, 0.5, 0.999):
        assert dmc.branching_factor(0.0, 0.0, ln2, 1.0, u) == 2
    w03 = -math.log(0.3)
    assert dmc.branching_factor(w03, w03, 0.0, 1.0, 0.5) == 0


def test_branching_factor_vectorised_and_clamped():
    out = dmc.branching_factor(np.zeros(3), np.zeros(3), 100.0, 1.0, np.array([0.1, 0.2, 0.3]))
    assert out.tolist() == [10, 10, 10]


def test_branching_mean_matches_weight():
    rng = np.random.default_rng(3)
    n = 200_000
    for w in (0.3, 1.0, 2.5):
        e_trial = math.log(w)
        markers = dmc.branching_factor(np.zeros(n), np.zeros(n), e_trial, 1.0, rng.random(n))
        se = markers.std(ddof=1) / math.sqrt(n)
        assert abs(markers.mean() - w) < 3 * se + 1e-12


def test_displacement_variance():
    ens = ensemble(np.zeros((1_000_000 // 3 + 1, 3)), stepsize=0.02, D=1.5)
    ens.move()
    var = ens.positions.var()
    assert abs(var - 2 * 1.5 * 0.02) / (2 * 1.5 * 0.02) < 0.01


def test_tiny_step_keeps_markers_at_one():
    ens = ensemble(np.random.default_rng(1).standard_normal((500, 3)), stepsize=1e-12)
    ens.e_trial = 3.0
    ens.move()
    assert np.all(ens.markers == 1)


def test_equal_potential_gives_marker_one():
    # E_T equal to the potential and a vanishing step: weight is exactly 1
    pos = np.tile([1.0, 1.0, 1.0], (50, 1))
    ens = ensemble(pos, stepsize=1e-300, e_trial=3.0)
    ens.move()
    assert np.all(ens.markers == 1)


def test_finalize_timestep_rule():
    ens = ensemble(np.zeros((10, 3)), stepsize=0.1, e_trial=1.0, target_size=100)
    ens.finalize_timestep(100, 100)
    assert ens.e_trial == 1.0
    ens.finalize_timestep(100, 200)
    assert math.isclose(ens.e_trial, 1.0 - (0.1 / 0.1) * math.log(2))
    history = []
    for _ in range(5):
        ens.finalize_timestep(100, 50)
        history.append(ens.e_trial)
    assert history == sorted(history)
    with pytest.raises(ExtinctionError):
        ens.finalize_timestep(10, 0)


def test_cut_and_paste():
    pos = np.random.default_rng(2).standard_normal((6, 3))
    a = ensemble(pos)
    empty = a.cut_slice(6)
    assert len(empty.positions) == 0 and len(a) == 6
    piece = a.cut_slice(2)
    b = ensemble(np.zeros((1, 3)))
    b.paste_slice(codec.decode(codec.encode(piece)))
    assert len(a) == 2 and len(b) == 5
    assert np.array_equal(np.vstack([a.positions, b.positions[1:]]), pos)
    whole = a.cut_slice(0)
    assert len(a) == 0 and len(whole.positions) == 2
    with pytest.raises(ValueError):
        a.cut_slice(1)


def test_step_size_equals_marker_sum():
    ens = ensemble(np.random.default_rng(4).standard_normal((300, 3)), stepsize=0.2, e_trial=2.0)
    # reproduce the markers the step will draw
    twin = ensemble(ens.positions.copy(), stepsize=0.2, e_trial=2.0, rng=np.random.default_rng(0))
    twin.move()
    expected = int(twin.markers.sum())
    do_timestep(ens)
    assert len(ens) == expected


def test_initialize_partition():
    cfg = dmc.DMCConfig()
    assert len(dmc.dmc_initialize(0, 1, cfg)[0]) == 1000
    assert [len(dmc.dmc_initialize(r, 3, cfg)[0]) for r in range(3)] == [334, 333, 333]
    assert [len(dmc.dmc_initialize(r, 5, cfg)[0]) for r in range(5)] == [200] * 5
    ens, steps = dmc.dmc_initialize(1, 4, cfg)
    assert steps == 200 and ens.threshold_factor == 1.1
    # starting positions do not depend on the rank count
    joined = np.vstack([dmc.dmc_initialize(r, 4, cfg)[0].positions for r in range(4)])
    assert np.array_equal(joined, dmc.dmc_initialize(0, 1, cfg)[0].positions)


def test_initial_positions_standard_normal():
    pos = dmc.initial_positions(dmc.DMCConfig(nwalkers=20_000))
    assert stats.kstest(pos.ravel(), "norm").pvalue > 1e-3


def test_config_validation():
    for bad in ({"nwalkers": 0}, {"stepsize": 0}, {"D": -1}, {"burn_in_fraction": 1.0}):
        with pytest.raises(ValueError):
            dmc.DMCConfig(**bad)


def test_energy_estimate_constant_trace():
    trace = [dmc.Observation(100, 3.0, 3.0)] * 100
    assert dmc.dmc_energy_estimate(trace, 10) == (3.0, 0.0)
    with pytest.raises(ValueError):
        dmc.dmc_energy_estimate(trace[:15], 0)


def test_energy_estimate_is_population_weighted():
    trace = [dmc.Observation(100, 1.0, 0), dmc.Observation(300, 2.0, 0)] * 20
    est, _ = dmc.dmc_energy_estimate(trace, 0, nblocks=20)
    assert est == pytest.approx(1.75)


def test_serial_run_is_deterministic():
    cfg = dmc.DMCConfig(nwalkers=200, timesteps=30, seed=5)
    a = time_integration(lambda: dmc.dmc_initialize(0, 1, cfg))
    b = time_integration(lambda: dmc.dmc_initialize(0, 1, cfg))
    assert a == b


def test_parallel_p1_matches_serial():
    cfg = dmc.DMCConfig(nwalkers=200, timesteps=30, seed=5)
    serial = time_integration(lambda: dmc.dmc_initialize(0, 1, cfg))
    parallel = run(1, lambda c: parallel_time_integration(
        lambda r, s: dmc.dmc_initialize(r, s, cfg), finalize=dmc.merge_traces, comm=c,
        timing="uniform"), seed=5)[0]
    assert parallel == serial


def test_parallel_walker_multiset_conserved_by_rebalance():
    cfg = dmc.DMCConfig(nwalkers=120, timesteps=1, seed=2)

    def entry(comm):
        ens, _ = dmc.dmc_initialize(comm.rank, comm.size, cfg)
        # make the split skewed, then rebalance without moving
        if comm.rank == 0:
            extra = np.random.default_rng(9).standard_normal((60, 3))
            ens.paste_slice(dmc.MigrationSlice(extra, np.ones(60, dtype=np.int64)))
        before = comm.gather(ens.positions, 0)
        dynamic_load_balancing(ens, 1.0, comm)
        after = comm.gather(ens.positions, 0)
        return (before, after, len(ens)) if comm.rank == 0 else len(ens)

    out = run(4, entry)
    before, after, n0 = out[0]
    sizes = [n0] + out[1:]
    key = lambda arr: sorted(map(tuple, np.vstack(arr).tolist()))
    assert key(before) == key(after)
    assert max(sizes) - min(sizes) <= 1


def test_merge_traces():
    t0 = [dmc.Observation(10, 1.0, 2.0, 1)]
    t1 = [dmc.Observation(30, 3.0, 2.0, 2)]
    m = dmc.merge_traces([t0, t1])
    assert m == [dmc.Observation(40, 2.5, 2.0, 3)]
    with pytest.raises(ValueError):
        dmc.merge_traces([t0, t0 * 2])


def test_trace_csv(tmp_path):
    trace = [dmc.Observation(10, 1 / 3, 2.5), dmc.Observation(12, 0.1, 2.4)]
    dmc.write_trace_csv(tmp_path / "t.csv", trace)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "step,population,meanV,E_T"
    assert float(lines[1].split(",")[2]) == 1 / 3


@pytest.mark.slow
@pytest.mark.parametrize("tau, steps", [(0.05, 3000), (0.02, 4000), (0.01, 5000)])
def test_energy_near_three_across_time_steps(tau, steps):
    cfg = dmc.DMCConfig(nwalkers=1000, stepsize=tau, timesteps=steps, seed=1)
    est, se = dmc.dmc_energy_estimate(time_integration(lambda: dmc.dmc_initialize(0, 1, cfg)),
                                      steps // 5)
    assert abs(est - 3.0) < 0.05 * 3.0
    assert se < 0.05
