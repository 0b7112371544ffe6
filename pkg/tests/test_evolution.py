import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srsweep import kernels
from srsweep.errors import ResourceError, ShapeError, UndefinedError
from srsweep.evolution import (
    SectorMixture,
    apply_channel,
    kraus_operators,
    run_exact_tree,
    run_kraus,
    run_mc,
    trajectory_uniforms,
)
from srsweep.sectors import sector_dim
from srsweep.state import MediumState, ModelParams, new_all_excited, new_all_ground, random_state
from srsweep.sweep import PhotonSpin


@pytest.mark.parametrize("m", [2, 4, 8])
@pytest.mark.parametrize("n", [1, 2, 10])
def test_tree_and_kraus_agree(m, n):
    p = ModelParams(m, 0.35)
    tree = run_exact_tree(p, new_all_ground(m), "L" * n)
    kr = run_kraus(p, new_all_ground(m), "L" * n)
    for a, b in ((tree.series.p_elastic, kr.series.p_elastic), (tree.series.mean_excitation, kr.series.mean_excitation),
                 (tree.series.sector_entropy, kr.series.sector_entropy)):
        np.testing.assert_allclose(a, b, atol=1e-10, rtol=0)
    assert abs(tree.total_probability - 1) < 1e-12
    assert kr.max_trace_error < 1e-12


@given(st.integers(1, 5), st.floats(0.0, math.pi / 2), st.text("LS", min_size=1, max_size=6), st.data())
def test_modes_agree_on_mixed_patterns(m, j, pattern, data):
    k = data.draw(st.integers(0, m))
    init = random_state(m, k, np.random.default_rng(data.draw(st.integers(0, 2**32 - 1))))
    p = ModelParams(m, j)
    tree = run_exact_tree(p, init, pattern)
    kr = run_kraus(p, init, pattern)
    np.testing.assert_allclose(tree.series.p_inelastic, kr.series.p_inelastic, atol=1e-10, rtol=0)
    np.testing.assert_allclose(tree.series.p_elastic + tree.series.p_inelastic, 1.0, atol=1e-12)


def test_branch_sector_bookkeeping():
    p = ModelParams(5, 0.6)
    init = random_state(5, 2, np.random.default_rng(4))
    res = run_exact_tree(p, init, "LSLLS")
    for br in res.branches:
        shift = sum((1 if s is PhotonSpin.L else -1) for s, o in zip(br.incoming, br.outcome_history) if s is not o)
        assert br.state.is_zero() or br.state.sector == 2 + shift
        assert br.flips == sum(s is not o for s, o in zip(br.incoming, br.outcome_history))
        assert br.probability == pytest.approx(br.state.norm2(), rel=1e-12)


def test_excitation_is_monotone():
    p = ModelParams(6, 0.4)
    up = run_kraus(p, new_all_ground(6), "L" * 30).series.mean_excitation
    assert np.all(np.diff(up) >= -1e-12)
    down = run_kraus(p, new_all_excited(6), "S" * 30).series.mean_excitation
    assert np.all(np.diff(down) <= 1e-12)


def test_zero_coupling_changes_nothing():
    res = run_kraus(ModelParams(4, 0.0), new_all_ground(4), "LLSL")
    assert np.all(res.series.p_elastic == 1.0)
    assert np.all(res.series.mean_excitation == 0.0)


def test_stokes_series_convention():
    res = run_exact_tree(ModelParams(3, 0.5), new_all_excited(3), "SS")
    # a Stokes photon that stays Stokes is counted in P_stokes
    np.testing.assert_allclose(res.series.p_stokes, res.series.p_elastic)


def test_tree_pruning_and_budget():
    p = ModelParams(4, 0.3)
    full = run_exact_tree(p, new_all_ground(4), "L" * 6)
    pruned = run_exact_tree(p, new_all_ground(4), "L" * 6, prune_eps=0.05)
    assert len(pruned.branches) < len(full.branches)
    assert all(b.probability >= 0.05 for b in pruned.branches)
    with pytest.raises(ResourceError, match="photon"):
        run_exact_tree(p, new_all_ground(4), "L" * 6, max_branches=8)
    with pytest.raises(ValueError):
        run_exact_tree(p, new_all_ground(4), "L", prune_eps=-1)


def test_invalid_initial_states():
    p = ModelParams(3, 0.3)
    with pytest.raises(ShapeError):
        run_kraus(p, new_all_ground(4), "L")
    with pytest.raises(UndefinedError):
        run_exact_tree(p, MediumState(3, 0, {}), "L")


@pytest.mark.parametrize("spin", ["L", "S"])
@pytest.mark.parametrize("k", [0, 2, 4])
def test_channel_matches_dense_kraus_products(spin, k):
    p = ModelParams(6, 0.45)
    v = random_state(6, k, np.random.default_rng(k)).amplitudes
    from srsweep.sectors import to_dense

    vec = to_dense(MediumState(6, k, v))
    rho = np.outer(vec, vec.conj())
    kel, kin = kraus_operators(p, k, spin)
    el, inel = apply_channel(rho, p, k, spin)
    if kin is None:
        # Stokes photon on the unexcited medium passes untouched
        assert inel is None
        np.testing.assert_array_equal(el, rho)
        return
    np.testing.assert_allclose(el, kel @ rho @ kel.conj().T, atol=1e-14)
    np.testing.assert_allclose(inel, kin @ rho @ kin.conj().T, atol=1e-14)
    # completeness: K_el^dag K_el + K_in^dag K_in = 1
    eye = kel.conj().T @ kel + kin.conj().T @ kin
    np.testing.assert_allclose(eye, np.eye(sector_dim(6, k)), atol=1e-14)


def test_mixture_stays_physical():
    res = run_kraus(ModelParams(6, 0.5), new_all_ground(6), "LLSLLSLL")
    mix = res.mixture
    assert abs(mix.total_trace - 1) < 1e-12
    assert mix.hermiticity_error() < 1e-14
    assert mix.min_eigenvalue() > -1e-12
    assert mix.excitation_profile().sum() == pytest.approx(mix.mean_excitation(), abs=1e-12)


def test_kraus_caps():
    with pytest.raises(ResourceError, match="mc"):
        run_kraus(ModelParams(15, 0.1), new_all_ground(15), "L")


def test_mixture_from_state_normalises():
    mix = SectorMixture.from_state(MediumState(3, 1, {1: 2.0, 2: 2.0}))
    assert mix.total_trace == pytest.approx(1.0)
    assert mix.sector_entropy() == pytest.approx(0.0, abs=1e-12)


# --- Monte Carlo ----------------------------------------------------------------


def test_mc_matches_kraus_small_system():
    p = ModelParams(4, 0.5)
    kr = run_kraus(p, new_all_ground(4), "L" * 10).series.p_inelastic
    stats = run_mc(p, new_all_ground(4), "L" * 10, 4000, 99)
    se = np.sqrt(kr * (1 - kr) / 4000)
    assert np.all(np.abs(stats.frequencies - kr) <= 4 * se)
    assert stats.sector_counts.sum(axis=1).tolist() == [4000] * 10


def test_mc_is_reproducible_and_thread_independent():
    p = ModelParams(5, 0.4)
    runs = [run_mc(p, new_all_ground(5), "LLSLL", 700, 11, threads=t) for t in (1, 2, 4)]
    for r in runs[1:]:
        assert np.array_equal(r.inelastic_counts, runs[0].inelastic_counts)
        assert np.array_equal(r.sector_counts, runs[0].sector_counts)
        assert np.array_equal(r.profile_sum, runs[0].profile_sum)
    other = run_mc(p, new_all_ground(5), "LLSLL", 700, 12)
    assert not np.array_equal(other.inelastic_counts, runs[0].inelastic_counts)


def test_certain_outcomes_consume_no_randomness():
    assert run_mc(ModelParams(4, 0.0), new_all_ground(4), "L" * 5, 50, 1).draws == 0
    certain = run_mc(ModelParams(4, math.pi / 2), new_all_ground(4), "L" * 6, 50, 1)
    assert certain.draws == 0 and certain.frequencies[:4].tolist() == [1.0] * 4
    assert run_mc(ModelParams(3, 0.4), new_all_ground(3), "SSS", 20, 1).draws == 0
    # the opening S is certain; the L photon and an S meeting an excitation are not
    mixed = run_mc(ModelParams(3, 0.4), new_all_ground(3), "SLS", 20, 1)
    assert mixed.draws == 20 + mixed.inelastic_counts[1]


def test_trajectory_streams():
    a = trajectory_uniforms(7, 0, 4, 3)
    b = trajectory_uniforms(7, 2, 2, 3)
    np.testing.assert_array_equal(a[2:], b)
    assert not np.array_equal(a[0], a[1])


def test_mc_merge_and_validation():
    p = ModelParams(3, 0.4)
    a = run_mc(p, new_all_ground(3), "LL", 10, 5)
    b = run_mc(p, new_all_ground(3), "LL", 10, 5)
    assert a.merge(b).trials == 20
    with pytest.raises(ValueError):
        a.merge(run_mc(p, new_all_ground(3), "LL", 10, 6))
    for kwargs in ({"trials": 0, "seed": 1}, {"trials": 5, "seed": -1}):
        with pytest.raises(ValueError):
            run_mc(p, new_all_ground(3), "L", **kwargs)
    with pytest.raises(ValueError):
        run_mc(p, new_all_ground(3), "L", 5, 1, threads=0)
    with pytest.raises(ResourceError):
        run_mc(ModelParams(21, 0.1), new_all_ground(21), "L", 5, 1)


@pytest.mark.skipif("compiled" not in kernels.AVAILABLE, reason="extension not built")
def test_mc_backends_agree():
    p = ModelParams(6, 0.45)
    out = {}
    for name in ("compiled", "python"):
        with kernels.backend(name):
            out[name] = run_mc(p, random_state(6, 1, np.random.default_rng(2)), "LLSLLLSL", 300, 3)
    a, b = out["compiled"], out["python"]
    assert np.array_equal(a.inelastic_counts, b.inelastic_counts)
    assert np.array_equal(a.sector_counts, b.sector_counts)
    assert a.draws == b.draws
    np.testing.assert_allclose(a.profile_sum, b.profile_sum, rtol=1e-12)
