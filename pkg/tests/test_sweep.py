import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srsweep import kernels
from srsweep.errors import ShapeError, UndefinedError
from srsweep.oracles import enumerate_paths, monodromy_blocks
from srsweep.state import BasisConfig, MediumState, ModelParams, basis_state, new_all_excited, new_all_ground, random_state
from srsweep.sweep import PhotonSpin, VertexRules, first_photon_wavefunction, parse_pattern, sweep, sweep_subchannels

L, S = PhotonSpin.L, PhotonSpin.S
couplings = st.floats(0.0, math.pi / 2, allow_nan=False)


def dense(state):
    out = np.zeros(1 << state.m, dtype=complex)
    for mask, v in state:
        out[mask] = v
    return out


def test_vertex_rules_are_unitary():
    for j in (0.0, 0.3, 1.2, math.pi / 2):
        assert VertexRules.from_params(ModelParams(1, j)).is_unitary()


def test_vertex_table():
    v = VertexRules(0.5 + 0j, 0.5j).vertices()
    assert v[(L, True)] == [(L, True, 1)]
    assert v[(S, False)] == [(S, False, 1)]
    assert [o[:2] for o in v[(L, False)]] == [(L, False), (S, True)]
    assert [o[:2] for o in v[(S, True)]] == [(S, True), (L, False)]


@pytest.mark.parametrize("m", [1, 2, 5, 13])
@pytest.mark.parametrize("j", [0.05, 0.4, 1.1])
def test_first_photon_closed_form(m, j):
    p = ModelParams(m, j)
    res = sweep(new_all_ground(m), L, p, prune_eps=0.0)
    assert abs(res.elastic.amplitude(0) - math.cos(j) ** m) < 1e-15
    phi = first_photon_wavefunction(p)
    ref = 1j * math.sin(j) * math.cos(j) ** np.arange(m)
    np.testing.assert_allclose(phi, ref, rtol=0, atol=1e-15)
    assert res.inelastic.sector == 1


def test_first_stokes_photon_on_inverted_medium():
    p = ModelParams(6, 0.5)
    res = sweep(new_all_excited(6), S, p, prune_eps=0.0)
    assert res.elastic.amplitude(63) == pytest.approx(math.cos(0.5) ** 6, abs=1e-15)
    assert res.inelastic.sector == 5


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("j", [0.2, 0.9, math.pi / 2])
def test_sweep_matches_matrix_product(m, j):
    p = ModelParams(m, j)
    blocks = monodromy_blocks(p)
    for mask in range(1 << m):
        st_in = basis_state(BasisConfig(mask, m))
        for spin, ek, ik in ((L, "A", "C"), (S, "D", "B")):
            res = sweep(st_in, spin, p, prune_eps=0.0)
            np.testing.assert_allclose(dense(res.elastic), blocks[ek][:, mask], atol=1e-14, rtol=0)
            np.testing.assert_allclose(dense(res.inelastic), blocks[ik][:, mask], atol=1e-14, rtol=0)


@pytest.mark.parametrize("m", [3, 5])
def test_sweep_matches_path_sum(m):
    p = ModelParams(m, 0.37)
    for mask in range(1 << m):
        st_in = basis_state(BasisConfig(mask, m))
        for spin in (L, S):
            paths = enumerate_paths(p, mask, spin.value)
            res = sweep(st_in, spin, p, prune_eps=0.0)
            el = {}
            inel = {}
            for (out, sp, flips), amp in paths.items():
                assert (sp == spin.value) == (flips % 2 == 0)
                tgt = el if sp == spin.value else inel
                tgt[out] = tgt.get(out, 0) + amp
            for out, amp in el.items():
                assert abs(res.elastic.amplitude(out) - amp) < 1e-15
            for out, amp in inel.items():
                assert abs(res.inelastic.amplitude(out) - amp) < 1e-15


@given(st.integers(1, 9), couplings, st.sampled_from(["L", "S"]), st.data())
def test_norm_conservation_and_sector_shift(m, j, spin, data):
    k = data.draw(st.integers(0, m))
    state = random_state(m, k, np.random.default_rng(data.draw(st.integers(0, 2**32 - 1))))
    res = sweep(state, spin, ModelParams(m, j), prune_eps=0.0)
    assert abs(res.p_elastic + res.p_inelastic - 1.0) <= 1e-12
    assert res.elastic.is_zero() or res.elastic.sector == k
    step = 1 if spin == "L" else -1
    assert res.inelastic.is_zero() or res.inelastic.sector == k + step


@given(st.integers(1, 7), couplings, st.sampled_from(["L", "S"]), st.data())
def test_dense_and_sparse_agree(m, j, spin, data):
    k = data.draw(st.integers(0, m))
    state = random_state(m, k, np.random.default_rng(data.draw(st.integers(0, 2**32 - 1))))
    p = ModelParams(m, j)
    a = sweep(state, spin, p, prune_eps=0.0, method="dense")
    b = sweep(state, spin, p, prune_eps=0.0, method="sparse")
    for x, y in ((a.elastic, b.elastic), (a.inelastic, b.inelastic)):
        np.testing.assert_allclose(dense(x), dense(y), atol=1e-14, rtol=0)


@given(st.integers(1, 6), couplings, st.data())
def test_sweep_is_linear(m, j, data):
    k = data.draw(st.integers(0, m))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    a, b = random_state(m, k, rng), random_state(m, k, rng)
    p = ModelParams(m, j)
    lhs = sweep(a.scaled(2j) + b, L, p, prune_eps=0.0)
    ra, rb = sweep(a, L, p, prune_eps=0.0), sweep(b, L, p, prune_eps=0.0)
    np.testing.assert_allclose(dense(lhs.elastic), 2j * dense(ra.elastic) + dense(rb.elastic), atol=1e-13)


def test_zero_coupling_is_identity():
    s = random_state(5, 2, np.random.default_rng(1))
    for spin in (L, S):
        res = sweep(s, spin, ModelParams(5, 0.0), prune_eps=0.0)
        assert res.elastic == s and res.inelastic.is_zero()


def test_full_coupling_converts_on_first_atom():
    res = sweep(new_all_ground(4), L, ModelParams(4, math.pi / 2), prune_eps=0.0)
    assert res.p_elastic == 0.0
    assert dict(res.inelastic.amplitudes) == {1: 1j}


def test_transparent_media():
    p = ModelParams(3, 0.4)
    res = sweep(new_all_excited(3), L, p)
    assert res.p_elastic == 1.0 and res.p_inelastic == 0.0
    res = sweep(new_all_ground(3), S, p)
    assert res.p_elastic == 1.0 and res.inelastic.is_zero()


def test_invalid_inputs():
    p = ModelParams(3, 0.4)
    with pytest.raises(UndefinedError):
        sweep(MediumState(3, 0, {}), L, p)
    with pytest.raises(ShapeError):
        sweep(new_all_ground(4), L, p)
    with pytest.raises(ValueError):
        sweep(new_all_ground(3), "X", p)
    with pytest.raises(ValueError):
        sweep(new_all_ground(3), L, p, method="fft")


def test_subchannels_rebuild_the_sweep():
    p = ModelParams(5, 0.6)
    s = random_state(5, 2, np.random.default_rng(3))
    parts = sweep_subchannels(s, L, p)
    full = sweep(s, L, p, prune_eps=0.0)
    el = sum((parts[n] for n in parts if n % 2 == 0), MediumState(5, 2, {}))
    np.testing.assert_allclose(dense(el), dense(full.elastic), atol=1e-15)
    trunc = sweep(s, L, p, max_conversions=1)
    assert trunc.p_elastic + trunc.p_inelastic < 1.0


def test_second_photon_two_flip_subchannel():
    # laser photon meeting one excitation on atom 3 of 4: the two-flip path moves it to atom 1 or 2, then still meets atom 4
    p = ModelParams(4, 0.3)
    parts = sweep_subchannels(basis_state(BasisConfig.from_atoms([3], 4)), L, p, max_conversions=2)
    b, c = p.b, p.c
    two = parts[2]
    assert two.sector == 1
    assert two.amplitude(0b0001) == pytest.approx(c * c * b, abs=1e-16)
    assert two.amplitude(0b0010) == pytest.approx(c * c * b * b, abs=1e-16)
    assert parts[0].amplitude(0b0100) == pytest.approx(b ** 3, abs=1e-16)


def test_parse_pattern():
    assert parse_pattern("L*", 3) == [L, L, L]
    assert parse_pattern("lsl") == [L, S, L]
    with pytest.raises(ValueError):
        parse_pattern("L*")
    with pytest.raises(ValueError):
        parse_pattern("LL", 3)
    with pytest.raises(ValueError):
        parse_pattern("LX")


@pytest.mark.skipif("compiled" not in kernels.AVAILABLE, reason="extension not built")
def test_backends_agree_on_rotation():
    rng = np.random.default_rng(5)
    m, k = 9, 4
    from srsweep.sectors import sector_dim

    lo = rng.normal(size=(3, sector_dim(m, k))) + 1j * rng.normal(size=(3, sector_dim(m, k)))
    hi = rng.normal(size=(3, sector_dim(m, k + 1))) + 1j * rng.normal(size=(3, sector_dim(m, k + 1)))
    out = {}
    for name in ("compiled", "python"):
        a, b = lo.copy(), hi.copy()
        with kernels.backend(name):
            kernels.rotate_sweep(a, b, m, k, math.cos(0.7), math.sin(0.7))
        out[name] = (a, b)
    np.testing.assert_allclose(out["compiled"][0], out["python"][0], atol=1e-14, rtol=0)
    np.testing.assert_allclose(out["compiled"][1], out["python"][1], atol=1e-14, rtol=0)
