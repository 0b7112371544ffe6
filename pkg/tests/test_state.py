import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srsweep.errors import CapacityError, ConfigError, ShapeError, UndefinedError
from srsweep.state import (
    BasisConfig,
    MediumState,
    ModelParams,
    basis_state,
    excitation_profile,
    inner,
    new_all_excited,
    new_all_ground,
    random_state,
)


def test_basis_config_atoms_are_one_based():
    cfg = BasisConfig.from_atoms([1, 3], 4)
    assert cfg.bits == 0b0101
    assert cfg.excitations == 2
    assert cfg.atoms() == [1, 3]
    assert cfg.is_excited(3) and not cfg.is_excited(2)
    assert str(cfg) == "1010"


def test_basis_config_rejects_out_of_range_atom():
    with pytest.raises(ValueError):
        BasisConfig.from_atoms([5], 4)


def test_capacity_limits():
    new_all_ground(62)
    with pytest.raises(CapacityError):
        new_all_ground(63)
    assert new_all_excited(64, max_atoms=64).amplitude((1 << 64) - 1) == 1
    with pytest.raises(CapacityError):
        new_all_ground(10, max_atoms=65)
    with pytest.raises(CapacityError):
        new_all_ground(-1)


def test_sector_mismatch_rejected():
    with pytest.raises(ValueError, match="popcount"):
        MediumState(3, 1, {0b011: 1.0})
    with pytest.raises(ValueError, match="width"):
        MediumState(2, 1, {0b100: 1.0})
    with pytest.raises(ValueError):
        MediumState(2, 3, {})


def test_pruning_and_norm():
    s = MediumState(3, 1, {1: 0.6, 2: 0.8j, 4: 1e-16})
    assert len(s) == 2
    assert math.isclose(s.norm2(), 1.0, rel_tol=0, abs_tol=1e-15)
    kept = MediumState(3, 1, {1: 0.6, 4: 1e-16}, prune_eps=0.0)
    assert len(kept) == 2
    assert s.scaled(2).norm2() == pytest.approx(4.0)
    assert s.scaled(3).normalized().norm2() == pytest.approx(1.0, abs=1e-15)


def test_addition_rules():
    a = MediumState(3, 1, {1: 1.0})
    b = MediumState(3, 1, {1: -1.0, 2: 1.0})
    assert (a + b) == MediumState(3, 1, {2: 1.0})
    with pytest.raises(ValueError):
        a + MediumState(3, 2, {3: 1.0})
    with pytest.raises(ShapeError):
        a + MediumState(4, 1, {1: 1.0})


def test_inner_product():
    a = MediumState(2, 1, {1: 1j, 2: 1.0})
    b = MediumState(2, 1, {1: 1.0})
    assert inner(a, b) == -1j
    assert inner(b, a) == 1j
    assert inner(a, new_all_ground(2)) == 0
    with pytest.raises(ShapeError):
        inner(a, new_all_ground(3))


def test_excitation_profile():
    s = MediumState(3, 1, {1: 1.0, 4: 1.0})
    np.testing.assert_allclose(excitation_profile(s), [0.5, 0.0, 0.5])
    with pytest.raises(UndefinedError):
        excitation_profile(MediumState(3, 1, {}))


def test_json_formats():
    s = MediumState(3, 2, {3: 0.5 + 0.5j, 6: -0.5})
    assert MediumState.from_json(s.to_json()) == s
    bare = json.dumps(s.to_records())
    assert MediumState.from_json(bare, 3) == s
    with pytest.raises(ConfigError):
        MediumState.from_json(bare)
    with pytest.raises(ShapeError):
        MediumState.from_json(s.to_json(), 4)
    with pytest.raises(ValueError, match="mixes"):
        MediumState.from_records([{"mask": 1, "re": 1}, {"mask": 3, "re": 1}], 2)


@given(st.integers(1, 8), st.data())
def test_json_round_trip_is_exact(m, data):
    k = data.draw(st.integers(0, m))
    seed = data.draw(st.integers(0, 2**32 - 1))
    s = random_state(m, k, np.random.default_rng(seed))
    assert MediumState.from_json(s.to_json(), prune_eps=0.0) == s


def test_basis_state():
    s = basis_state(BasisConfig.from_atoms([2], 3))
    assert s.sector == 1 and s.amplitude(2) == 1


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(3, -0.1)
    with pytest.raises(ValueError):
        ModelParams(3, 1.6)
    with pytest.raises(ConfigError):
        ModelParams(3, 0.1, gamma=1.0, photon_flux=1.0)
    p = ModelParams.sf_limit(3, gamma=1.0, photon_flux=400.0)
    assert p.j == pytest.approx(0.05)
    assert ModelParams(2, math.pi / 2).b_real == 0.0
    q = ModelParams(4, 0.3)
    assert q.b == complex(math.cos(0.3), 0) and q.c == complex(0, math.sin(0.3))
    assert abs(q.b) ** 2 + abs(q.c) ** 2 == pytest.approx(1.0, abs=1e-16)


def test_coordinates():
    p = ModelParams(4, 0.1, atom_density=2.0, length=2.0)
    assert p.atom_coordinate(3) == 1.5
    with pytest.raises(ConfigError):
        ModelParams(4, 0.1).atom_coordinate(1)
    with pytest.raises(ConfigError):
        ModelParams(4, 0.1, atom_density=1.0, length=2.0)
