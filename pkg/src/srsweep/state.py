"""Sparse medium states organised by excitation number.

A basis configuration of the M-atom medium is an integer bitmask; bit ``a-1``
is set when atom ``a`` (counted from the edge where photons enter) is excited.
A :class:`MediumState` is a sparse map from such masks to complex amplitudes,
with every stored mask carrying the same popcount (one excitation sector).
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, ShapeError, UndefinedError

#: Default width limit for basis masks.
MAX_ATOMS = 62
#: Hard ceiling of the unsigned 64-bit masks used by the compiled kernels.
ABSOLUTE_MAX_ATOMS = 64
#: Amplitudes smaller than this in modulus are dropped in exact modes.
PRUNE_EPS = 1e-14


def check_capacity(m: int, max_atoms: int = MAX_ATOMS) -> int:
    if max_atoms > ABSOLUTE_MAX_ATOMS:
        raise CapacityError(f"max_atoms={max_atoms} exceeds the {ABSOLUTE_MAX_ATOMS}-bit mask width")
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
        raise TypeError(f"atom count must be an integer, got {type(m).__name__}")
    if m < 0 or m > max_atoms:
        raise CapacityError(f"atom count {m} outside [0, {max_atoms}]")
    return int(m)


def popcount(bits: int) -> int:
    return int(bits).bit_count()


@dataclass(frozen=True, order=True)
class BasisConfig:
    """One basis configuration: which of the ``m`` atoms are excited."""

    bits: int
    m: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.m:
            raise ValueError(f"mask {self.bits:#x} has bits above width {self.m}")

    @classmethod
    def from_atoms(cls, atoms: Iterable[int], m: int) -> "BasisConfig":
        """Build from 1-based atom indices."""
        bits = 0
        for a in atoms:
            if not 1 <= a <= m:
                raise ValueError(f"atom index {a} outside 1..{m}")
            bits |= 1 << (a - 1)
        return cls(bits, m)

    @property
    def excitations(self) -> int:
        return popcount(self.bits)

    def is_excited(self, atom: int) -> bool:
        return bool(self.bits >> (atom - 1) & 1)

    def atoms(self) -> list[int]:
        return [a for a in range(1, self.m + 1) if self.bits >> (a - 1) & 1]

    def __str__(self) -> str:
        # atom 1 printed first
        return "".join("1" if self.bits >> a & 1 else "0" for a in range(self.m)) or "-"


class MediumState:
    """Immutable sparse superposition over basis masks in one excitation sector.

    Parameters
    ----------
    m : int
        Number of atoms.
    sector : int
        Excitation number shared by every stored mask.
    amplitudes : mapping of int to complex
        Mask to amplitude. Entries with modulus below ``prune_eps`` and exact
        zeros are dropped.
    prune_eps : float
        Pruning threshold; 0 keeps every nonzero amplitude.
    max_atoms : int
        Capacity cap checked against ``m``.
    """

    __slots__ = ("_m", "_sector", "_amps")

    def __init__(
        self,
        m: int,
        sector: int,
        amplitudes: Mapping[int, complex],
        *,
        prune_eps: float = PRUNE_EPS,
        max_atoms: int = MAX_ATOMS,
        validate: bool = True,
    ):
        m = check_capacity(m, max_atoms)
        if not 0 <= sector <= m:
            raise ValueError(f"sector {sector} outside [0, {m}]")
        amps = {}
        for mask, amp in amplitudes.items():
            amp = complex(amp)
            if amp == 0 or abs(amp) < prune_eps:
                continue
            if validate:
                mask = int(mask)
                if mask < 0 or mask >> m:
                    raise ValueError(f"mask {mask:#x} has bits above width {m}")
                if popcount(mask) != sector:
                    raise ValueError(f"mask {mask:#x} has popcount {popcount(mask)}, expected sector {sector}")
            amps[mask] = amp
        self._m = m
        self._sector = int(sector)
        self._amps = amps

    @classmethod
    def _trusted(cls, m: int, sector: int, amps: dict) -> "MediumState":
        # internal constructor: caller guarantees masks, sector and pruning
        self = object.__new__(cls)
        self._m = m
        self._sector = sector
        self._amps = amps
        return self

    @property
    def m(self) -> int:
        return self._m

    @property
    def sector(self) -> int:
        return self._sector

    @property
    def amplitudes(self) -> Mapping[int, complex]:
        return MappingProxyType(self._amps)

    def amplitude(self, config) -> complex:
        bits = config.bits if isinstance(config, BasisConfig) else int(config)
        return self._amps.get(bits, 0j)

    def __len__(self) -> int:
        return len(self._amps)

    def __iter__(self):
        return iter(self._amps.items())

    def configs(self) -> list[BasisConfig]:
        return [BasisConfig(mask, self._m) for mask in sorted(self._amps)]

    def norm2(self) -> float:
        return math.fsum(a.real * a.real + a.imag * a.imag for a in self._amps.values())

    def is_zero(self) -> bool:
        return not self._amps

    def scaled(self, factor: complex) -> "MediumState":
        factor = complex(factor)
        if factor == 0:
            return MediumState._trusted(self._m, self._sector, {})
        return MediumState._trusted(self._m, self._sector, {k: v * factor for k, v in self._amps.items()})

    def normalized(self) -> "MediumState":
        n2 = self.norm2()
        if n2 == 0:
            raise UndefinedError("cannot normalise a zero state")
        return self.scaled(1.0 / math.sqrt(n2))

    def __add__(self, other: "MediumState") -> "MediumState":
        if not isinstance(other, MediumState):
            return NotImplemented
        if other._m != self._m:
            raise ShapeError(f"atom counts differ: {self._m} vs {other._m}")
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        if other._sector != self._sector:
            raise ValueError("cannot add states from different excitation sectors")
        out = dict(self._amps)
        for k, v in other._amps.items():
            out[k] = out.get(k, 0j) + v
        return MediumState._trusted(self._m, self._sector, {k: v for k, v in out.items() if v != 0})

    def __eq__(self, other) -> bool:
        if not isinstance(other, MediumState):
            return NotImplemented
        return self._m == other._m and self._sector == other._sector and self._amps == other._amps

    __hash__ = None

    def __repr__(self) -> str:
        items = ", ".join(
            f"{BasisConfig(k, self._m)}: {v:.6g}" for k, v in sorted(self._amps.items())[:6]
        )
        more = ", ..." if len(self._amps) > 6 else ""
        return f"MediumState(m={self._m}, sector={self._sector}, {{{items}{more}}})"

    # -- serialisation ---------------------------------------------------

    def to_records(self) -> list[dict]:
        return [{"mask": k, "re": v.real, "im": v.imag} for k, v in sorted(self._amps.items())]

    def to_json(self) -> str:
        return json.dumps({"m": self._m, "sector": self._sector, "amplitudes": self.to_records()})

    @classmethod
    def from_records(cls, records: Sequence[Mapping], m: int, **kwargs) -> "MediumState":
        """Build from a list of ``{mask, re, im}`` records; the sector is inferred."""
        amps = {}
        for rec in records:
            mask = int(rec["mask"])
            amps[mask] = amps.get(mask, 0j) + complex(float(rec.get("re", 0.0)), float(rec.get("im", 0.0)))
        nonzero = [k for k, v in amps.items() if v != 0]
        sectors = {popcount(k) for k in nonzero}
        if len(sectors) > 1:
            raise ValueError(f"state mixes excitation sectors {sorted(sectors)}")
        sector = sectors.pop() if sectors else 0
        return cls(m, sector, amps, **kwargs)

    @classmethod
    def from_json(cls, text: str, m: Optional[int] = None, **kwargs) -> "MediumState":
        """Parse the CLI state format.

        Accepts either a bare list of ``{mask, re, im}`` records (``m`` must
        then be supplied) or an object ``{"m": .., "amplitudes": [...]}``.
        """
        data = json.loads(text)
        if isinstance(data, dict):
            records = data.get("amplitudes", [])
            file_m = data.get("m")
            if m is not None and file_m is not None and int(file_m) != m:
                raise ShapeError(f"state file has m={file_m}, run uses m={m}")
            m = int(file_m) if file_m is not None else m
        else:
            records = data
        if m is None:
            raise ConfigError("atom count unknown: state file has no 'm' and none was given")
        return cls.from_records(records, m, **kwargs)


def new_all_ground(m: int, *, max_atoms: int = MAX_ATOMS) -> MediumState:
    """Medium with every atom in the ground state (sector 0)."""
    m = check_capacity(m, max_atoms)
    return MediumState._trusted(m, 0, {0: 1 + 0j})


def new_all_excited(m: int, *, max_atoms: int = MAX_ATOMS) -> MediumState:
    """Fully inverted medium (sector ``m``)."""
    m = check_capacity(m, max_atoms)
    return MediumState._trusted(m, m, {(1 << m) - 1: 1 + 0j})


def basis_state(config: BasisConfig, *, max_atoms: int = MAX_ATOMS) -> MediumState:
    return MediumState(config.m, config.excitations, {config.bits: 1.0}, max_atoms=max_atoms)


def inner(a: MediumState, b: MediumState) -> complex:
    """Inner product, conjugate-linear in the first argument."""
    if a.m != b.m:
        raise ShapeError(f"atom counts differ: {a.m} vs {b.m}")
    if a.sector != b.sector:
        return 0j
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    la = large._amps
    terms = [(x, la[k]) for k, x in small._amps.items() if k in la]
    if small is a:
        total = sum((x.conjugate() * y for x, y in terms), 0j)
    else:
        total = sum((y.conjugate() * x for x, y in terms), 0j)
    return total


def excitation_profile(s: MediumState) -> np.ndarray:
    """Probability that each atom is excited, atoms in order 1..m."""
    n2 = s.norm2()
    if n2 == 0:
        raise UndefinedError("excitation profile of a zero-norm state is undefined")
    prof = np.zeros(s.m)
    for mask, amp in s._amps.items():
        w = amp.real * amp.real + amp.imag * amp.imag
        while mask:
            low = mask & -mask
            prof[low.bit_length() - 1] += w
            mask ^= low
    return np.clip(prof / n2, 0.0, 1.0)


def random_state(m: int, sector: int, rng: np.random.Generator, *, support: Optional[int] = None) -> MediumState:
    """Random normalised state in one sector (used by property tests and benchmarks)."""
    from .sectors import sector_masks

    masks = sector_masks(m, sector)
    if support is not None and support < len(masks):
        masks = rng.choice(masks, size=support, replace=False)
    amps = rng.normal(size=len(masks)) + 1j * rng.normal(size=len(masks))
    amps /= np.linalg.norm(amps)
    return MediumState(m, sector, dict(zip((int(x) for x in masks), amps)), prune_eps=0.0)


@dataclass(frozen=True)
class ModelParams:
    """Coupling and medium parameters.

    ``b = cos J`` is the amplitude for a photon to keep its spin on an atom
    that can flip it and ``c = i sin J`` the amplitude to flip it.
    ``gamma`` and ``photon_flux`` are only needed for the superfluorescence
    limit; ``atom_density`` and ``length`` only for reporting coordinates.
    """

    m: int
    j: float
    gamma: Optional[float] = None
    photon_flux: Optional[float] = None
    atom_density: Optional[float] = None
    length: Optional[float] = None
    max_atoms: int = field(default=MAX_ATOMS, compare=False)

    def __post_init__(self):
        check_capacity(self.m, self.max_atoms)
        j = float(self.j)
        if not (0.0 <= j <= math.pi / 2) or math.isnan(j):
            raise ValueError(f"coupling J={self.j} outside [0, pi/2]")
        object.__setattr__(self, "j", j)
        if self.gamma is not None and self.photon_flux is not None:
            if abs(self.gamma - j * j * self.photon_flux) > 1e-12 * max(1.0, abs(self.gamma)):
                raise ConfigError(
                    f"gamma={self.gamma} inconsistent with J^2*flux={j * j * self.photon_flux}"
                )
        if self.length is not None and self.atom_density is not None:
            if abs(self.atom_density * self.length - self.m) > 1e-9 * max(1, self.m):
                raise ConfigError("atom_density * length must equal m")

    @classmethod
    def sf_limit(cls, m: int, gamma: float, photon_flux: float, **kwargs) -> "ModelParams":
        """Parameters on the line ``J**2 * flux = gamma``."""
        if gamma < 0 or photon_flux <= 0:
            raise ConfigError("need gamma >= 0 and photon_flux > 0")
        return cls(m=m, j=math.sqrt(gamma / photon_flux), gamma=gamma, photon_flux=photon_flux, **kwargs)

    @property
    def b_real(self) -> float:
        # snap so that J = pi/2 gives an exactly vanishing elastic amplitude
        return 0.0 if self.j == math.pi / 2 else math.cos(self.j)

    @property
    def c_imag(self) -> float:
        return math.sin(self.j)

    @property
    def b(self) -> complex:
        return complex(self.b_real, 0.0)

    @property
    def c(self) -> complex:
        return complex(0.0, self.c_imag)

    @property
    def p(self) -> float:
        return self.b_real * self.b_real

    @property
    def rho_atom(self) -> Optional[float]:
        if self.atom_density is not None:
            return self.atom_density
        if self.length:
            return self.m / self.length
        return None

    def atom_coordinate(self, atom: int) -> float:
        """Distance of atom ``atom`` from the entry edge, ``a / rho_atom``."""
        rho = self.rho_atom
        if rho is None:
            raise ConfigError("atom_density or length required for coordinates")
        return atom / rho

    def with_m(self, m: int) -> "ModelParams":
        return dataclasses.replace(self, m=m, atom_density=None, length=None)
