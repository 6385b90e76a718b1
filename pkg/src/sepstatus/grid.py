"""
One-dimensional position grid, regions, wave functions and kernel observables.

Integrals are Riemann sums with the uniform weight ``spacing``. A wave
function is normalized when ``sum |amp|**2 * spacing == 1``; its Euclidean
counterpart (used by the tensor-product machinery) is ``amp * sqrt(spacing)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .hilbert import OPERATOR_TOL, StateVector, _frozen

SUPPORT_THRESHOLD = 1e-12
LOCALITY_TOL = 1e-12


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpace:
    n: int
    spacing: float = 1.0

    def __post_init__(self):
        if int(self.n) < 2:
            raise ValueError(f"grid needs at least 2 points, got n={self.n}")
        if not self.spacing > 0:
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "spacing", float(self.spacing))


@dataclass(frozen=True)
class Region:
    """A set of grid indices standing in for an open set of positions."""

    points: frozenset

    def __init__(self, points: Iterable[int] = ()):
        points = frozenset(int(p) for p in points)
        if any(p < 0 for p in points):
            raise ValueError(f"region indices must be non-negative, got {sorted(points)}")
        object.__setattr__(self, "points", points)

    @classmethod
    def full(cls, space: GridSpace) -> "Region":
        return cls(range(space.n))

    def check(self, space: GridSpace) -> None:
        if self.points and max(self.points) >= space.n:
            raise ValueError(f"region {sorted(self.points)} exceeds grid of {space.n} points")

    def mask(self, space: GridSpace) -> np.ndarray:
        self.check(space)
        m = np.zeros(space.n, dtype=bool)
        m[list(self.points)] = True
        return m

    def projector(self, space: GridSpace) -> np.ndarray:
        return np.diag(self.mask(space).astype(complex))

    def isdisjoint(self, other: "Region") -> bool:
        return self.points.isdisjoint(other.points)

    def issubset(self, other: "Region") -> bool:
        return self.points <= other.points

    def __and__(self, other: "Region") -> "Region":
        return Region(self.points & other.points)

    def __or__(self, other: "Region") -> "Region":
        return Region(self.points | other.points)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(sorted(self.points))

    def __bool__(self) -> bool:
        return bool(self.points)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    space: GridSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.size != self.space.n:
            raise ValueError(f"expected {self.space.n} amplitudes, got {amps.size}")
        norm2 = float(np.sum(np.abs(amps) ** 2) * self.space.spacing)
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"wave function is not normalized (norm^2 = {norm2:.15g})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, space: GridSpace, amplitudes) -> "WaveFunction":
        """Normalize arbitrary amplitudes with the grid measure."""
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        norm = np.sqrt(np.sum(np.abs(amps) ** 2) * space.spacing)
        if norm < 1e-12:
            raise ValueError("cannot normalize an everywhere-zero wave function")
        return cls(space, amps / norm)

    @classmethod
    def basis(cls, space: GridSpace, index: int) -> "WaveFunction":
        amps = np.zeros(space.n, dtype=complex)
        amps[index] = 1.0
        return cls.from_amplitudes(space, amps)

    @classmethod
    def gaussian(cls, space: GridSpace, center: float, width: float,
                 momentum: float = 0.0) -> "WaveFunction":
        """Gaussian bump; ``center`` and ``width`` are in grid-index units."""
        x = np.arange(space.n, dtype=float)
        amps = np.exp(-((x - center) ** 2) / (4 * width**2) + 1j * momentum * x)
        return cls.from_amplitudes(space, amps)

    @classmethod
    def from_state(cls, space: GridSpace, v: StateVector) -> "WaveFunction":
        return cls.from_amplitudes(space, v.amplitudes)

    def as_state(self) -> StateVector:
        """Euclidean unit vector with the same shape."""
        return StateVector((self.space.n,), self.amplitudes * np.sqrt(self.space.spacing))

    def inner(self, other: "WaveFunction") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.space.spacing)


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Discretized kernel ``a(x; x')`` as an ``n x n`` matrix."""

    space: GridSpace
    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen(self.entries)
        if entries.shape != (self.space.n, self.space.n):
            raise ValueError(f"kernel shape {entries.shape} does not match grid n={self.space.n}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def resolution_of_identity(cls, space: GridSpace) -> "KernelOperator":
        """Kernel of the identity operator, ``delta(x - x')`` -> ``I / spacing``."""
        return cls(space, np.eye(space.n) / space.spacing)

    @classmethod
    def random_hermitian(cls, space: GridSpace, rng: np.random.Generator,
                         scale: float = 1.0) -> "KernelOperator":
        m = rng.normal(size=(space.n, space.n)) + 1j * rng.normal(size=(space.n, space.n))
        return cls(space, scale * (m + m.conj().T) / 2)

    def is_hermitian(self, tol: float = OPERATOR_TOL) -> bool:
        return float(np.max(np.abs(self.entries - self.entries.conj().T))) <= tol


def support(psi: Union[WaveFunction, StateVector, np.ndarray],
            threshold: float = SUPPORT_THRESHOLD) -> Region:
    """Indices whose amplitude magnitude exceeds ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    amps = psi.amplitudes if hasattr(psi, "amplitudes") else np.asarray(psi)
    return Region(np.flatnonzero(np.abs(np.ravel(amps)) > threshold))


def is_d_local(a: KernelOperator, region: Region) -> bool:
    # every row and every column outside the region must vanish
    outside = ~region.mask(a.space)
    m = np.abs(a.entries)
    return not (np.any(m[outside, :] > LOCALITY_TOL) or np.any(m[:, outside] > LOCALITY_TOL))


def localize(a: KernelOperator, region: Region) -> KernelOperator:
    """Truncate ``a`` to ``P_D a P_D``; the result is local to ``region``."""
    mask = region.mask(a.space)
    entries = np.where(np.outer(mask, mask), a.entries, 0.0)
    return KernelOperator(a.space, entries)


def expectation(a: KernelOperator, psi: WaveFunction) -> float:
    """Riemann form of ``int dx dx' a(x; x') psi*(x) psi(x')``."""
    if not a.is_hermitian():
        raise NotHermitianError("observable must be Hermitian")
    if a.space != psi.space:
        raise ValueError("observable and wave function live on different grids")
    h = psi.space.spacing
    value = complex(np.vdot(psi.amplitudes, a.entries @ psi.amplitudes)) * h * h
    if abs(value.imag) > OPERATOR_TOL:
        raise ArithmeticError(f"expectation has imaginary part {value.imag:.3e}")
    return value.real


def to_pairs(array: np.ndarray) -> list:
    """Nested lists of ``[re, im]`` pairs, matching the array shape."""
    array = np.asarray(array, dtype=complex)
    pairs = np.stack([array.real, array.imag], axis=-1)
    return pairs.tolist()


def from_pairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ValueError("expected trailing [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
