"""
Bose/Fermi symmetrizers and the maps built from them.

Symmetric and antisymmetric sectors are handled as projectors acting on the
full ``d**N`` product space; no occupation-number basis is used.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import KernelOperator, NotHermitianError, WaveFunction
from .hilbert import (
    MAX_DIM,
    OPERATOR_TOL,
    Operator,
    StateVector,
    normalize,
    tensor,
)


class Statistics(enum.Enum):
    BOSE = "bose"
    FERMI = "fermi"

    @property
    def sign(self) -> int:
        return 1 if self is Statistics.BOSE else -1

    @classmethod
    def parse(cls, value) -> "Statistics":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"statistics must be 'bose' or 'fermi', got {value!r}") from None


def permutation_parity(perm) -> int:
    """+1 for even permutations, -1 for odd ones."""
    perm = list(perm)
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def permutation_matrix(perm, d: int) -> np.ndarray:
    """
    Matrix ``U_perm`` that moves tensor factor ``k`` to slot ``perm[k]``.

    On product vectors, ``U (v_0 x ... x v_{N-1})`` has ``v_k`` in factor
    ``perm[k]``.
    """
    n = len(perm)
    dim = d**n
    # out[i_perm[0], ..., ] = in[i_0, ...]: transpose axes by inverse permutation
    inverse = np.argsort(perm)
    eye = np.eye(dim).reshape((d,) * n + (dim,))
    return eye.transpose(list(inverse) + [n]).reshape(dim, dim)


@dataclass(frozen=True, eq=False)
class Symmetrizer:
    n_particles: int
    one_particle_dim: int
    stats: Statistics
    matrix: Operator

    @property
    def rank(self) -> int:
        eig = np.linalg.eigvalsh(self.matrix.entries)
        return int(np.sum(eig > 0.5))

    def apply(self, v: StateVector) -> StateVector:
        return self.matrix.apply(v)


@lru_cache(maxsize=64)
def _symmetrizer_entries(n: int, d: int, sign: int) -> np.ndarray:
    dim = d**n
    total = np.zeros((dim, dim))
    for perm in itertools.permutations(range(n)):
        weight = permutation_parity(perm) if sign < 0 else 1
        total += weight * permutation_matrix(perm, d)
    total /= math.factorial(n)
    total.flags.writeable = False
    return total


def build_symmetrizer(n: int, d: int, stats: Statistics) -> Symmetrizer:
    """Projector ``(1/N!) sum_perm (sgn perm)^[fermi] U_perm`` on ``d**N``."""
    if n < 1:
        raise ValueError(f"need at least one particle, got N={n}")
    if d < 2:
        raise ValueError(f"one-particle dimension must be >= 2, got d={d}")
    if d**n > MAX_DIM:
        raise ValueError(f"symmetrizer needs dimension {d**n}, above the budget {MAX_DIM}")
    entries = _symmetrizer_entries(n, d, Statistics.parse(stats).sign)
    return Symmetrizer(n, d, Statistics.parse(stats), Operator.square((d,) * n, entries))


def symmetrize_two_particle_state(psi: WaveFunction, phi: WaveFunction,
                                  stats: Statistics) -> StateVector:
    """
    Normalized ``psi x phi +/- phi x psi`` as a Euclidean unit vector.

    For orthogonal ``psi`` and ``phi`` this is exactly the ``2**-1/2``
    combination; otherwise the normalization constant is recomputed.
    """
    if psi.space != phi.space:
        raise ValueError("wave functions live on different grids")
    a, b = psi.as_state(), phi.as_state()
    sign = Statistics.parse(stats).sign
    return normalize(tensor(a, b) + sign * tensor(b, a))


def symmetrize_two_particle_observable(a: KernelOperator) -> Operator:
    """
    Two-particle kernel ``a x delta + delta x a``.

    ``delta`` is ``I / spacing`` so that two-particle averages computed as
    ``spacing**2 * <Psi|O|Psi>`` reduce to one-particle Riemann sums.
    """
    if not a.is_hermitian():
        raise NotHermitianError("observable must be Hermitian")
    n = a.space.n
    delta = np.eye(n) / a.space.spacing
    entries = np.kron(a.entries, delta) + np.kron(delta, a.entries)
    return Operator.square((n, n), entries)


def is_in_sector(v: StateVector, stats: Statistics, tol: float = OPERATOR_TOL) -> bool:
    n = len(v.dims)
    if n <= 1:
        return True
    d = v.dims[0]
    p = build_symmetrizer(n, d, stats)
    return float(np.linalg.norm(p.matrix.entries @ v.amplitudes - v.amplitudes)) <= tol


def inject(psi: StateVector, big_psi: StateVector, stats: Statistics) -> StateVector:
    """
    Absorb one particle into an (anti)symmetric ``N``-particle state.

    Returns ``P_S(P^(N+1) (psi x Psi))``, the normalized projection onto the
    ``N+1`` particle sector. The map forgets which factor was ``psi`` and
    discards scale, so it is neither injective nor linear.

    Raises
    ------
    DegenerateVectorError
        If the projection vanishes (Pauli exclusion for fermions).
    """
    stats = Statistics.parse(stats)
    if len(psi.dims) != 1:
        raise ValueError("psi must be a single-particle vector")
    d = psi.dims[0]
    if any(f != d for f in big_psi.dims):
        raise ValueError(f"Psi factors {big_psi.dims} do not match one-particle dimension {d}")
    if not is_in_sector(big_psi, stats):
        raise ValueError(f"Psi is not in the {stats.value} sector")
    n = len(big_psi.dims)
    p = build_symmetrizer(n + 1, d, stats)
    return normalize(p.apply(tensor(psi, big_psi)))
