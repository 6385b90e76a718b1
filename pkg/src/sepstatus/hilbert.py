"""
Finite-dimensional complex linear algebra on explicit tensor-product spaces.

Every space is a product of factors with known dimensions. Vectors,
operators and density operators carry the factor list so that tensor
products and partial traces can be done without extra bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

# global tolerances
OPERATOR_TOL = 1e-10
VECTOR_TOL = 1e-12
DEGENERACY_TOL = 1e-12
GRAM_SCHMIDT_SKIP = 1e-8

# largest total dimension any dense construction is allowed to reach
MAX_DIM = 4096


class DegenerateVectorError(ValueError):
    """Raised when a vector that must be normalized has (numerically) zero norm."""


class NotOrthonormalError(ValueError):
    pass


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


def _dims(dims: Iterable[int]) -> tuple:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"factor dimensions must be positive, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitude vector on a product space with factor dimensions ``dims``."""

    dims: tuple
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = _dims(self.dims)
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.size != int(np.prod(dims, dtype=int)):
            raise ValueError(
                f"amplitude length {amps.size} does not match dims {dims}"
            )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls((dim,), amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = VECTOR_TOL) -> bool:
        return abs(self.norm - 1.0) <= tol

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``, conjugate-linear in the first argument."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __add__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.dims, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.dims, self.amplitudes - other.amplitudes)

    def __rmul__(self, scalar: complex) -> "StateVector":
        return StateVector(self.dims, scalar * self.amplitudes)


@dataclass(frozen=True, eq=False)
class Operator:
    """Linear map from the space with ``dims_in`` to the space with ``dims_out``."""

    dims_in: tuple
    dims_out: tuple
    entries: np.ndarray

    def __post_init__(self):
        dims_in, dims_out = _dims(self.dims_in), _dims(self.dims_out)
        entries = _frozen(self.entries)
        shape = (int(np.prod(dims_out, dtype=int)), int(np.prod(dims_in, dtype=int)))
        if entries.shape != shape:
            raise ValueError(
                f"matrix shape {entries.shape} does not match dims {dims_out} <- {dims_in}"
            )
        object.__setattr__(self, "dims_in", dims_in)
        object.__setattr__(self, "dims_out", dims_out)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def square(cls, dims: Sequence[int], entries) -> "Operator":
        return cls(tuple(dims), tuple(dims), entries)

    @classmethod
    def identity(cls, dims: Sequence[int]) -> "Operator":
        dims = _dims(dims)
        return cls(dims, dims, np.eye(int(np.prod(dims, dtype=int))))

    @property
    def dagger(self) -> "Operator":
        return Operator(self.dims_out, self.dims_in, self.entries.conj().T)

    def hermiticity_residual(self) -> float:
        if self.entries.shape[0] != self.entries.shape[1]:
            return float("inf")
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = OPERATOR_TOL) -> bool:
        return self.hermiticity_residual() <= tol

    def unitarity_residual(self) -> float:
        m = self.entries
        if m.shape[0] != m.shape[1]:
            return float("inf")
        return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])), initial=0.0))

    def is_unitary(self, tol: float = OPERATOR_TOL) -> bool:
        return self.unitarity_residual() <= tol

    def apply(self, v: StateVector) -> StateVector:
        if v.dim != self.entries.shape[1]:
            raise ValueError(f"operator expects dimension {self.entries.shape[1]}, got {v.dim}")
        return StateVector(self.dims_out, self.entries @ v.amplitudes)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        if isinstance(other, Operator):
            return Operator(other.dims_in, self.dims_out, self.entries @ other.entries)
        return NotImplemented


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """
    Trace-one positive operator on the product space ``dims``.

    Validity (Hermitian, eigenvalues >= -tol, unit trace) is checked on
    construction. ``dims == ()`` is the one-dimensional trivial space and is
    used for empty subsystems.
    """

    dims: tuple
    entries: np.ndarray

    def __post_init__(self):
        dims = _dims(self.dims)
        entries = _frozen(self.entries)
        dim = int(np.prod(dims, dtype=int))
        if entries.shape != (dim, dim):
            raise ValueError(f"matrix shape {entries.shape} does not match dims {dims}")
        herm = float(np.max(np.abs(entries - entries.conj().T), initial=0.0))
        if herm > OPERATOR_TOL:
            raise ValueError(f"density operator is not Hermitian (residual {herm:.3e})")
        trace = complex(np.trace(entries))
        if abs(trace - 1.0) > OPERATOR_TOL:
            raise ValueError(f"density operator trace is {trace:.12g}, expected 1")
        lowest = float(np.linalg.eigvalsh(entries)[0])
        if lowest < -OPERATOR_TOL:
            raise ValueError(f"density operator has negative eigenvalue {lowest:.3e}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def pure(cls, v: StateVector) -> "DensityOperator":
        """Projector ``|v><v|`` of a normalized vector."""
        if not v.is_normalized(1e-10):
            raise ValueError(f"pure state requires a unit vector, norm is {v.norm:.15g}")
        a = v.amplitudes
        return cls(v.dims, np.outer(a, a.conj()))

    @classmethod
    def trivial(cls) -> "DensityOperator":
        return cls((), np.ones((1, 1)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def conjugate_by(self, u: Operator) -> "DensityOperator":
        dims = u.dims_out if u.dims_in == self.dims else self.dims
        return DensityOperator(dims, u.entries @ self.entries @ u.entries.conj().T)


AnyKind = Union[StateVector, Operator, DensityOperator]


def tensor(a: AnyKind, b: AnyKind) -> AnyKind:
    """Kronecker product of two objects of the same kind, ``a`` first."""
    if type(a) is not type(b):
        raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    if isinstance(a, StateVector):
        return StateVector(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, Operator):
        return Operator(
            a.dims_in + b.dims_in, a.dims_out + b.dims_out, np.kron(a.entries, b.entries)
        )
    if isinstance(a, DensityOperator):
        return DensityOperator(a.dims + b.dims, np.kron(a.entries, b.entries))
    raise TypeError(f"unsupported type {type(a).__name__}")


def tensor_all(items: Sequence[AnyKind]) -> AnyKind:
    out = items[0]
    for item in items[1:]:
        out = tensor(out, item)
    return out


def partial_trace(rho: DensityOperator, keep: Iterable[int]) -> DensityOperator:
    """
    Trace out every factor of ``rho`` not listed in ``keep``.

    Retained factors keep their original relative order.
    """
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("nothing retained: keep must name at least one factor")
    n = len(rho.dims)
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep indices {keep} out of range for {n} factors")
    if len(keep) == n:
        return rho

    tensor_form = rho.entries.reshape(rho.dims + rho.dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    reduced = np.einsum(tensor_form, row + col, out)
    kept_dims = tuple(rho.dims[i] for i in keep)
    d = int(np.prod(kept_dims, dtype=int))
    return DensityOperator(kept_dims, reduced.reshape(d, d))


def normalize(v: StateVector) -> StateVector:
    norm = v.norm
    if norm < DEGENERACY_TOL:
        raise DegenerateVectorError(f"degenerate vector: norm {norm:.3e} below {DEGENERACY_TOL}")
    return StateVector(v.dims, v.amplitudes / norm)


def _check_orthonormal(vectors: Sequence[np.ndarray], label: str) -> None:
    if not vectors:
        return
    gram = np.array([[np.vdot(a, b) for b in vectors] for a in vectors])
    bad = np.abs(gram - np.eye(len(vectors))) > OPERATOR_TOL
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise NotOrthonormalError(
            f"{label} vectors not orthonormal: pair ({i}, {j}) has inner product {gram[i, j]:.6g}"
        )


def _extend_basis(vectors: list, dim: int) -> list:
    """Gram-Schmidt over canonical basis vectors e_0, e_1, ... in index order."""
    basis = list(vectors)
    for i in range(dim):
        if len(basis) == dim:
            break
        e = np.zeros(dim, dtype=complex)
        e[i] = 1.0
        # two passes keep the completion orthogonal to working precision
        for _ in range(2):
            for b in basis:
                e = e - np.vdot(b, e) * b
        r = np.linalg.norm(e)
        if r < GRAM_SCHMIDT_SKIP:
            continue
        basis.append(e / r)
    return basis[len(vectors):]


def complete_to_unitary(pairs: Sequence[tuple], dim: int | None = None) -> Operator:
    """
    Build a unitary ``U`` with ``U @ inp == img`` for every ``(inp, img)`` pair.

    The orthocomplement of the inputs is mapped onto the orthocomplement of
    the images; both are obtained by deterministic Gram-Schmidt over the
    canonical basis, so repeated calls give bit-identical matrices.

    Parameters
    ----------
    pairs : sequence of (StateVector, StateVector)
        Orthonormal inputs and their orthonormal images.
    dim : int, optional
        Total dimension. Required when ``pairs`` is empty.
    """
    if pairs:
        dims = pairs[0][0].dims
        d = pairs[0][0].dim
        if dim is not None and dim != d:
            raise ValueError(f"dim={dim} disagrees with vector dimension {d}")
    elif dim is None:
        raise ValueError("dim is required when no pairs are given")
    else:
        dims, d = (dim,), dim

    for idx, (inp, img) in enumerate(pairs):
        if inp.dim != d or img.dim != d:
            raise ValueError(f"pair {idx} has dimensions ({inp.dim}, {img.dim}), expected {d}")
    inputs = [np.asarray(p[0].amplitudes) for p in pairs]
    images = [np.asarray(p[1].amplitudes) for p in pairs]
    _check_orthonormal(inputs, "input")
    _check_orthonormal(images, "image")

    inputs = inputs + _extend_basis(inputs, d)
    images = images + _extend_basis(images, d)
    if len(inputs) != d or len(images) != d:
        raise NotOrthonormalError("could not complete the basis; inputs are numerically dependent")
    u = np.column_stack(images) @ np.column_stack(inputs).conj().T
    return Operator(dims, dims, u)
