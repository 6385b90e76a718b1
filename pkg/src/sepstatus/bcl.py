"""
Premeasurement model with a unitary system-apparatus coupling.

The coupling sends ``phi_kl x ready`` to ``post_kl x pointer_k`` for every
eigenvector ``phi_kl`` of a discrete observable and is completed to a
unitary on the whole product space. ``measure`` runs a general input
through it, and ``check_objectification`` decides whether the resulting
apparatus state is a proper mixture of pointer states.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .gemenge import GemengeState, reduce_components
from .hilbert import (
    OPERATOR_TOL,
    DensityOperator,
    NotOrthonormalError,
    Operator,
    StateVector,
    complete_to_unitary,
    partial_trace,
    tensor,
)

PROBABILITY_TOL = 1e-12


def _gram(vectors: Sequence[StateVector]) -> np.ndarray:
    m = np.column_stack([v.amplitudes for v in vectors])
    return m.conj().T @ m


@dataclass(frozen=True, eq=False)
class EigenStructure:
    """
    Distinct eigenvalues ``o_k`` with orthonormal eigenvectors ``phi_kl``.

    ``vectors[k]`` lists the eigenvectors of eigenvalue ``eigenvalues[k]``;
    together they must form a complete orthonormal basis.
    """

    eigenvalues: tuple
    vectors: tuple

    def __post_init__(self):
        eigenvalues = tuple(float(o) for o in self.eigenvalues)
        vectors = tuple(tuple(group) for group in self.vectors)
        if len(eigenvalues) != len(vectors):
            raise ValueError("one eigenvector group is needed per eigenvalue")
        if len(set(eigenvalues)) != len(eigenvalues):
            raise ValueError(f"eigenvalues must be distinct, got {eigenvalues}")
        if any(len(group) == 0 for group in vectors):
            raise ValueError("every eigenvalue needs at least one eigenvector")
        flat = [v for group in vectors for v in group]
        dim = flat[0].dim
        if any(v.dim != dim for v in flat):
            raise ValueError("eigenvectors have mixed dimensions")
        gram = _gram(flat)
        residual = float(np.max(np.abs(gram - np.eye(len(flat)))))
        if residual > OPERATOR_TOL:
            raise NotOrthonormalError(f"eigenvectors are not orthonormal (residual {residual:.3e})")
        if len(flat) != dim:
            raise ValueError(f"eigenvectors are incomplete: {len(flat)} vectors in dimension {dim}")
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def from_basis(cls, values: Sequence[float]) -> "EigenStructure":
        """Observable diagonal in the canonical basis, ``O e_i = values[i] e_i``."""
        dim = len(values)
        distinct = sorted(set(float(v) for v in values))
        groups = [[StateVector.basis(dim, i) for i, v in enumerate(values) if float(v) == o]
                  for o in distinct]
        return cls(tuple(distinct), tuple(groups))

    @classmethod
    def from_hermitian(cls, matrix, decimals: int = 9) -> "EigenStructure":
        """Group the eigenvectors of a Hermitian matrix by rounded eigenvalue."""
        matrix = np.asarray(matrix, dtype=complex)
        evals, evecs = np.linalg.eigh(matrix)
        rounded = np.round(evals, decimals)
        distinct = sorted(set(rounded.tolist()))
        dim = matrix.shape[0]
        groups = [[StateVector((dim,), evecs[:, i]) for i in np.flatnonzero(rounded == o)]
                  for o in distinct]
        return cls(tuple(distinct), tuple(groups))

    @property
    def dim(self) -> int:
        return self.vectors[0][0].dim

    @property
    def n_outcomes(self) -> int:
        return len(self.eigenvalues)

    @property
    def multiplicities(self) -> tuple:
        return tuple(len(g) for g in self.vectors)

    def projector(self, k: int) -> np.ndarray:
        return sum(np.outer(v.amplitudes, v.amplitudes.conj()) for v in self.vectors[k])


@dataclass(frozen=True, eq=False)
class MeasurementCoupling:
    eig: EigenStructure
    ready: StateVector
    pointers: tuple
    post_states: tuple
    unitary: Operator

    @property
    def system_dim(self) -> int:
        return self.eig.dim

    @property
    def apparatus_dim(self) -> int:
        return self.ready.dim


def build_coupling(eig: EigenStructure, ready: StateVector, pointers: Sequence[StateVector],
                   post_states: Optional[Sequence[Sequence[StateVector]]] = None
                   ) -> MeasurementCoupling:
    """
    Unitary premeasurement coupling for ``eig``.

    Parameters
    ----------
    eig : EigenStructure
        Observable being registered.
    ready : StateVector
        Initial apparatus vector.
    pointers : sequence of StateVector
        One orthonormal pointer vector per outcome.
    post_states : nested sequence of StateVector, optional
        System states left behind, shaped like ``eig.vectors``. Vectors with
        the same outcome index must be orthonormal. Defaults to the
        eigenvectors themselves.
    """
    pointers = tuple(pointers)
    if eig.n_outcomes > eig.dim:
        raise ValueError("more outcomes than system dimension")
    if len(pointers) != eig.n_outcomes:
        raise ValueError(f"need {eig.n_outcomes} pointer states, got {len(pointers)}")
    if not ready.is_normalized(OPERATOR_TOL):
        raise ValueError("apparatus ready state must be normalized")
    residual = float(np.max(np.abs(_gram(pointers) - np.eye(len(pointers)))))
    if residual > OPERATOR_TOL:
        raise NotOrthonormalError(f"pointer states are not orthonormal (residual {residual:.3e})")
    if post_states is None:
        post_states = eig.vectors
    post_states = tuple(tuple(group) for group in post_states)
    if tuple(len(g) for g in post_states) != eig.multiplicities:
        raise ValueError("post_states must have the same shape as the eigenvector groups")

    pairs = []
    for k, (group, posts) in enumerate(zip(eig.vectors, post_states)):
        for vec, post in zip(group, posts):
            pairs.append((tensor(vec, ready), tensor(post, pointers[k])))
    u = complete_to_unitary(pairs)
    return MeasurementCoupling(eig, ready, pointers, post_states, u)


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    coefficients: tuple
    probabilities: tuple
    collapsed: tuple
    final_state: StateVector
    apparatus_rho: DensityOperator
    pointers: tuple

    def reconstruct(self) -> StateVector:
        """``sum_k sqrt(p_k) Phi_k x pointer_k`` over outcomes with ``p_k > 0``."""
        amps = np.zeros(self.final_state.dim, dtype=complex)
        for p, big_phi, pointer in zip(self.probabilities, self.collapsed, self.pointers):
            if big_phi is not None:
                amps += np.sqrt(p) * tensor(big_phi, pointer).amplitudes
        return StateVector(self.final_state.dims, amps)


def measure(c: MeasurementCoupling, phi_in: StateVector) -> MeasurementOutcome:
    if phi_in.dim != c.system_dim:
        raise ValueError(f"input has dimension {phi_in.dim}, system has {c.system_dim}")
    if not phi_in.is_normalized(OPERATOR_TOL):
        raise ValueError(f"input state is not normalized (norm {phi_in.norm:.15g})")
    coefficients, probabilities, collapsed = [], [], []
    for group, posts in zip(c.eig.vectors, c.post_states):
        ckl = tuple(vec.inner(phi_in) for vec in group)
        branch = sum(cc * post.amplitudes for cc, post in zip(ckl, posts))
        p = float(np.real(np.vdot(branch, branch)))
        coefficients.append(ckl)
        probabilities.append(p)
        if p > PROBABILITY_TOL:
            collapsed.append(StateVector(phi_in.dims, branch / np.sqrt(p)))
        else:
            collapsed.append(None)

    final = c.unitary.apply(tensor(phi_in, c.ready))
    final = StateVector((c.system_dim, c.apparatus_dim), final.amplitudes)
    rho_a = partial_trace(DensityOperator.pure(final), keep=[1])
    return MeasurementOutcome(tuple(coefficients), tuple(probabilities), tuple(collapsed),
                              final, rho_a, c.pointers)


@dataclass(frozen=True, eq=False)
class ObjectificationReport:
    condition_a: bool
    condition_b: bool
    off_diagonal_norm: float
    outside_span_residual: float
    pointer_matrix: np.ndarray = field(repr=False)
    probabilities: tuple = ()

    @property
    def verdict(self) -> str:
        return "satisfied" if self.condition_a and self.condition_b else "failed"

    def to_dict(self) -> dict:
        return {
            "condition_A": self.condition_a,
            "condition_B": self.condition_b,
            "off_diagonal_norm": self.off_diagonal_norm,
            "outside_span_residual": self.outside_span_residual,
            "probabilities": list(self.probabilities),
            "verdict": self.verdict,
        }


def _pointer_marginal(g: GemengeState) -> GemengeState:
    return reduce_components(g, keep=[len(g.dims) - 1])


def check_objectification(o: MeasurementOutcome,
                          claimed: Optional[GemengeState] = None) -> ObjectificationReport:
    """
    Test the two objectification conditions.

    Condition A: the apparatus state, expressed in the pointer basis, is
    diagonal with the outcome probabilities on the diagonal. Condition B:
    the preparation-level decomposition of the apparatus state consists of
    pointer projectors ``|pointer_j><pointer_j|`` at weights ``p_j``.

    ``claimed`` is the gemenge of the joint state whose last factor is the
    apparatus. When omitted, the pure final state of ``o`` is used, whose
    gemenge is necessarily trivial.
    """
    if claimed is None:
        claimed = GemengeState.from_pure(o.final_state)
    marginal = _pointer_marginal(claimed)
    rho = sum(w * t.entries for w, t in marginal.components)

    basis = np.column_stack([p.amplitudes for p in o.pointers])
    in_span = basis.conj().T @ rho @ basis
    span_proj = basis @ basis.conj().T
    outside = float(np.max(np.abs(rho - span_proj @ rho @ span_proj)))
    probs = np.asarray(o.probabilities)
    off = in_span - np.diag(np.diag(in_span))
    off_norm = float(np.max(np.abs(off), initial=0.0))
    condition_a = (
        outside <= OPERATOR_TOL
        and off_norm <= OPERATOR_TOL
        and float(np.max(np.abs(np.diag(in_span) - probs))) <= OPERATOR_TOL
    )

    # each component must collapse onto a single pointer, and the grouped
    # weights must reproduce the outcome probabilities
    condition_b = True
    weights = np.zeros(len(o.pointers))
    for w, t in marginal.components:
        if t.dim != basis.shape[0]:
            condition_b = False
            break
        hits = [j for j, p in enumerate(o.pointers)
                if float(np.max(np.abs(t.entries - np.outer(p.amplitudes, p.amplitudes.conj()))))
                <= OPERATOR_TOL]
        if len(hits) != 1:
            condition_b = False
            break
        weights[hits[0]] += w
    if condition_b:
        condition_b = float(np.max(np.abs(weights - probs))) <= OPERATOR_TOL

    return ObjectificationReport(condition_a, condition_b, off_norm, outside, in_span,
                                 tuple(o.probabilities))
