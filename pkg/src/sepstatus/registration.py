"""
Detector-array registration model.

Each detector occupies its own region and contains ``M_k`` particles
identical with the measured one. When outcome ``k`` occurs the measured
particle is absorbed into detector ``k``: its conditional state and the
detector's identical particles are (anti)symmetrized together into the
block ``W_kk``. The intermediate state is a gemenge over outcomes whose
components carry a definite pointer state.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bcl import (
    MeasurementCoupling,
    MeasurementOutcome,
    ObjectificationReport,
    check_objectification,
    measure,
)
from .gemenge import GemengeState, mixture
from .grid import GridSpace, Region, support
from .hilbert import (
    DEGENERACY_TOL,
    MAX_DIM,
    OPERATOR_TOL,
    DegenerateVectorError,
    DensityOperator,
    StateVector,
    partial_trace,
    tensor,
    tensor_all,
)
from .identicals import Statistics, build_symmetrizer
from .bcl import PROBABILITY_TOL

# which single-particle state enters W_kk: the conditional state of outcome k,
# or the first post-state of outcome k
ABSORBED_CHOICES = ("collapsed", "first_post_state")


class DegenerateAbsorptionError(DegenerateVectorError):
    """The absorbed particle is annihilated by antisymmetrization."""


@dataclass(frozen=True, eq=False)
class DetectorSpec:
    """
    One detector: its region and the state of its identical particles.

    ``state`` lives on ``d**n_particles``; for ``n_particles == 0`` it is the
    trivial one-dimensional state.
    """

    region: Region
    n_particles: int
    state: DensityOperator = field(default_factory=DensityOperator.trivial)

    def __post_init__(self):
        if self.n_particles < 0:
            raise ValueError("n_particles must be non-negative")
        if len(self.state.dims) != self.n_particles:
            raise ValueError(f"detector state has {len(self.state.dims)} factors, "
                             f"expected {self.n_particles}")

    @classmethod
    def from_orbitals(cls, region: Region, orbitals: Sequence[StateVector],
                      stats: Statistics) -> "DetectorSpec":
        """Pure (anti)symmetrized product of single-particle ``orbitals``."""
        if not orbitals:
            return cls(region, 0)
        d = orbitals[0].dim
        v = tensor_all(list(orbitals))
        if len(orbitals) > 1:
            v = build_symmetrizer(len(orbitals), d, stats).apply(v)
        norm = v.norm
        if norm < DEGENERACY_TOL:
            raise DegenerateVectorError("degenerate vector: detector orbitals violate exclusion")
        return cls(region, len(orbitals), DensityOperator.pure(StateVector(v.dims, v.amplitudes / norm)))


def build_w(phi_k: StateVector, t_k: DensityOperator, stats: Statistics):
    """
    Absorb ``phi_k`` into the ``M``-particle state ``t_k``.

    Returns
    -------
    (DensityOperator, float)
        ``W = nu2 * P (|phi_k><phi_k| x t_k) P`` and ``nu2 = 1 / tr(...)``.
    """
    stats = Statistics.parse(stats)
    if len(phi_k.dims) != 1:
        raise ValueError("phi_k must be a single-particle vector")
    if not phi_k.is_normalized(OPERATOR_TOL):
        raise ValueError("phi_k must be normalized")
    d = phi_k.dim
    m = len(t_k.dims)
    if any(f != d for f in t_k.dims):
        raise ValueError(f"detector state factors {t_k.dims} do not match dimension {d}")
    product = tensor(DensityOperator.pure(phi_k), t_k)
    if m == 0:
        return product, 1.0
    p = build_symmetrizer(m + 1, d, stats).matrix.entries
    raw = p @ product.entries @ p
    trace = float(np.real(np.trace(raw)))
    if trace < DEGENERACY_TOL:
        raise DegenerateAbsorptionError(
            f"degenerate absorption: symmetrized trace {trace:.3e} (state already occupied)")
    nu2 = 1.0 / trace
    return DensityOperator(product.dims, nu2 * raw), nu2


@dataclass(frozen=True, eq=False)
class RegistrationModel:
    """
    Coupling plus detector array.

    Construction enforces: detector regions pairwise disjoint and disjoint
    from ``source_region``; every post-state of outcome ``k`` supported in
    detector ``k``'s region; mutual orthonormality of all post-states;
    detector states inside the correct symmetry sector.
    """

    coupling: MeasurementCoupling
    detectors: tuple
    stats: Statistics
    space: GridSpace
    source_region: Region = field(default_factory=Region)
    absorbed: str = "collapsed"
    orthonormality_residual: float = field(init=False)

    def __post_init__(self):
        detectors = tuple(self.detectors)
        object.__setattr__(self, "detectors", detectors)
        object.__setattr__(self, "stats", Statistics.parse(self.stats))
        if self.absorbed not in ABSORBED_CHOICES:
            raise ValueError(f"absorbed must be one of {', '.join(ABSORBED_CHOICES)}, "
                             f"got {self.absorbed!r}")
        c = self.coupling
        if c.system_dim != self.space.n:
            raise ValueError(f"coupling acts on dimension {c.system_dim}, grid has {self.space.n}")
        if len(detectors) != c.eig.n_outcomes:
            raise ValueError(f"need one detector per outcome: {c.eig.n_outcomes} outcomes, "
                             f"{len(detectors)} detectors")
        self.source_region.check(self.space)
        for i, det in enumerate(detectors):
            det.region.check(self.space)
            if not det.region.isdisjoint(self.source_region):
                raise ValueError(f"detector {i} region overlaps the source region")
            for j in range(i):
                if not det.region.isdisjoint(detectors[j].region):
                    raise ValueError(f"detector regions {j} and {i} overlap")
            if any(f != self.space.n for f in det.state.dims):
                raise ValueError(f"detector {i} state does not live on the grid")
            if det.n_particles > 1 and not _state_in_sector(det.state, self.stats):
                raise ValueError(f"detector {i} state is not in the {self.stats.value} sector")
        for k, posts in enumerate(c.post_states):
            for l, post in enumerate(posts):
                if not support(post).issubset(detectors[k].region):
                    raise ValueError(f"post-state ({k}, {l}) is not supported in detector {k}")

        flat = [post for posts in c.post_states for post in posts]
        m = np.column_stack([v.amplitudes for v in flat])
        residual = float(np.max(np.abs(m.conj().T @ m - np.eye(len(flat)))))
        if residual > OPERATOR_TOL:
            raise ValueError(f"post-states are not mutually orthonormal (residual {residual:.3e})")
        object.__setattr__(self, "orthonormality_residual", residual)

        total = self.space.n ** (sum(d.n_particles for d in detectors) + 1) * c.apparatus_dim
        if total > MAX_DIM:
            raise ValueError(f"intermediate state needs dimension {total}, above the budget {MAX_DIM}")


def _state_in_sector(t: DensityOperator, stats: Statistics) -> bool:
    n, d = len(t.dims), t.dims[0]
    p = build_symmetrizer(n, d, stats).matrix.entries
    return float(np.max(np.abs(p @ t.entries - t.entries))) <= OPERATOR_TOL


@dataclass(frozen=True, eq=False)
class IntermediateState:
    gemenge: GemengeState
    nus: tuple
    probabilities: tuple
    fired: tuple
    layouts: tuple
    outcome: MeasurementOutcome


def _component(model: RegistrationModel, k: int, big_phi: StateVector):
    w_kk, nu2 = build_w(big_phi, model.detectors[k].state, model.stats)
    blocks = [w_kk if j == k else det.state for j, det in enumerate(model.detectors)]
    pointer = DensityOperator.pure(model.coupling.pointers[k])
    layout = tuple(det.n_particles + (1 if j == k else 0)
                   for j, det in enumerate(model.detectors))
    return tensor_all(blocks + [pointer]), nu2, layout


def intermediate_state(model: RegistrationModel, phi_in: StateVector,
                       max_workers: Optional[int] = None) -> IntermediateState:
    """
    Intermediate (post-absorption, pre-amplification) gemenge state.

    Outcomes with ``p_k <= 1e-12`` are dropped and the remaining weights
    rescaled proportionally. ``nus[k]`` is ``None`` for dropped outcomes.
    """
    outcome = measure(model.coupling, phi_in)
    fired = tuple(k for k, p in enumerate(outcome.probabilities) if p > PROBABILITY_TOL)

    def build(k):
        if model.absorbed == "collapsed":
            return _component(model, k, outcome.collapsed[k])
        return _component(model, k, model.coupling.post_states[k][0])

    if max_workers and len(fired) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            built = list(pool.map(build, fired))
    else:
        built = [build(k) for k in fired]

    kept = sum(outcome.probabilities[k] for k in fired)
    weights = [outcome.probabilities[k] / kept for k in fired]
    gemenge = GemengeState(tuple(zip(weights, [b[0] for b in built])))
    nus = [None] * len(outcome.probabilities)
    for k, b in zip(fired, built):
        nus[k] = b[1]
    return IntermediateState(gemenge, tuple(nus), tuple(outcome.probabilities), fired,
                             tuple(b[2] for b in built), outcome)


@dataclass(frozen=True, eq=False)
class RegistrationReport:
    checks: tuple
    objectification: ObjectificationReport
    probabilities: tuple
    nus: tuple
    pointer_marginal: np.ndarray
    state: IntermediateState

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)


def _check(name, value, tolerance, passed=None):
    if passed is None:
        passed = value <= tolerance
    return {"name": name, "pass": bool(passed), "value": float(value), "tolerance": tolerance}


def verify_model(model: RegistrationModel, phi_in: StateVector) -> RegistrationReport:
    """Recompute every property the intermediate state must have and record the results."""
    state = intermediate_state(model, phi_in)
    g = state.gemenge
    outcome = state.outcome
    checks = [_check("post_state_orthonormality", model.orthonormality_residual, OPERATOR_TOL)]

    rho = mixture(g)
    checks.append(_check("mixture_trace", abs(rho.trace - 1.0), OPERATOR_TOL))
    comp_trace = max(abs(t.trace - 1.0) for t in g.states)
    checks.append(_check("component_traces", comp_trace, OPERATOR_TOL))

    expected = np.array([outcome.probabilities[k] for k in state.fired])
    weight_err = float(np.max(np.abs(np.array(g.weights) - expected)))
    checks.append(_check("weights_match_probabilities", weight_err, OPERATOR_TOL))

    marginal = partial_trace(rho, keep=[len(rho.dims) - 1]).entries
    target = sum(p * np.outer(v.amplitudes, v.amplitudes.conj())
                 for p, v in zip(outcome.probabilities, outcome.pointers))
    checks.append(_check("pointer_marginal", float(np.max(np.abs(marginal - target))), OPERATOR_TOL))

    layout_ok = all(
        layout[k] == model.detectors[k].n_particles + 1
        and len(comp.dims) == sum(layout) + 1
        for k, layout, comp in zip(state.fired, state.layouts, g.states)
    )
    checks.append(_check("absorbed_into_detector_block", 0.0 if layout_ok else 1.0, 0.0, layout_ok))

    obj = check_objectification(outcome, g)
    checks.append(_check("objectification", 0.0 if obj.verdict == "satisfied" else 1.0, 0.0,
                         obj.verdict == "satisfied"))
    return RegistrationReport(tuple(checks), obj, tuple(outcome.probabilities), state.nus,
                              marginal, state)
