"""
Local registrations with and without a remote identical particle.

``experiment_one`` is a registration on a lone particle; ``experiment_two``
is the same registration after a second identical particle has been
prepared elsewhere, computed with the fully (anti)symmetrized state and
observable. Their difference measures the disturbance caused by the mere
presence of the other particle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import (
    KernelOperator,
    Region,
    WaveFunction,
    expectation,
    is_d_local,
    localize,
    support,
)
from .hilbert import OPERATOR_TOL
from .identicals import (
    Statistics,
    symmetrize_two_particle_observable,
    symmetrize_two_particle_state,
)

AGREEMENT_TOL = 1e-10


@dataclass(frozen=True)
class SeparabilityReport:
    avg_experiment_one: float
    avg_experiment_two: float
    discrepancy: float
    disturbance_term: float
    d_local: bool
    supports_disjoint: bool

    def to_dict(self) -> dict:
        return {
            "avg_experiment_one": self.avg_experiment_one,
            "avg_experiment_two": self.avg_experiment_two,
            "discrepancy": self.discrepancy,
            "disturbance_term": self.disturbance_term,
            "d_local": self.d_local,
            "supports_disjoint": self.supports_disjoint,
        }


@dataclass(frozen=True)
class SeparationStatus:
    region: Region
    holds: bool
    witness: Optional[dict] = field(default=None)

    def __post_init__(self):
        if self.holds and self.witness is not None:
            raise ValueError("a holding separation status cannot carry a witness")


def experiment_one(psi: WaveFunction, a: KernelOperator) -> float:
    return expectation(a, psi)


def experiment_two(psi: WaveFunction, phi: WaveFunction, a: KernelOperator,
                   stats: Statistics) -> float:
    """Average of the symmetrized observable in the symmetrized two-particle state."""
    state = symmetrize_two_particle_state(psi, phi, stats)
    obs = symmetrize_two_particle_observable(a)
    h = psi.space.spacing
    # Euclidean amplitudes carry sqrt(h) per particle; kernels need h per integral
    value = complex(np.vdot(state.amplitudes, obs.entries @ state.amplitudes)) * h * h
    if abs(value.imag) > OPERATOR_TOL:
        raise ArithmeticError(f"expectation has imaginary part {value.imag:.3e}")
    return value.real


def check_cluster_separability(psi: WaveFunction, phi: WaveFunction, a: KernelOperator,
                               region: Region, stats: Statistics) -> SeparabilityReport:
    one = experiment_one(psi, a)
    two = experiment_two(psi, phi, a, stats)
    return SeparabilityReport(
        avg_experiment_one=one,
        avg_experiment_two=two,
        discrepancy=abs(two - one),
        disturbance_term=experiment_one(phi, a),
        d_local=is_d_local(a, region),
        supports_disjoint=support(phi).isdisjoint(region),
    )


def random_local_observable(space, region: Region, rng: np.random.Generator) -> KernelOperator:
    return localize(KernelOperator.random_hermitian(space, rng), region)


def separation_status(psi: WaveFunction, others: Sequence[WaveFunction], region: Region,
                      trials: int, seed: int, stats: Statistics = Statistics.BOSE,
                      tol: float = AGREEMENT_TOL) -> SeparationStatus:
    """
    Test whether ``psi`` has separation status ``region``.

    The support condition is checked exactly; undisturbed registration is
    checked on ``trials`` random Hermitian observables local to ``region``,
    drawn from ``numpy.random.default_rng(seed)``, against every partner in
    ``others``. The first disagreement is returned as the witness.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    region.check(psi.space)
    if support(psi).isdisjoint(region):
        return SeparationStatus(region, False, {
            "reason": "support of the state does not meet the region",
        })
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        a = random_local_observable(psi.space, region, rng)
        alone = experiment_one(psi, a)
        for index, other in enumerate(others):
            together = experiment_two(psi, other, a, stats)
            if abs(together - alone) > tol:
                return SeparationStatus(region, False, {
                    "reason": "local registration disturbed by an identical partner",
                    "trial": trial,
                    "partner": index,
                    "observable": a.entries,
                    "avg_experiment_one": alone,
                    "avg_experiment_two": together,
                })
    return SeparationStatus(region, True)
