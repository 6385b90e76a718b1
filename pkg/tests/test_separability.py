import numpy as np
import pytest

from sepstatus.grid import GridSpace, KernelOperator, Region, WaveFunction, expectation, localize
from sepstatus.identicals import Statistics
from sepstatus.separability import (
    SeparationStatus,
    check_cluster_separability,
    experiment_one,
    experiment_two,
    random_local_observable,
    separation_status,
)

from _fixtures import orthogonal_pair, random_kernel, random_wave, split_region

BOTH = [Statistics.BOSE, Statistics.FERMI]


def test_experiment_one_identity():
    rng = np.random.default_rng(0)
    space = GridSpace(5, 0.3)
    psi = random_wave(rng, space)
    assert experiment_one(psi, KernelOperator.resolution_of_identity(space)) == pytest.approx(1, abs=1e-12)


def test_experiment_one_local_projector():
    rng = np.random.default_rng(1)
    space = GridSpace(6, 2.0)
    d = Region([1, 2, 3])
    psi = random_wave(rng, space, d.points)
    a = localize(KernelOperator.resolution_of_identity(space), d)
    # <psi|P_D|psi> with psi inside D is just the norm
    assert experiment_one(psi, a) == pytest.approx(1, abs=1e-12)


def test_experiment_one_delegates():
    rng = np.random.default_rng(2)
    space = GridSpace(5)
    a, psi = random_kernel(rng, space), random_wave(rng, space)
    assert experiment_one(psi, a) == expectation(a, psi)


@pytest.mark.parametrize("stats", BOTH)
def test_experiment_two_local_disjoint(stats):
    rng = np.random.default_rng(3)
    space = GridSpace(6)
    d, rest = Region([0, 1, 2]), Region([3, 4, 5])
    psi, phi = random_wave(rng, space, d.points), random_wave(rng, space, rest.points)
    a = random_local_observable(space, d, rng)
    assert abs(experiment_two(psi, phi, a, stats) - experiment_one(psi, a)) <= 1e-12


@pytest.mark.parametrize("stats", BOTH)
@pytest.mark.parametrize("spacing", [1.0, 0.4])
def test_experiment_two_orthogonal_adds_partner_term(stats, spacing):
    rng = np.random.default_rng(4)
    space = GridSpace(5, spacing)
    psi, phi = orthogonal_pair(rng, space)
    a = random_kernel(rng, space)
    expected = experiment_one(psi, a) + experiment_one(phi, a)
    assert abs(experiment_two(psi, phi, a, stats) - expected) <= 1e-12


def test_experiment_two_basis_oracle():
    space = GridSpace(4)
    psi, phi = WaveFunction.basis(space, 0), WaveFunction.basis(space, 1)
    a = KernelOperator(space, np.diag([1.0, 0, 0, 0]))
    # direct two-particle matrix: state (e0e1 + e1e0)/sqrt2, observable a x I + I x a
    state = np.zeros(16)
    state[1] = state[4] = 2**-0.5
    obs = np.kron(a.entries, np.eye(4)) + np.kron(np.eye(4), a.entries)
    assert state @ obs @ state == pytest.approx(1.0)
    assert experiment_two(psi, phi, a, Statistics.BOSE) == pytest.approx(1.0, abs=1e-12)


def test_cluster_check_restores_agreement():
    rng = np.random.default_rng(5)
    space = GridSpace(6)
    d = Region([0, 1])
    psi, phi = random_wave(rng, space, d.points), random_wave(rng, space, [3, 4, 5])
    rep = check_cluster_separability(psi, phi, random_local_observable(space, d, rng), d,
                                     Statistics.BOSE)
    assert rep.d_local and rep.supports_disjoint
    assert rep.discrepancy <= 1e-12
    assert rep.disturbance_term == pytest.approx(0, abs=1e-15)


def test_cluster_check_identity_leaks_partner_norm():
    rng = np.random.default_rng(6)
    space = GridSpace(5)
    psi, phi = orthogonal_pair(rng, space)
    a = KernelOperator.resolution_of_identity(space)
    rep = check_cluster_separability(psi, phi, a, Region.full(space), Statistics.FERMI)
    assert rep.discrepancy == pytest.approx(1.0, abs=1e-12)
    assert rep.disturbance_term == pytest.approx(1.0, abs=1e-12)
    assert rep.discrepancy == abs(rep.avg_experiment_two - rep.avg_experiment_one)


def test_cluster_check_empty_region_is_not_local():
    rng = np.random.default_rng(7)
    space = GridSpace(5)
    psi, phi = orthogonal_pair(rng, space)
    rep = check_cluster_separability(psi, phi, random_kernel(rng, space), Region(), Statistics.BOSE)
    assert not rep.d_local
    zero = KernelOperator(space, np.zeros((5, 5)))
    assert check_cluster_separability(psi, phi, zero, Region(), Statistics.BOSE).d_local


def test_status_holds_with_remote_partners():
    rng = np.random.default_rng(8)
    space = GridSpace(6)
    d = Region([0, 1, 2])
    psi = random_wave(rng, space, [0, 1, 2])
    others = [random_wave(rng, space, [3, 4]), random_wave(rng, space, [4, 5])]
    for stats in BOTH:
        status = separation_status(psi, others, d, trials=10, seed=1, stats=stats)
        assert status.holds and status.witness is None


def test_status_fails_without_support_in_region():
    rng = np.random.default_rng(9)
    space = GridSpace(6)
    psi = random_wave(rng, space, [4, 5])
    status = separation_status(psi, [], Region([0, 1]), trials=3, seed=0)
    assert not status.holds


def test_status_witness_for_overlapping_partner():
    rng = np.random.default_rng(10)
    space = GridSpace(6)
    d = Region([0, 1, 2])
    psi = random_wave(rng, space, [0, 1])
    intruder = random_wave(rng, space, [2, 3])
    trials, seed = 8, 42
    status = separation_status(psi, [intruder], d, trials=trials, seed=seed)
    assert not status.holds
    assert status.witness["partner"] == 0
    a = KernelOperator(space, status.witness["observable"])
    assert abs(experiment_two(psi, intruder, a, Statistics.BOSE) - experiment_one(psi, a)) > 1e-10

    # certify on this fixture that every trial observable detects the intruder,
    # so the randomized search cannot miss it
    replay = np.random.default_rng(seed)
    for _ in range(trials):
        a = random_local_observable(space, d, replay)
        gap = abs(experiment_two(psi, intruder, a, Statistics.BOSE) - experiment_one(psi, a))
        assert gap > 1e-6
    assert status.witness["trial"] == 0


def test_status_invariant():
    with pytest.raises(ValueError):
        SeparationStatus(Region([0]), True, {"reason": "x"})


def test_status_requires_trials():
    space = GridSpace(3)
    with pytest.raises(ValueError):
        separation_status(WaveFunction.basis(space, 0), [], Region([0]), trials=0, seed=0)


@pytest.mark.parametrize("stats", BOTH)
def test_experiment_two_is_symmetric(stats):
    rng = np.random.default_rng(11)
    space = GridSpace(5)
    for _ in range(20):
        psi, phi, a = random_wave(rng, space), random_wave(rng, space), random_kernel(rng, space)
        assert abs(experiment_two(psi, phi, a, stats) - experiment_two(phi, psi, a, stats)) <= 1e-12


@pytest.mark.parametrize("stats", BOTH)
def test_random_local_fixtures_agree(stats):
    rng = np.random.default_rng(12)
    for _ in range(25):
        space = GridSpace(int(rng.integers(3, 8)), float(rng.uniform(0.2, 2.0)))
        d, rest = split_region(rng, space.n)
        phi = random_wave(rng, space, rest.points)
        a = random_local_observable(space, d, rng)
        psi_local = random_wave(rng, space, d.points)
        assert abs(experiment_two(psi_local, phi, a, stats) - experiment_one(psi_local, a)) <= 1e-12
