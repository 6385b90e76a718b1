import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepstatus.grid import (
    GridSpace,
    KernelOperator,
    NotHermitianError,
    Region,
    WaveFunction,
    expectation,
    from_pairs,
    is_d_local,
    localize,
    support,
    to_pairs,
)

from _fixtures import random_kernel, random_wave


def test_support_basis_and_zero():
    space = GridSpace(8)
    assert support(WaveFunction.basis(space, 3), 1e-12) == Region([3])
    assert support(np.zeros(8), 1e-12) == Region()


def test_support_of_gaussian_by_scan():
    space = GridSpace(8)
    psi = WaveFunction.gaussian(space, center=2, width=0.5)
    found = support(psi, 1e-6)
    scanned = []
    for i in range(space.n):
        if abs(psi.amplitudes[i]) > 1e-6:
            scanned.append(i)
    assert sorted(found.points) == scanned
    assert 2 in found.points
    assert scanned == list(range(scanned[0], scanned[-1] + 1))


def test_support_rejects_negative_threshold():
    with pytest.raises(ValueError):
        support(np.ones(3), -1.0)


def test_is_d_local_examples():
    space = GridSpace(4)
    assert is_d_local(KernelOperator(space, np.eye(4)), Region.full(space))
    a = np.zeros((4, 4))
    a[0, 1] = 1
    assert not is_d_local(KernelOperator(space, a), Region([0]))


def test_localize_random_is_local():
    rng = np.random.default_rng(0)
    space = GridSpace(6)
    a = random_kernel(rng, space)
    d = Region([1, 4])
    assert is_d_local(localize(a, d), d)
    assert not is_d_local(a, d)


def test_localize_identity_is_projector():
    space = GridSpace(5)
    out = localize(KernelOperator(space, np.eye(5)), Region([0, 2]))
    np.testing.assert_array_equal(out.entries, np.diag([1, 0, 1, 0, 0]))


def test_localize_full_grid_is_noop():
    rng = np.random.default_rng(1)
    space = GridSpace(5)
    a = random_kernel(rng, space)
    np.testing.assert_array_equal(localize(a, Region.full(space)).entries, a.entries)


def test_localize_block_entrywise():
    rng = np.random.default_rng(2)
    space = GridSpace(6)
    a = random_kernel(rng, space)
    out = localize(a, Region([0, 1, 2])).entries
    np.testing.assert_array_equal(out[:3, :3], a.entries[:3, :3])
    assert not out[3:, :].any() and not out[:, 3:].any()
    assert np.allclose(out, out.conj().T)


@pytest.mark.parametrize("spacing", [1.0, 0.25, 3.0])
def test_expectation_resolution_of_identity(spacing):
    rng = np.random.default_rng(3)
    space = GridSpace(6, spacing)
    psi = random_wave(rng, space)
    assert expectation(KernelOperator.resolution_of_identity(space), psi) == pytest.approx(1.0, abs=1e-12)


def test_expectation_projector_outside_support():
    space = GridSpace(6)
    rng = np.random.default_rng(4)
    psi = random_wave(rng, space, points=[3, 4, 5])
    a = KernelOperator(space, Region([0, 1, 2]).projector(space))
    assert expectation(a, psi) == 0.0


@pytest.mark.parametrize("spacing", [1.0, 0.5])
def test_expectation_matches_loop_oracle(spacing):
    rng = np.random.default_rng(5)
    space = GridSpace(6, spacing)
    a, psi = random_kernel(rng, space), random_wave(rng, space)
    total = 0j
    for i in range(space.n):
        for j in range(space.n):
            total += a.entries[i, j] * np.conj(psi.amplitudes[i]) * psi.amplitudes[j]
    total *= spacing**2
    assert abs(expectation(a, psi) - total.real) <= 1e-12
    assert abs(total.imag) <= 1e-10


def test_expectation_rejects_non_hermitian():
    space = GridSpace(3)
    a = KernelOperator(space, np.triu(np.ones((3, 3))))
    with pytest.raises(NotHermitianError, match="observable must be Hermitian"):
        expectation(a, WaveFunction.basis(space, 0))


def test_wavefunction_requires_normalization():
    space = GridSpace(3, 0.5)
    with pytest.raises(ValueError, match="normalized"):
        WaveFunction(space, [1, 0, 0])
    psi = WaveFunction.basis(space, 0)
    assert abs(psi.as_state().norm - 1) < 1e-15


def test_region_bounds():
    with pytest.raises(ValueError):
        Region([9]).mask(GridSpace(4))
    with pytest.raises(ValueError):
        GridSpace(1)


def test_pairs_round_trip():
    rng = np.random.default_rng(6)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_array_equal(from_pairs(to_pairs(m)), m)


regions = st.sets(st.integers(0, 5), max_size=6)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), points=regions)
def test_localize_idempotent(seed, points):
    space = GridSpace(6)
    a = random_kernel(np.random.default_rng(seed), space)
    d = Region(points)
    once = localize(a, d)
    np.testing.assert_array_equal(localize(once, d).entries, once.entries)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), small=regions, extra=regions)
def test_d_locality_monotone(seed, small, extra):
    space = GridSpace(6)
    a = localize(random_kernel(np.random.default_rng(seed), space), Region(small))
    assert is_d_local(a, Region(small))
    assert is_d_local(a, Region(small | extra))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), points=regions)
def test_local_observable_blind_outside(seed, points):
    rng = np.random.default_rng(seed)
    space = GridSpace(6)
    d = Region(points)
    outside = set(range(6)) - points
    if not outside:
        return
    a = localize(random_kernel(rng, space), d)
    psi = random_wave(rng, space, outside)
    assert support(psi).isdisjoint(d)
    assert abs(expectation(a, psi)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), spacing=st.floats(0.1, 5.0))
def test_expectation_is_real(seed, spacing):
    rng = np.random.default_rng(seed)
    space = GridSpace(5, spacing)
    a, psi = random_kernel(rng, space), random_wave(rng, space)
    value = complex(np.vdot(psi.amplitudes, a.entries @ psi.amplitudes)) * spacing**2
    assert abs(value.imag) <= 1e-10
    assert isinstance(expectation(a, psi), float)
