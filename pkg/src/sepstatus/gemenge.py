"""
Density operators that remember how they were prepared.

A ``GemengeState`` is a convex decomposition that records a random mixture
of preparations. The decomposition is provenance: it is created only by
constructors describing a preparation and is propagated by dynamics and
composition, never inferred from a bare matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import to_pairs
from .hilbert import (
    OPERATOR_TOL,
    DensityOperator,
    Operator,
    StateVector,
    partial_trace,
    tensor,
)

TRIVIALITY_TOL = 1e-10


def _common_dims(all_dims: Sequence[tuple]) -> tuple:
    """
    Factor structure shared by all components.

    Components may factor the same total space differently. The shared
    leading and trailing factors are kept and the differing middle is
    merged into a single factor.
    """
    first = all_dims[0]
    if all(d == first for d in all_dims):
        return first
    totals = {int(np.prod(d, dtype=int)) for d in all_dims}
    if len(totals) != 1:
        raise ValueError(f"components have different total dimensions {sorted(totals)}")
    shortest = min(len(d) for d in all_dims)
    prefix = 0
    while prefix < shortest and all(d[prefix] == first[prefix] for d in all_dims):
        prefix += 1
    suffix = 0
    while (suffix < shortest - prefix
           and all(d[-1 - suffix] == first[-1 - suffix] for d in all_dims)):
        suffix += 1
    head = first[:prefix]
    tail = first[len(first) - suffix:] if suffix else ()
    middle = totals.pop() // int(np.prod(head + tail, dtype=int))
    return head + (middle,) + tail


@dataclass(frozen=True, eq=False)
class GemengeState:
    components: tuple
    dims: tuple = field(init=False)

    def __post_init__(self):
        components = tuple((float(w), t) for w, t in self.components)
        if not components:
            raise ValueError("a gemenge needs at least one component")
        for w, t in components:
            if not 0.0 < w <= 1.0 + OPERATOR_TOL:
                raise ValueError(f"gemenge weight {w} is outside (0, 1]")
            if not isinstance(t, DensityOperator):
                raise TypeError("gemenge components must be DensityOperator instances")
        total = sum(w for w, _ in components)
        if abs(total - 1.0) > OPERATOR_TOL:
            raise ValueError(f"gemenge weights sum to {total!r}, expected 1")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "dims", _common_dims([t.dims for _, t in components]))

    @classmethod
    def from_pure(cls, v: StateVector) -> "GemengeState":
        """A vector state admits only the one-component gemenge."""
        return cls(((1.0, DensityOperator.pure(v)),))

    @classmethod
    def mix(cls, weights: Sequence[float], states: Sequence[DensityOperator]) -> "GemengeState":
        if len(weights) != len(states):
            raise ValueError("weights and states must have the same length")
        return cls(tuple(zip(weights, states)))

    @property
    def weights(self) -> tuple:
        return tuple(w for w, _ in self.components)

    @property
    def states(self) -> tuple:
        return tuple(t for _, t in self.components)

    def __len__(self) -> int:
        return len(self.components)

    def to_dict(self) -> list:
        return [{"weight": w, "dims": list(t.dims), "matrix": to_pairs(t.entries)}
                for w, t in self.components]


def mixture(g: GemengeState) -> DensityOperator:
    entries = sum(w * t.entries for w, t in g.components)
    return DensityOperator(g.dims, entries)


def evolve(g: GemengeState, u: Operator) -> GemengeState:
    if not u.is_unitary():
        raise ValueError(f"evolution operator is not unitary (residual {u.unitarity_residual():.3e})")
    return GemengeState(tuple((w, t.conjugate_by(u)) for w, t in g.components))


def compose(g: GemengeState, partners: Sequence[DensityOperator]) -> GemengeState:
    if len(partners) != len(g):
        raise ValueError(f"need one partner per component: {len(g)} components, "
                         f"{len(partners)} partners")
    return GemengeState(tuple((w, tensor(t, p)) for (w, t), p in zip(g.components, partners)))


def coarsen(g: GemengeState, groups: Sequence[Sequence[int]]) -> GemengeState:
    """Merge each group of components into one preparation."""
    flat = [int(i) for grp in groups for i in grp]
    if sorted(flat) != list(range(len(g))) or any(len(grp) == 0 for grp in groups):
        raise ValueError(f"groups {groups!r} do not partition component indices 0..{len(g) - 1}")
    merged = []
    for grp in groups:
        w = sum(g.components[i][0] for i in grp)
        entries = sum(g.components[i][0] * g.components[i][1].entries for i in grp) / w
        dims = _common_dims([g.components[i][1].dims for i in grp])
        merged.append((w, DensityOperator(dims, entries)))
    return GemengeState(tuple(merged))


def is_trivial(g: GemengeState) -> bool:
    first = g.components[0][1].entries
    return all(
        t.entries.shape == first.shape
        and float(np.max(np.abs(t.entries - first))) <= TRIVIALITY_TOL
        for _, t in g.components[1:]
    )


def reduce_components(g: GemengeState, keep) -> GemengeState:
    """Partial trace applied component by component; weights are untouched."""
    return GemengeState(tuple((w, partial_trace(t, keep)) for w, t in g.components))
