"""Resource allocation over the bipartite graph. One round of flow is
two half-steps: every venue splits its resource among its users, then
every user splits what it received among its venues. Under binary
adjacency the splits are equal shares; under weighted adjacency they
are proportional to check-in counts. Both half-steps conserve the total
resource, as long as resource only sits on nodes with at least one
edge.
"""
from __future__ import annotations

from collections.abc import Iterator
from enum import StrEnum

import numpy as np

from checkin_linkpred._matrices import GraphMatrices


class FlowSide(StrEnum):
    USERS = 'users'
    VENUES = 'venues'


def _shares(resource: np.ndarray, degrees: np.ndarray) -> np.ndarray:
    return np.divide(
        resource,
        degrees,
        out=np.zeros(resource.shape, dtype=np.float64),
        where=degrees > 0)


def spread_to_users(
        matrices: GraphMatrices,
        venue_resource: np.ndarray,
        *,
        weighted: bool
        ) -> np.ndarray:
    shares = _shares(venue_resource, matrices.venue_degrees(weighted))
    return matrices.incidence(weighted) @ shares


def spread_to_venues(
        matrices: GraphMatrices,
        user_resource: np.ndarray,
        *,
        weighted: bool
        ) -> np.ndarray:
    shares = _shares(user_resource, matrices.user_degrees(weighted))
    return matrices.incidence(weighted).T @ shares


def iter_half_steps(
        matrices: GraphMatrices,
        venue_seed: np.ndarray,
        *,
        rounds: int,
        weighted: bool,
        user_boost: np.ndarray | None = None
        ) -> Iterator[tuple[FlowSide, np.ndarray]]:
    """Yields the resource vector after every half-step. If passed,
    ``user_boost`` is added to the user resources after the first
    venue-to-user half-step (and only then).
    """
    venue_resource = np.asarray(venue_seed, dtype=np.float64)
    for round_idx in range(rounds):
        user_resource = spread_to_users(
            matrices, venue_resource, weighted=weighted)
        if user_boost is not None and round_idx == 0:
            user_resource = user_resource + user_boost
        yield FlowSide.USERS, user_resource

        venue_resource = spread_to_venues(
            matrices, user_resource, weighted=weighted)
        yield FlowSide.VENUES, venue_resource


def run_flow(
        matrices: GraphMatrices,
        venue_seed: np.ndarray,
        *,
        rounds: int,
        weighted: bool,
        user_boost: np.ndarray | None = None
        ) -> np.ndarray:
    """Returns the venue resources after ``rounds`` full rounds."""
    if rounds < 1:
        raise ValueError('Need at least one round of flow', rounds)

    venue_resource = venue_seed
    for side, resource in iter_half_steps(
            matrices,
            venue_seed,
            rounds=rounds,
            weighted=weighted,
            user_boost=user_boost):
        if side is FlowSide.VENUES:
            venue_resource = resource

    return venue_resource
