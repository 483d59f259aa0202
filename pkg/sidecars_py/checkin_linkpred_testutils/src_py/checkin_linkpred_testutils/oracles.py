"""Slow, independent reimplementations of the scoring formulas, written
with plain loops over the graph's pair counts. None of these call into
the library's scoring code, so they can be used to cross-check it.
"""
from __future__ import annotations

import math
from collections.abc import Sequence

from checkin_linkpred.graph import BipartiteGraph


def dense_incidence(
        g: BipartiteGraph,
        *,
        weighted: bool = False
        ) -> list[list[float]]:
    """Users by venues, in the graph's index order."""
    matrix = [[0.0] * g.n_venues for _ in range(g.n_users)]
    for (user_idx, venue_idx), count in g.pair_counts.items():
        matrix[user_idx][venue_idx] = float(count) if weighted else 1.0
    return matrix


def nbi_oracle(
        g: BipartiteGraph,
        user: str,
        *,
        steps: int = 1,
        weighted: bool = False,
        user_boost: Sequence[float] | None = None
        ) -> dict[str, float]:
    """Resource flow: a unit on every venue of the user, then ``steps``
    rounds of venue-to-user and user-to-venue splitting. ``user_boost``
    is added to the user resources after the first venue-to-user step.
    """
    matrix = dense_incidence(g, weighted=weighted)
    n_users = g.n_users
    n_venues = g.n_venues
    user_deg = [sum(matrix[i]) for i in range(n_users)]
    venue_deg = [
        sum(matrix[i][j] for i in range(n_users)) for j in range(n_venues)]

    user_idx = g.users.index(user)
    resource = [
        1.0 if (user_idx, j) in g.pair_counts else 0.0
        for j in range(n_venues)]
    for step in range(steps):
        user_resource = [0.0] * n_users
        for i in range(n_users):
            for j in range(n_venues):
                if venue_deg[j] > 0:
                    user_resource[i] += (
                        matrix[i][j] * resource[j] / venue_deg[j])
        if user_boost is not None and step == 0:
            user_resource = [
                value + boost for value, boost
                in zip(user_resource, user_boost, strict=True)]

        resource = [0.0] * n_venues
        for j in range(n_venues):
            for i in range(n_users):
                if user_deg[i] > 0:
                    resource[j] += (
                        matrix[i][j] * user_resource[i] / user_deg[i])

    return dict(zip(g.venues, resource, strict=True))


def aa_oracle(g: BipartiteGraph, user1: str, user2: str) -> float:
    """Binary Adamic-Adar index by brute force over every venue."""
    idx1 = g.users.index(user1)
    idx2 = g.users.index(user2)
    similarity = 0.0
    for venue_idx in range(g.n_venues):
        if (
            (idx1, venue_idx) in g.pair_counts
            and (idx2, venue_idx) in g.pair_counts
        ):
            degree = sum(
                1 for user_idx in range(g.n_users)
                if (user_idx, venue_idx) in g.pair_counts)
            if degree > 1:
                similarity += 1 / math.log(degree)
    return similarity


def similarity_vector_oracle(g: BipartiteGraph, user: str) -> list[float]:
    return [
        0.0 if other == user else aa_oracle(g, user, other)
        for other in g.users]


def cf_oracle(g: BipartiteGraph, user: str, venue: str) -> float:
    similarities = similarity_vector_oracle(g, user)
    total = sum(similarities)
    if total == 0:
        return 0.0

    venue_idx = g.venues.index(venue)
    votes = sum(
        similarity for user_idx, similarity in enumerate(similarities)
        if (user_idx, venue_idx) in g.pair_counts)
    return votes / total


def auc_oracle(
        positive_scores: Sequence[float],
        negative_scores: Sequence[float]
        ) -> tuple[int, int, int]:
    """``(n_comparisons, n_wins, n_ties)`` over every combination."""
    wins = 0
    ties = 0
    for positive in positive_scores:
        for negative in negative_scores:
            if positive > negative:
                wins += 1
            elif positive == negative:
                ties += 1
    return len(positive_scores) * len(negative_scores), wins, ties


def trendiness_oracle(
        g: BipartiteGraph,
        venue: str,
        start: float,
        end: float,
        tau: float
        ) -> float:
    venue_idx = g.venues.index(venue)
    timestamps = [
        timestamp
        for (_, pair_venue_idx), times in g.checkin_times.items()
        if pair_venue_idx == venue_idx
        for timestamp in times]
    if not timestamps:
        return 0.0
    inside = sum(
        1 for timestamp in timestamps
        if start - tau <= timestamp < end + tau)
    return inside / len(timestamps)


def haversine_oracle(
        lat1: float,
        lon1: float,
        lat2: float,
        lon2: float
        ) -> float:
    radius = 6371.0
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    half_chord = (
        math.sin((phi2 - phi1) / 2) ** 2
        + math.cos(phi1) * math.cos(phi2)
        * math.sin(math.radians(lon2 - lon1) / 2) ** 2)
    return 2 * radius * math.asin(math.sqrt(min(1.0, half_chord)))
