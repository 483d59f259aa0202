from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from checkin_linkpred.checkins import CheckIn
from checkin_linkpred.graph import BipartiteGraph
from checkin_linkpred.graph import VenueMeta

CATEGORIES = ('Bar', 'Cafe', 'Gym', 'Museum')


def make_checkin(
        user: str,
        venue: str,
        *,
        category: str = 'Bar',
        latitude: float = 0.0,
        longitude: float = 0.0,
        timestamp: float = 0.0
        ) -> CheckIn:
    return CheckIn(
        user_id=user,
        venue_id=venue,
        category=category,
        latitude=latitude,
        longitude=longitude,
        timestamp=timestamp)


def graph_from_counts(
        counts: Mapping[tuple[str, str], int],
        *,
        users: tuple[str, ...] = (),
        venues: tuple[str, ...] = (),
        venue_meta: Mapping[str, VenueMeta] | None = None,
        times: Mapping[tuple[str, str], list[float]] | None = None
        ) -> BipartiteGraph:
    """Builds a graph straight from ``{(user, venue): count}``. Pairs
    without explicit times get timestamps ``0, 1, 2...``. Venues without
    explicit metadata get category ``Bar`` at (0, 0).
    """
    times = times or {}
    pair_times = {
        key: list(times.get(key, [float(idx) for idx in range(count)]))
        for key, count in counts.items()}
    all_venues = set(venues) | {venue for _, venue in counts}
    meta = {
        venue: VenueMeta('Bar', 0.0, 0.0) for venue in all_venues}
    meta.update(venue_meta or {})
    return BipartiteGraph.from_records(
        users=users,
        venues=venues,
        pair_times=pair_times,
        venue_meta=meta)


def toy_graph() -> BipartiteGraph:
    """U1 visits V1 and V2; U2 visits V1, V2 and V3; U3 visits V3 and
    V4. Every pair has a single check-in.
    """
    return graph_from_counts({
        ('U1', 'V1'): 1,
        ('U1', 'V2'): 1,
        ('U2', 'V1'): 1,
        ('U2', 'V2'): 1,
        ('U2', 'V3'): 1,
        ('U3', 'V3'): 1,
        ('U3', 'V4'): 1,
    })


def random_graph(
        rng: np.random.Generator,
        *,
        n_users: int = 8,
        n_venues: int = 8,
        density: float = 0.4,
        max_count: int = 3,
        with_meta: bool = True
        ) -> BipartiteGraph:
    """A random bipartite multigraph with at least one connected pair.
    Venue metadata and timestamps are random too.
    """
    users = tuple(f'u{idx}' for idx in range(n_users))
    venues = tuple(f'v{idx}' for idx in range(n_venues))
    counts: dict[tuple[str, str], int] = {}
    times: dict[tuple[str, str], list[float]] = {}
    for user in users:
        for venue in venues:
            if rng.random() < density:
                count = int(rng.integers(1, max_count + 1))
                counts[(user, venue)] = count
                times[(user, venue)] = sorted(
                    float(value)
                    for value in rng.integers(0, 1000, size=count))

    if not counts:
        counts[(users[0], venues[0])] = 1
        times[(users[0], venues[0])] = [0.0]

    venue_meta: dict[str, VenueMeta] = {}
    if with_meta:
        for venue in venues:
            venue_meta[venue] = VenueMeta(
                category=CATEGORIES[int(rng.integers(len(CATEGORIES)))],
                latitude=float(rng.uniform(40.0, 41.0)),
                longitude=float(rng.uniform(-74.5, -73.5)))

    return graph_from_counts(
        counts,
        users=users,
        venues=venues,
        venue_meta=venue_meta,
        times=times)


def random_checkins(
        rng: np.random.Generator,
        n_checkins: int,
        *,
        n_users: int = 5,
        n_venues: int = 5
        ) -> list[CheckIn]:
    return [
        make_checkin(
            f'u{int(rng.integers(n_users))}',
            f'v{int(rng.integers(n_venues))}',
            category=CATEGORIES[int(rng.integers(len(CATEGORIES)))],
            latitude=float(rng.uniform(-90, 90)),
            longitude=float(rng.uniform(-180, 180)),
            timestamp=float(rng.integers(0, 2_000_000_000)))
        for _ in range(n_checkins)]
