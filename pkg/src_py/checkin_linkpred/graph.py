"""The bipartite user-venue multigraph. Every check-in is a multilink;
the graph keeps per-pair check-in counts and times, transposed
adjacency on both sides, and the venue metadata needed by the
metadata-aware predictors.

Node ids are interned to dense integer indexes, always in sorted id
order, so that two graphs with the same content are indexed the same
way no matter how they were constructed. External interfaces always
take and return the original string ids.
"""
from __future__ import annotations

import hashlib
import itertools
import logging
import threading
from collections.abc import Iterable
from collections.abc import Iterator
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from enum import StrEnum
from pathlib import Path
from typing import Annotated
from typing import Any

import networkx as nx
import numpy as np
from docnote import Note

from checkin_linkpred._matrices import get_matrices
from checkin_linkpred.checkins import CheckIn
from checkin_linkpred.checkins import format_timestamp
from checkin_linkpred.exceptions import PairNotPresent
from checkin_linkpred.exceptions import UnknownUser
from checkin_linkpred.exceptions import UnknownVenue

logger = logging.getLogger(__name__)

_GRAPH_TOKENS = itertools.count()

_EDGE_LIST_HEADER = '\t'.join((
    'user', 'venue', 'count', 'category', 'latitude', 'longitude',
    'timestamps'))


class DegreeKind(StrEnum):
    BINARY = 'binary'
    WEIGHTED = 'weighted'


@dataclass(slots=True, frozen=True)
class VenueMeta:
    category: str | None
    latitude: float | None
    longitude: float | None

    @property
    def has_category(self) -> bool:
        return bool(self.category)

    @property
    def has_location(self) -> bool:
        return self.latitude is not None and self.longitude is not None


@dataclass(slots=True, frozen=True)
class DegreeView:
    """A live, read-only view onto the degrees of one side of the
    graph. Because it wraps the graph's own adjacency, it reflects any
    later ``remove_pair`` / ``restore_pair``.
    """
    adjacency: Sequence[Mapping[int, int]] = field(repr=False)
    index: Mapping[str, int] = field(repr=False)
    unknown_exc: type[LookupError] = field(repr=False)

    def _lookup(self, node: str) -> Mapping[int, int]:
        try:
            return self.adjacency[self.index[node]]
        except KeyError:
            raise self.unknown_exc(node) from None

    def binary_degree(self, node: str) -> int:
        """The number of distinct neighbors."""
        return len(self._lookup(node))

    def weighted_degree(self, node: str) -> int:
        """The sum of multiplicities (ie, the check-in count)."""
        return sum(self._lookup(node).values())

    def binary_degrees(self) -> np.ndarray:
        return np.fromiter(
            (len(neighbors) for neighbors in self.adjacency),
            dtype=np.int64,
            count=len(self.adjacency))

    def weighted_degrees(self) -> np.ndarray:
        return np.fromiter(
            (sum(neighbors.values()) for neighbors in self.adjacency),
            dtype=np.int64,
            count=len(self.adjacency))

    def degrees(self, kind: DegreeKind) -> np.ndarray:
        if kind is DegreeKind.BINARY:
            return self.binary_degrees()
        return self.weighted_degrees()


@dataclass(slots=True, frozen=True)
class RemovalRecord:
    """Everything ``restore_pair`` needs to exactly undo a
    ``remove_pair``.
    """
    user: str
    venue: str
    count: int
    timestamps: tuple[float, ...]
    graph_token: int = field(repr=False)


@dataclass(slots=True)
class BipartiteGraph:
    """Graphs are safe for any number of concurrent readers. Mutation
    (``remove_pair`` / ``restore_pair``) requires exclusive access;
    workers that need to mutate concurrently should each work on their
    own ``copy()``.

    Equality is structural: two graphs compare equal when their node
    sets, multilinks, check-in times and venue metadata are equal.
    """
    users: list[str]
    venues: list[str]
    user_index: dict[str, int] = field(repr=False)
    venue_index: dict[str, int] = field(repr=False)
    pair_counts: Annotated[
            dict[tuple[int, int], int],
            Note('Keyed by ``(user_idx, venue_idx)``; every value >= 1.')
        ] = field(repr=False)
    user_adjacency: Annotated[
            list[dict[int, int]],
            Note('Per user: ``{venue_idx: count}``.')
        ] = field(repr=False)
    venue_adjacency: Annotated[
            list[dict[int, int]],
            Note('Per venue: ``{user_idx: count}``.')
        ] = field(repr=False)
    venue_meta: dict[int, VenueMeta] = field(repr=False)
    checkin_times: Annotated[
            dict[tuple[int, int], list[float]],
            Note('''Same keys as ``pair_counts``; each list has exactly
                ``pair_counts[key]`` timestamps.''')
        ] = field(repr=False)

    version: Annotated[
            int,
            Note('''Bumped on every mutation. Derived state (for example the
                sparse matrices used for scoring) is cached against it.''')
        ] = field(default=0, compare=False, repr=False)
    derived_cache: dict[str, Any] = field(
        default_factory=dict, compare=False, repr=False)
    cache_lock: threading.Lock = field(
        default_factory=threading.Lock, compare=False, repr=False)
    token: Annotated[
            int,
            Note('''Unique per instance for the life of the process (copies get
                a fresh one). Ties removal records to the graph that made
                them.''')
        ] = field(
            default_factory=lambda: next(_GRAPH_TOKENS),
            compare=False,
            repr=False)

    @classmethod
    def from_records(
            cls,
            *,
            users: Iterable[str],
            venues: Iterable[str],
            pair_times: Annotated[
                    Mapping[tuple[str, str], Sequence[float]],
                    Note('``{(user_id, venue_id): [timestamp, ...]}``')],
            venue_meta: Mapping[str, VenueMeta],
            ) -> BipartiteGraph:
        """Assembles a graph in canonical (sorted id) index order. Every
        user and venue referenced by ``pair_times`` is added to the node
        sets even if missing from ``users`` / ``venues``.
        """
        user_ids = set(users)
        venue_ids = set(venues)
        for user_id, venue_id in pair_times:
            user_ids.add(user_id)
            venue_ids.add(venue_id)

        sorted_users = sorted(user_ids)
        sorted_venues = sorted(venue_ids)
        user_index = {
            user_id: idx for idx, user_id in enumerate(sorted_users)}
        venue_index = {
            venue_id: idx for idx, venue_id in enumerate(sorted_venues)}

        pair_counts: dict[tuple[int, int], int] = {}
        checkin_times: dict[tuple[int, int], list[float]] = {}
        user_adjacency: list[dict[int, int]] = [{} for _ in sorted_users]
        venue_adjacency: list[dict[int, int]] = [{} for _ in sorted_venues]
        # Sorting here makes the adjacency insertion order canonical too,
        # which keeps iteration (and therefore float summation) order
        # stable across construction paths.
        for (user_id, venue_id), times in sorted(pair_times.items()):
            if not times:
                continue
            key = (user_index[user_id], venue_index[venue_id])
            count = len(times)
            pair_counts[key] = count
            checkin_times[key] = list(times)
            user_adjacency[key[0]][key[1]] = count
            venue_adjacency[key[1]][key[0]] = count

        meta = {
            venue_index[venue_id]: venue_meta_obj
            for venue_id, venue_meta_obj in venue_meta.items()
            if venue_id in venue_index}

        return cls(
            users=sorted_users,
            venues=sorted_venues,
            user_index=user_index,
            venue_index=venue_index,
            pair_counts=pair_counts,
            user_adjacency=user_adjacency,
            venue_adjacency=venue_adjacency,
            venue_meta=meta,
            checkin_times=checkin_times)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_venues(self) -> int:
        return len(self.venues)

    @property
    def n_pairs(self) -> int:
        """The number of distinct connected user-venue pairs."""
        return len(self.pair_counts)

    @property
    def n_checkins(self) -> int:
        return sum(self.pair_counts.values())

    @property
    def user_degrees(self) -> DegreeView:
        return DegreeView(self.user_adjacency, self.user_index, UnknownUser)

    @property
    def venue_degrees(self) -> DegreeView:
        return DegreeView(
            self.venue_adjacency, self.venue_index, UnknownVenue)

    def user_idx(self, user: str) -> int:
        try:
            return self.user_index[user]
        except KeyError:
            raise UnknownUser(user) from None

    def venue_idx(self, venue: str) -> int:
        try:
            return self.venue_index[venue]
        except KeyError:
            raise UnknownVenue(venue) from None

    def has_pair(self, user: str, venue: str) -> bool:
        user_idx = self.user_index.get(user)
        venue_idx = self.venue_index.get(venue)
        if user_idx is None or venue_idx is None:
            return False
        return (user_idx, venue_idx) in self.pair_counts

    def pair_count(self, user: str, venue: str) -> int:
        """Returns the number of check-ins between the pair; 0 if they
        are unconnected.
        """
        return self.pair_counts.get(
            (self.user_idx(user), self.venue_idx(venue)), 0)

    def iter_pairs(self) -> Iterator[tuple[str, str, int]]:
        """Yields ``(user_id, venue_id, count)`` for every connected
        pair, in index (and therefore sorted id) order.
        """
        for user_idx, neighbors in enumerate(self.user_adjacency):
            user_id = self.users[user_idx]
            for venue_idx in sorted(neighbors):
                yield user_id, self.venues[venue_idx], neighbors[venue_idx]

    def venues_of(self, user: str) -> dict[str, int]:
        return {
            self.venues[venue_idx]: count
            for venue_idx, count
            in self.user_adjacency[self.user_idx(user)].items()}

    def users_of(self, venue: str) -> dict[str, int]:
        return {
            self.users[user_idx]: count
            for user_idx, count
            in self.venue_adjacency[self.venue_idx(venue)].items()}

    def meta_of(self, venue: str) -> VenueMeta | None:
        return self.venue_meta.get(self.venue_idx(venue))

    def copy(self) -> BipartiteGraph:
        """A deep copy of all graph state. Caches are not copied."""
        return BipartiteGraph(
            users=list(self.users),
            venues=list(self.venues),
            user_index=dict(self.user_index),
            venue_index=dict(self.venue_index),
            pair_counts=dict(self.pair_counts),
            user_adjacency=[dict(adj) for adj in self.user_adjacency],
            venue_adjacency=[dict(adj) for adj in self.venue_adjacency],
            venue_meta=dict(self.venue_meta),
            checkin_times={
                key: list(times) for key, times in self.checkin_times.items()})

    def remove_pair(self, user: str, venue: str) -> RemovalRecord:
        """Removes every multilink between the pair. Raises
        ``PairNotPresent`` if the pair has no check-ins.
        """
        key = (self.user_idx(user), self.venue_idx(venue))
        try:
            count = self.pair_counts.pop(key)
        except KeyError:
            raise PairNotPresent(user, venue) from None

        times = self.checkin_times.pop(key)
        del self.user_adjacency[key[0]][key[1]]
        del self.venue_adjacency[key[1]][key[0]]
        self.version += 1
        return RemovalRecord(
            user=user,
            venue=venue,
            count=count,
            timestamps=tuple(times),
            graph_token=self.token)

    def restore_pair(self, record: RemovalRecord) -> None:
        """Exactly inverts the ``remove_pair`` that produced the
        record.
        """
        if record.graph_token != self.token:
            raise ValueError(
                'Removal record belongs to a different graph!', record)

        key = (self.user_idx(record.user), self.venue_idx(record.venue))
        if key in self.pair_counts:
            raise ValueError(
                'Cannot restore a pair that is already present!', record)

        self.pair_counts[key] = record.count
        self.checkin_times[key] = list(record.timestamps)
        self.user_adjacency[key[0]][key[1]] = record.count
        self.venue_adjacency[key[1]][key[0]] = record.count
        self.version += 1

    def checksum(self) -> str:
        """SHA-256 over the canonical edge-list rendering of the graph.
        Changes iff the graph content changes.
        """
        digest = hashlib.sha256()
        for line in iter_edge_list_lines(self):
            digest.update(line.encode('utf-8'))
            digest.update(b'\n')
        return digest.hexdigest()


@dataclass(slots=True, frozen=True)
class FilterReport:
    """Node and edge counts through the venue filtering pipeline.
    Removal fractions are relative to the distinct pairs of the input
    graph.
    """
    min_degree: int
    dominance: float
    degree_kind: DegreeKind
    venues_before: int
    venues_after_degree: int
    venues_after_dominance: int
    pairs_before: int
    pairs_after_degree: int
    pairs_after_dominance: int
    checkins_before: int
    checkins_after: int
    n_users: int

    @property
    def degree_removed_fraction(self) -> float:
        if not self.pairs_before:
            return 0.0
        return (
            (self.pairs_before - self.pairs_after_degree)
            / self.pairs_before)

    @property
    def dominance_removed_fraction(self) -> float:
        if not self.pairs_before:
            return 0.0
        return (
            (self.pairs_after_degree - self.pairs_after_dominance)
            / self.pairs_before)

    def to_dict(self) -> dict[str, Any]:
        return {
            'min_degree': self.min_degree,
            'dominance': self.dominance,
            'degree_kind': str(self.degree_kind),
            'venues_before': self.venues_before,
            'venues_after_degree': self.venues_after_degree,
            'venues_after_dominance': self.venues_after_dominance,
            'pairs_before': self.pairs_before,
            'pairs_after_degree': self.pairs_after_degree,
            'pairs_after_dominance': self.pairs_after_dominance,
            'checkins_before': self.checkins_before,
            'checkins_after': self.checkins_after,
            'n_users': self.n_users,
            'degree_removed_fraction': self.degree_removed_fraction,
            'dominance_removed_fraction': self.dominance_removed_fraction,
        }


def build_graph(checkins: Iterable[CheckIn]) -> BipartiteGraph:
    """Every check-in becomes one multilink. Venue metadata is taken
    from the last check-in seen for each venue.
    """
    pair_times: dict[tuple[str, str], list[float]] = {}
    venue_meta: dict[str, VenueMeta] = {}
    for checkin in checkins:
        pair_times.setdefault(
            (checkin.user_id, checkin.venue_id), []
        ).append(checkin.timestamp)
        venue_meta[checkin.venue_id] = VenueMeta(
            category=checkin.category or None,
            latitude=checkin.latitude,
            longitude=checkin.longitude)

    graph = BipartiteGraph.from_records(
        users=(), venues=(), pair_times=pair_times, venue_meta=venue_meta)
    logger.info(
        'Built graph: %s users, %s venues, %s pairs, %s check-ins',
        graph.n_users, graph.n_venues, graph.n_pairs, graph.n_checkins)
    return graph


def _keep_venues(g: BipartiteGraph, keep: Iterable[int]) -> BipartiteGraph:
    """Returns a new graph with all users but only the passed venue
    indexes (and all of their edges).
    """
    kept = set(keep)
    pair_times = {
        (g.users[user_idx], g.venues[venue_idx]): times
        for (user_idx, venue_idx), times in g.checkin_times.items()
        if venue_idx in kept}
    return BipartiteGraph.from_records(
        users=g.users,
        venues=(g.venues[venue_idx] for venue_idx in kept),
        pair_times=pair_times,
        venue_meta={
            g.venues[venue_idx]: meta
            for venue_idx, meta in g.venue_meta.items()
            if venue_idx in kept})


def filter_low_degree_venues(
        g: BipartiteGraph,
        min_degree: int,
        *,
        degree_kind: Annotated[
                DegreeKind,
                Note('''Which degree the threshold applies to. Weighted
                    (check-in count) by default.''')
            ] = DegreeKind.WEIGHTED
        ) -> BipartiteGraph:
    """Keeps exactly the venues whose degree is at least ``min_degree``
    along with all of their edges. Users are never removed, even if
    they are left without edges, and the filter does not cascade.
    """
    if min_degree < 0:
        raise ValueError('min_degree must be >= 0', min_degree)

    degrees = g.venue_degrees.degrees(DegreeKind(degree_kind))
    keep = np.flatnonzero(degrees >= min_degree).tolist()
    return _keep_venues(g, keep)


def filter_dominated_venues(
        g: BipartiteGraph,
        dominance: float
        ) -> BipartiteGraph:
    """Removes every venue where a single user accounts for at least
    ``dominance`` of its check-ins. Venues without any check-ins have
    no dominant user and are kept.
    """
    if not 0 < dominance <= 1:
        raise ValueError('dominance must be in (0, 1]', dominance)

    keep: list[int] = []
    for venue_idx, neighbors in enumerate(g.venue_adjacency):
        if neighbors:
            top_share = max(neighbors.values()) / sum(neighbors.values())
            if top_share >= dominance:
                continue
        keep.append(venue_idx)

    return _keep_venues(g, keep)


def filter_graph(
        g: BipartiteGraph,
        *,
        min_degree: int = 20,
        dominance: float = 0.9,
        degree_kind: DegreeKind = DegreeKind.WEIGHTED
        ) -> tuple[BipartiteGraph, FilterReport]:
    """The preprocessing pipeline: degree filter first, then the
    dominance filter.
    """
    by_degree = filter_low_degree_venues(
        g, min_degree, degree_kind=degree_kind)
    by_dominance = filter_dominated_venues(by_degree, dominance)
    report = FilterReport(
        min_degree=min_degree,
        dominance=dominance,
        degree_kind=DegreeKind(degree_kind),
        venues_before=g.n_venues,
        venues_after_degree=by_degree.n_venues,
        venues_after_dominance=by_dominance.n_venues,
        pairs_before=g.n_pairs,
        pairs_after_degree=by_degree.n_pairs,
        pairs_after_dominance=by_dominance.n_pairs,
        checkins_before=g.n_checkins,
        checkins_after=by_dominance.n_checkins,
        n_users=by_dominance.n_users)
    logger.info(
        'Filtered graph: %s venues, %s check-ins (%.1f%% + %.1f%% of pairs '
        + 'removed)',
        report.venues_after_dominance,
        report.checkins_after,
        100 * report.degree_removed_fraction,
        100 * report.dominance_removed_fraction)
    return by_dominance, report


def project_users(g: BipartiteGraph) -> nx.Graph:
    """The weighted one-mode projection onto users: users are linked
    iff they share at least one venue, weighted by the number of
    distinct shared venues. Every user is a node, linked or not.
    """
    incidence = get_matrices(g).a_bin
    co_occurrence = (incidence @ incidence.T).tocoo()

    projection = nx.Graph()
    projection.add_nodes_from(g.users)
    for row, col, weight in zip(
            co_occurrence.row, co_occurrence.col, co_occurrence.data,
            strict=True):
        if row < col:
            projection.add_edge(
                g.users[row], g.users[col], weight=int(round(weight)))

    return projection


def remove_pair(g: BipartiteGraph, u: str, v: str) -> RemovalRecord:
    return g.remove_pair(u, v)


def restore_pair(g: BipartiteGraph, record: RemovalRecord) -> None:
    g.restore_pair(record)


def _format_optional_float(value: float | None) -> str:
    return '' if value is None else repr(value)


def _parse_optional_float(raw: str) -> float | None:
    return float(raw) if raw else None


def iter_edge_list_lines(g: BipartiteGraph) -> Iterator[str]:
    """Renders the graph as edge-list lines (no newlines). Rows with a
    count of 0 declare nodes without edges: an empty venue column
    marks an isolated user, an empty user column an isolated venue.
    """
    yield '# ' + _EDGE_LIST_HEADER

    for user_idx, neighbors in enumerate(g.user_adjacency):
        user_id = g.users[user_idx]
        if not neighbors:
            yield f'{user_id}\t\t0\t\t\t\t'
            continue

        for venue_idx in sorted(neighbors):
            meta = g.venue_meta.get(venue_idx, VenueMeta(None, None, None))
            times = ','.join(
                format_timestamp(timestamp)
                for timestamp in g.checkin_times[(user_idx, venue_idx)])
            yield '\t'.join((
                user_id,
                g.venues[venue_idx],
                str(neighbors[venue_idx]),
                meta.category or '',
                _format_optional_float(meta.latitude),
                _format_optional_float(meta.longitude),
                times))

    for venue_idx, neighbors in enumerate(g.venue_adjacency):
        if neighbors:
            continue
        meta = g.venue_meta.get(venue_idx, VenueMeta(None, None, None))
        yield '\t'.join((
            '',
            g.venues[venue_idx],
            '0',
            meta.category or '',
            _format_optional_float(meta.latitude),
            _format_optional_float(meta.longitude),
            ''))


def write_edge_list(g: BipartiteGraph, path: str | Path) -> None:
    with Path(path).open('w', encoding='utf-8', newline='') as tsv_file:
        for line in iter_edge_list_lines(g):
            tsv_file.write(line)
            tsv_file.write('\n')


def read_edge_list(path: str | Path) -> BipartiteGraph:
    """Loads a graph written by ``write_edge_list``."""
    users: list[str] = []
    venues: list[str] = []
    pair_times: dict[tuple[str, str], list[float]] = {}
    venue_meta: dict[str, VenueMeta] = {}

    with Path(path).open(encoding='utf-8') as tsv_file:
        for line_number, line in enumerate(tsv_file, start=1):
            line = line.rstrip('\r\n')  # noqa: PLW2901
            if not line or line.startswith('#'):
                continue

            columns = line.split('\t')
            if len(columns) != 7:  # noqa: PLR2004
                raise ValueError(
                    'Edge list rows need 7 columns', path, line_number)
            user_id, venue_id, count, category, lat, lon, times = columns

            if user_id:
                users.append(user_id)
            if not venue_id:
                continue

            venues.append(venue_id)
            venue_meta[venue_id] = VenueMeta(
                category=category or None,
                latitude=_parse_optional_float(lat),
                longitude=_parse_optional_float(lon))

            if user_id and int(count):
                timestamps = [float(raw) for raw in times.split(',')]
                if len(timestamps) != int(count):
                    raise ValueError(
                        'Timestamp count does not match pair count',
                        path, line_number)
                pair_times[(user_id, venue_id)] = timestamps

    return BipartiteGraph.from_records(
        users=users,
        venues=venues,
        pair_times=pair_times,
        venue_meta=venue_meta)
