"""Sparse-matrix snapshots of a ``BipartiteGraph``, used by every
scorer. A snapshot is cached on the graph against its ``version``, so
readers share one snapshot until the next mutation.
"""
from __future__ import annotations

import logging
import typing
from dataclasses import dataclass
from dataclasses import field

import numpy as np
from scipy import sparse

if typing.TYPE_CHECKING:
    from checkin_linkpred.graph import BipartiteGraph

logger = logging.getLogger(__name__)

_CACHE_KEY = 'matrices'


@dataclass(slots=True)
class GraphMatrices:
    """Rows are users, columns are venues, both in the graph's index
    order.
    """
    version: int
    a_bin: sparse.csr_array
    a_weighted: sparse.csr_array
    user_bin_deg: np.ndarray
    user_w_deg: np.ndarray
    venue_bin_deg: np.ndarray
    venue_w_deg: np.ndarray
    venue_lat: np.ndarray = field(repr=False)
    venue_lon: np.ndarray = field(repr=False)
    venue_category: np.ndarray = field(repr=False)
    n_categories: int

    checkin_venue: np.ndarray | None = field(default=None, repr=False)
    checkin_time: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_users(self) -> int:
        return self.a_bin.shape[0]

    @property
    def n_venues(self) -> int:
        return self.a_bin.shape[1]

    def incidence(self, weighted: bool) -> sparse.csr_array:
        return self.a_weighted if weighted else self.a_bin

    def user_degrees(self, weighted: bool) -> np.ndarray:
        return self.user_w_deg if weighted else self.user_bin_deg

    def venue_degrees(self, weighted: bool) -> np.ndarray:
        return self.venue_w_deg if weighted else self.venue_bin_deg


def get_matrices(g: BipartiteGraph) -> GraphMatrices:
    """Returns the (cached) matrices snapshot for the current graph
    version.
    """
    with g.cache_lock:
        cached = g.derived_cache.get(_CACHE_KEY)
        if cached is None or cached.version != g.version:
            cached = g.derived_cache[_CACHE_KEY] = _build_matrices(g)
        return cached


def get_checkin_arrays(g: BipartiteGraph) -> tuple[np.ndarray, np.ndarray]:
    """Flat ``(venue_idx, timestamp)`` arrays over every check-in.
    Computed lazily, since only the time-aware scorers need them.
    """
    matrices = get_matrices(g)
    with g.cache_lock:
        if matrices.checkin_venue is None or matrices.checkin_time is None:
            n_checkins = int(matrices.venue_w_deg.sum())
            venue_arr = np.empty(n_checkins, dtype=np.int64)
            time_arr = np.empty(n_checkins, dtype=np.float64)
            offset = 0
            for (_, venue_idx), times in sorted(g.checkin_times.items()):
                stop = offset + len(times)
                venue_arr[offset:stop] = venue_idx
                time_arr[offset:stop] = times
                offset = stop

            matrices.checkin_venue = venue_arr
            matrices.checkin_time = time_arr

        return matrices.checkin_venue, matrices.checkin_time


def _build_matrices(g: BipartiteGraph) -> GraphMatrices:
    logger.debug('Building matrices for graph version %s', g.version)
    n_users = g.n_users
    n_venues = g.n_venues

    keys = sorted(g.pair_counts)
    rows = np.fromiter(
        (user_idx for user_idx, _ in keys), dtype=np.int64, count=len(keys))
    cols = np.fromiter(
        (venue_idx for _, venue_idx in keys),
        dtype=np.int64,
        count=len(keys))
    counts = np.fromiter(
        (g.pair_counts[key] for key in keys),
        dtype=np.float64,
        count=len(keys))

    a_weighted = sparse.csr_array(
        (counts, (rows, cols)), shape=(n_users, n_venues))
    a_bin = sparse.csr_array(
        (np.ones_like(counts), (rows, cols)), shape=(n_users, n_venues))

    venue_lat = np.full(n_venues, np.nan)
    venue_lon = np.full(n_venues, np.nan)
    venue_category = np.full(n_venues, -1, dtype=np.int64)
    category_codes: dict[str, int] = {}
    for venue_idx, meta in g.venue_meta.items():
        if meta.has_location:
            venue_lat[venue_idx] = meta.latitude
            venue_lon[venue_idx] = meta.longitude
        if meta.category:
            venue_category[venue_idx] = category_codes.setdefault(
                meta.category, len(category_codes))

    return GraphMatrices(
        version=g.version,
        a_bin=a_bin,
        a_weighted=a_weighted,
        user_bin_deg=np.asarray(a_bin.sum(axis=1)).ravel(),
        user_w_deg=np.asarray(a_weighted.sum(axis=1)).ravel(),
        venue_bin_deg=np.asarray(a_bin.sum(axis=0)).ravel(),
        venue_w_deg=np.asarray(a_weighted.sum(axis=0)).ravel(),
        venue_lat=venue_lat,
        venue_lon=venue_lon,
        venue_category=venue_category,
        n_categories=len(category_codes))
