"""Link-prediction scorers for user-venue pairs: the global ranking
method, assortativity, collaborative filtering on Adamic-Adar user
similarity, network-based inference (NBI) and its derived variants, and
the two metadata baselines.

Every method computes a full ``ScoreVector`` (one score per venue) for
a querying user, because that's what the evaluator reuses across all
pairs of a user. The pair-level functions are thin lookups on top.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from collections.abc import Collection
from collections.abc import Mapping
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields as dc_fields
from dataclasses import replace as dc_replace
from enum import StrEnum
from typing import Annotated
from typing import Any

import numpy as np
from docnote import Note

from checkin_linkpred._flow import run_flow
from checkin_linkpred._flow import spread_to_venues
from checkin_linkpred._geo import MAX_DISTANCE_KM
from checkin_linkpred._geo import haversine_km
from checkin_linkpred._matrices import GraphMatrices
from checkin_linkpred._matrices import get_checkin_arrays
from checkin_linkpred._matrices import get_matrices
from checkin_linkpred.checkins import TimeWindow
from checkin_linkpred.exceptions import InvalidConfig
from checkin_linkpred.exceptions import IsolatedUser
from checkin_linkpred.exceptions import MissingVenueMeta
from checkin_linkpred.exceptions import UnknownVenue
from checkin_linkpred.graph import BipartiteGraph

logger = logging.getLogger(__name__)

DEFAULT_TAU_SECONDS = 30 * 24 * 60 * 60.0


class Method(StrEnum):
    GRM = 'grm'
    ASSORT = 'assort'
    CF = 'cf'
    NBI = 'nbi'
    NBI_MOD = 'nbi_mod'
    NBI_US = 'nbi_us'
    NBI_MULTISTEP = 'nbi_multistep'
    NBI_TIME = 'nbi_time'
    LOC_BASELINE = 'loc_baseline'
    TYPE_BASELINE = 'type_baseline'


class Adjacency(StrEnum):
    BINARY = 'binary'
    WEIGHTED = 'weighted'


class UsPlacement(StrEnum):
    POST_SPREAD = 'post_spread'
    PRE_SPREAD = 'pre_spread'


_NONNEGATIVE_WEIGHTS = ('alpha', 'beta', 'gamma', 'delta', 'epsilon')


@dataclass(slots=True, frozen=True, kw_only=True)
class PredictorConfig:
    """A named, configured scoring method. Parameters that a method
    doesn't use are simply ignored by it.
    """
    method: Method
    adjacency: Annotated[
            Adjacency,
            Note('''Binary adjacency splits resource (and counts shared
                venues) per distinct pair; weighted adjacency uses
                check-in counts instead.''')
        ] = Adjacency.BINARY
    steps: Annotated[
            int,
            Note('Rounds of flow for ``nbi_multistep``.')
        ] = 1
    alpha: Annotated[
            float,
            Note('Venue type weight (``nbi_mod``).')
        ] = 1.0
    beta: Annotated[
            float,
            Note('Location weight (``nbi_mod``).')
        ] = 1.0
    gamma: Annotated[
            float,
            Note('Venue degree weight (``nbi_mod``).')
        ] = 1.0
    delta: Annotated[
            float,
            Note('User similarity seed weight (``nbi_us``).')
        ] = 1.0
    epsilon: Annotated[
            float,
            Note('Trendiness weight (``nbi_time``).')
        ] = 1.0
    d0: Annotated[
            float,
            Note('Location decay scale in kilometers (``nbi_mod``).')
        ] = 10.0
    tau: Annotated[
            float,
            Note('''Trendiness half-window in seconds (``nbi_time``): a
                check-in counts as trendy if it falls within ``tau`` of
                the evaluation window.''')
        ] = DEFAULT_TAU_SECONDS
    us_placement: Annotated[
            UsPlacement,
            Note('''Where ``nbi_us`` injects the similarity seed: added to
                the user resources after the venue-to-user step
                (``post_spread``), or pushed through one user-to-venue
                step and added to the initial venue resource
                (``pre_spread``).''')
        ] = UsPlacement.POST_SPREAD
    label: Annotated[
            str | None,
            Note('''Display name for reports. Defaults to the method name,
                decorated with any non-default adjacency or step count.''')
        ] = None

    def __post_init__(self):
        for name, enum_cls in (
            ('method', Method),
            ('adjacency', Adjacency),
            ('us_placement', UsPlacement),
        ):
            try:
                # Doing it this way to bypass the frozen-ness
                object.__setattr__(
                    self, name, enum_cls(getattr(self, name)))
            except ValueError as exc:
                raise InvalidConfig(
                    f'Unknown {name}', getattr(self, name)) from exc

        if (
            isinstance(self.steps, bool)
            or not isinstance(self.steps, int)
            or self.steps < 1
        ):
            raise InvalidConfig('steps must be an integer >= 1', self.steps)

        for name in _NONNEGATIVE_WEIGHTS:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidConfig(f'{name} must be finite and >= 0', value)

        if not self.d0 > 0 or not math.isfinite(self.d0):
            raise InvalidConfig('d0 must be > 0', self.d0)
        if not self.tau > 0 or not math.isfinite(self.tau):
            raise InvalidConfig('tau must be > 0', self.tau)

    @property
    def weighted(self) -> bool:
        return self.adjacency is Adjacency.WEIGHTED

    @property
    def name(self) -> str:
        if self.label is not None:
            return self.label

        name = str(self.method)
        if self.method is Method.NBI_MULTISTEP:
            name = f'{name}-{self.steps}'
        if self.weighted:
            name = f'{name}-weighted'
        return name

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> PredictorConfig:
        known = {field_obj.name for field_obj in dc_fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise InvalidConfig('Unknown predictor keys', sorted(unknown))
        if 'method' not in mapping:
            raise InvalidConfig('Predictor needs a method', dict(mapping))

        try:
            return cls(**mapping)
        except TypeError as exc:
            raise InvalidConfig('Bad predictor config', mapping) from exc

    def to_dict(self) -> dict[str, Any]:
        retval: dict[str, Any] = {}
        for field_obj in dc_fields(self):
            value = getattr(self, field_obj.name)
            retval[field_obj.name] = (
                str(value) if isinstance(value, StrEnum) else value)
        return retval


@dataclass(slots=True, frozen=True, eq=False)
class ScoreVector:
    """Scores of every venue of the graph for one user. Venues already
    connected to the user are scored like any other; callers that rank
    for recommendations should exclude them (see ``top_k``).
    """
    user: str
    values: np.ndarray = field(repr=False)
    venues: Sequence[str] = field(repr=False)
    venue_index: Mapping[str, int] = field(repr=False)
    method: PredictorConfig

    def __getitem__(self, venue: str) -> float:
        try:
            return float(self.values[self.venue_index[venue]])
        except KeyError:
            raise UnknownVenue(venue) from None

    def __len__(self) -> int:
        return len(self.venues)

    @property
    def scores(self) -> dict[str, float]:
        return {
            venue: float(value)
            for venue, value in zip(self.venues, self.values, strict=True)}

    def top_k(
            self,
            k: int,
            *,
            exclude: Annotated[
                    Collection[str],
                    Note('''Venue ids to leave out of the ranking,
                        typically the user's known venues.''')
                ] = ()
            ) -> list[tuple[str, float]]:
        """The ``k`` best-scored venues, best first. Ties are broken by
        venue id so the ranking is deterministic.
        """
        excluded = {
            self.venue_index[venue] for venue in exclude
            if venue in self.venue_index}
        # Venues are stored in sorted id order, so a stable sort on the
        # negated scores breaks ties by id.
        order = np.argsort(-self.values, kind='stable')
        retval: list[tuple[str, float]] = []
        for venue_idx in order:
            if len(retval) >= k:
                break
            if int(venue_idx) in excluded:
                continue
            retval.append(
                (self.venues[venue_idx], float(self.values[venue_idx])))
        return retval


@dataclass(slots=True, frozen=True)
class _ScoringInput:
    graph: BipartiteGraph
    matrices: GraphMatrices
    user_idx: int
    config: PredictorConfig
    window: TimeWindow | None


type _VectorScorer = Callable[[_ScoringInput], np.ndarray]
_vector_scorers: dict[Method, _VectorScorer] = {}
def _vector_scorer(
        method: Method
        ) -> Callable[[_VectorScorer], _VectorScorer]:
    """Second-order decorator for registering the vector scorer of a
    method.
    """
    def decorator(func: _VectorScorer) -> _VectorScorer:
        _vector_scorers[method] = func
        return func

    return decorator


def _dense_row(
        matrices: GraphMatrices,
        user_idx: int,
        *,
        weighted: bool
        ) -> np.ndarray:
    incidence = matrices.incidence(weighted)
    start = incidence.indptr[user_idx]
    stop = incidence.indptr[user_idx + 1]
    row = np.zeros(matrices.n_venues, dtype=np.float64)
    row[incidence.indices[start:stop]] = incidence.data[start:stop]
    return row


def _require_venues(scoring: _ScoringInput) -> None:
    if not scoring.matrices.user_bin_deg[scoring.user_idx]:
        raise IsolatedUser(scoring.graph.users[scoring.user_idx])


def _inverse_log(degrees: np.ndarray) -> np.ndarray:
    """``1 / ln(degree)``, with 0 wherever the degree is <= 1."""
    return np.divide(
        1.0,
        np.log(np.maximum(degrees, 1.0)),
        out=np.zeros(degrees.shape, dtype=np.float64),
        where=degrees > 1)


def _similarities(scoring: _ScoringInput) -> np.ndarray:
    """Adamic-Adar similarity of the querying user to every user; the
    entry of the querying user itself is 0.
    """
    matrices = scoring.matrices
    if scoring.config.weighted:
        # sqrt(c1 * c2) per shared venue collapses to the binary index
        # when every count is 1.
        incidence = matrices.a_weighted.sqrt()
        weights = _inverse_log(matrices.venue_w_deg)
        row = np.sqrt(
            _dense_row(matrices, scoring.user_idx, weighted=True))
    else:
        incidence = matrices.a_bin
        weights = _inverse_log(matrices.venue_bin_deg)
        row = _dense_row(matrices, scoring.user_idx, weighted=False)

    similarities = incidence @ (weights * row)
    similarities[scoring.user_idx] = 0.0
    return similarities


def _mean_location(scoring: _ScoringInput) -> tuple[float, float] | None:
    """Multiplicity-weighted arithmetic mean of the user's check-in
    coordinates, over venues with known coordinates.
    """
    matrices = scoring.matrices
    counts = _dense_row(matrices, scoring.user_idx, weighted=True)
    known = ~np.isnan(matrices.venue_lat) & ~np.isnan(matrices.venue_lon)
    weights = np.where(known, counts, 0.0)
    total = weights.sum()
    if not total:
        return None

    return (
        float(np.dot(weights, np.where(known, matrices.venue_lat, 0.0))
              / total),
        float(np.dot(weights, np.where(known, matrices.venue_lon, 0.0))
              / total))


def _distances(scoring: _ScoringInput) -> np.ndarray | None:
    """Kilometers from the user's mean location to every venue, NaN
    for venues without coordinates. None if the user has no location.
    """
    mean_location = _mean_location(scoring)
    if mean_location is None:
        return None

    matrices = scoring.matrices
    return haversine_km(
        mean_location[0],
        mean_location[1],
        matrices.venue_lat,
        matrices.venue_lon)


def _type_fractions(scoring: _ScoringInput) -> np.ndarray | None:
    """For every venue, the fraction of the user's check-ins at venues
    of the same category. NaN for venues without a category; None if
    the user has no check-ins.
    """
    matrices = scoring.matrices
    counts = _dense_row(matrices, scoring.user_idx, weighted=True)
    total = counts.sum()
    if not total:
        return None

    categories = matrices.venue_category
    has_category = categories >= 0
    histogram = np.bincount(
        categories[has_category],
        weights=counts[has_category],
        minlength=matrices.n_categories)
    fractions = np.full(matrices.n_venues, np.nan)
    fractions[has_category] = histogram[categories[has_category]] / total
    return fractions


def _nbi_seed(scoring: _ScoringInput) -> np.ndarray:
    _require_venues(scoring)
    return _dense_row(scoring.matrices, scoring.user_idx, weighted=False)


@_vector_scorer(Method.GRM)
def _score_grm(scoring: _ScoringInput) -> np.ndarray:
    return scoring.matrices.venue_degrees(scoring.config.weighted).copy()


@_vector_scorer(Method.ASSORT)
def _score_assort(scoring: _ScoringInput) -> np.ndarray:
    _require_venues(scoring)
    degrees = scoring.matrices.venue_degrees(scoring.config.weighted)
    row = _dense_row(scoring.matrices, scoring.user_idx, weighted=False)
    mean_degree = np.dot(row, degrees) / row.sum()
    return -np.abs(mean_degree - degrees)


@_vector_scorer(Method.CF)
def _score_cf(scoring: _ScoringInput) -> np.ndarray:
    similarities = _similarities(scoring)
    total = similarities.sum()
    if not total > 0:
        return np.zeros(scoring.matrices.n_venues, dtype=np.float64)

    votes = scoring.matrices.a_bin.T @ similarities
    # Summation order can push a full vote an ulp past the total
    return np.minimum(votes / total, 1.0)


@_vector_scorer(Method.NBI)
def _score_nbi(scoring: _ScoringInput) -> np.ndarray:
    return run_flow(
        scoring.matrices,
        _nbi_seed(scoring),
        rounds=1,
        weighted=scoring.config.weighted)


@_vector_scorer(Method.NBI_MULTISTEP)
def _score_nbi_multistep(scoring: _ScoringInput) -> np.ndarray:
    return run_flow(
        scoring.matrices,
        _nbi_seed(scoring),
        rounds=scoring.config.steps,
        weighted=scoring.config.weighted)


@_vector_scorer(Method.NBI_MOD)
def _score_nbi_mod(scoring: _ScoringInput) -> np.ndarray:
    config = scoring.config
    matrices = scoring.matrices
    scores = _score_nbi(scoring)

    # Missing metadata leaves the corresponding factor at exactly 1.
    type_fractions = _type_fractions(scoring)
    if type_fractions is not None:
        has_type = ~np.isnan(type_fractions)
        type_factor = np.ones(matrices.n_venues)
        type_factor[has_type] = 1.0 + config.alpha * type_fractions[has_type]
        scores = scores * type_factor

    distances = _distances(scoring)
    if distances is not None:
        has_location = ~np.isnan(distances)
        location_factor = np.ones(matrices.n_venues)
        location_factor[has_location] = 1.0 + config.beta * np.exp(
            -distances[has_location] / config.d0)
        scores = scores * location_factor

    degrees = matrices.venue_bin_deg
    max_degree = degrees.max() if degrees.size else 0.0
    if max_degree > 0:
        scores = scores * (1.0 + config.gamma * (degrees / max_degree))

    return scores


@_vector_scorer(Method.NBI_US)
def _score_nbi_us(scoring: _ScoringInput) -> np.ndarray:
    config = scoring.config
    seed = _nbi_seed(scoring)
    similarities = _similarities(scoring)
    total = similarities.sum()
    if not total > 0:
        user_boost = None
    else:
        user_boost = config.delta * similarities / total

    if user_boost is not None and config.us_placement is (
            UsPlacement.PRE_SPREAD):
        seed = seed + spread_to_venues(
            scoring.matrices, user_boost, weighted=config.weighted)
        user_boost = None

    return run_flow(
        scoring.matrices,
        seed,
        rounds=1,
        weighted=config.weighted,
        user_boost=user_boost)


@_vector_scorer(Method.NBI_TIME)
def _score_nbi_time(scoring: _ScoringInput) -> np.ndarray:
    if scoring.window is None:
        raise InvalidConfig(
            'nbi_time needs a time window to score against',
            scoring.config)

    scores = _score_nbi(scoring)
    trend = venue_trendiness(
        scoring.graph, scoring.window, tau=scoring.config.tau)
    return scores * (1.0 + scoring.config.epsilon * trend)


@_vector_scorer(Method.LOC_BASELINE)
def _score_loc_baseline(scoring: _ScoringInput) -> np.ndarray:
    distances = _distances(scoring)
    if distances is None:
        raise IsolatedUser(scoring.graph.users[scoring.user_idx])
    # Venues without coordinates rank below every real venue
    return -np.where(np.isnan(distances), MAX_DISTANCE_KM + 1, distances)


@_vector_scorer(Method.TYPE_BASELINE)
def _score_type_baseline(scoring: _ScoringInput) -> np.ndarray:
    fractions = _type_fractions(scoring)
    if fractions is None:
        raise IsolatedUser(scoring.graph.users[scoring.user_idx])
    return np.where(np.isnan(fractions), 0.0, fractions)


def venue_trendiness(
        g: BipartiteGraph,
        window: TimeWindow,
        *,
        tau: float = DEFAULT_TAU_SECONDS
        ) -> np.ndarray:
    """Per venue, the fraction of its check-ins with a timestamp in
    ``[start - tau, end + tau)``. Venues without check-ins get 0.
    """
    start, end = window
    matrices = get_matrices(g)
    checkin_venue, checkin_time = get_checkin_arrays(g)
    in_window = (checkin_time >= start - tau) & (checkin_time < end + tau)
    counts = np.bincount(
        checkin_venue[in_window], minlength=matrices.n_venues
    ).astype(np.float64)
    return np.divide(
        counts,
        matrices.venue_w_deg,
        out=np.zeros(matrices.n_venues, dtype=np.float64),
        where=matrices.venue_w_deg > 0)


def score_user(
        g: BipartiteGraph,
        user: str,
        config: PredictorConfig,
        *,
        window: Annotated[
                TimeWindow | None,
                Note('Only used (and then required) by ``nbi_time``.')
            ] = None
        ) -> ScoreVector:
    """Scores every venue of the graph for the user under any
    method.
    """
    user_idx = g.user_idx(user)
    scoring = _ScoringInput(
        graph=g,
        matrices=get_matrices(g),
        user_idx=user_idx,
        config=config,
        window=window)
    values = _vector_scorers[config.method](scoring)
    return ScoreVector(
        user=user,
        values=values,
        venues=g.venues,
        venue_index=g.venue_index,
        method=config)


def _as_method(
        config: PredictorConfig | None,
        method: Method
        ) -> PredictorConfig:
    if config is None:
        return PredictorConfig(method=method)
    if config.method is not method:
        return dc_replace(config, method=method)
    return config


def score_grm(g: BipartiteGraph, u: str, v: str) -> float:
    """The binary degree of the venue, whoever is asking."""
    return float(g.venue_degrees.binary_degree(v))


def score_assortativity(g: BipartiteGraph, u: str, v: str) -> float:
    """``-|mean degree of the user's venues - degree of v|``; venues
    with degrees like the ones the user already visits score higher.
    """
    g.venue_idx(v)
    return score_user(g, u, PredictorConfig(method=Method.ASSORT))[v]


def user_similarity_aa(
        g: BipartiteGraph,
        u1: str,
        u2: str,
        *,
        adjacency: Adjacency = Adjacency.BINARY
        ) -> float:
    """Adamic-Adar index of two users: the sum over their common
    venues of ``1 / ln(degree)``, skipping venues of degree <= 1.
    Symmetric.
    """
    if u1 == u2:
        raise ValueError('Similarity needs two distinct users', u1)

    venues1 = g.user_adjacency[g.user_idx(u1)]
    venues2 = g.user_adjacency[g.user_idx(u2)]
    weighted = Adjacency(adjacency) is Adjacency.WEIGHTED
    similarity = 0.0
    for venue_idx in sorted(venues1.keys() & venues2.keys()):
        neighbors = g.venue_adjacency[venue_idx]
        degree = sum(neighbors.values()) if weighted else len(neighbors)
        if degree <= 1:
            continue
        if weighted:
            similarity += math.sqrt(
                venues1[venue_idx] * venues2[venue_idx]) / math.log(degree)
        else:
            similarity += 1 / math.log(degree)

    return similarity


def score_cf(
        g: BipartiteGraph,
        u: str,
        v: str,
        config: PredictorConfig | None = None
        ) -> float:
    """Similarity-weighted share of the other users that checked in at
    the venue, normalized by the user's total similarity. In [0, 1].
    """
    g.venue_idx(v)
    return score_user(g, u, _as_method(config, Method.CF))[v]


def score_nbi(
        g: BipartiteGraph,
        u: str,
        config: PredictorConfig | None = None
        ) -> ScoreVector:
    """Basic NBI: a unit of resource on each of the user's distinct
    venues, one round of venue-to-user-to-venue flow.
    """
    return score_user(g, u, _as_method(config, Method.NBI))


def score_nbi_mod(
        g: BipartiteGraph,
        u: str,
        config: PredictorConfig | None = None
        ) -> ScoreVector:
    """NBI scores scaled by ``(1 + alpha * type fraction)``,
    ``(1 + beta * exp(-distance / d0))`` and
    ``(1 + gamma * degree / max degree)``.
    """
    return score_user(g, u, _as_method(config, Method.NBI_MOD))


def score_nbi_us(
        g: BipartiteGraph,
        u: str,
        config: PredictorConfig | None = None
        ) -> ScoreVector:
    """NBI where every other user also receives ``delta`` times its
    normalized similarity to the querying user as extra resource.
    """
    return score_user(g, u, _as_method(config, Method.NBI_US))


def score_nbi_multistep(
        g: BipartiteGraph,
        u: str,
        config: PredictorConfig | None = None
        ) -> ScoreVector:
    return score_user(g, u, _as_method(config, Method.NBI_MULTISTEP))


def score_nbi_time(
        g: BipartiteGraph,
        u: str,
        window: TimeWindow,
        config: PredictorConfig | None = None
        ) -> ScoreVector:
    """NBI scores scaled by ``(1 + epsilon * trendiness)``, see
    ``venue_trendiness``.
    """
    return score_user(
        g, u, _as_method(config, Method.NBI_TIME), window=window)


def score_loc_baseline(g: BipartiteGraph, u: str, v: str) -> float:
    """Negative haversine distance (km) between the user's mean
    check-in location and the venue.
    """
    meta = g.meta_of(v)
    if meta is None or not meta.has_location:
        raise MissingVenueMeta('Venue has no coordinates', v)
    return score_user(g, u, PredictorConfig(method=Method.LOC_BASELINE))[v]


def score_type_baseline(g: BipartiteGraph, u: str, v: str) -> float:
    """Fraction of the user's check-ins at venues sharing the venue's
    category.
    """
    meta = g.meta_of(v)
    if meta is None or not meta.has_category:
        raise MissingVenueMeta('Venue has no category', v)
    return score_user(
        g, u, PredictorConfig(method=Method.TYPE_BASELINE))[v]
