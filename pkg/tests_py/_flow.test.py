from __future__ import annotations

import numpy as np
import pytest

from checkin_linkpred._flow import FlowSide
from checkin_linkpred._flow import iter_half_steps
from checkin_linkpred._flow import run_flow
from checkin_linkpred._flow import spread_to_users
from checkin_linkpred._flow import spread_to_venues
from checkin_linkpred._matrices import get_matrices

from checkin_linkpred_testutils.factories import random_graph
from checkin_linkpred_testutils.factories import toy_graph


class TestConservation:

    @pytest.mark.parametrize('weighted', [False, True])
    def test_half_steps_conserve(self, weighted: bool):
        """Resource placed on connected venues must be conserved by
        both half-steps, up to float rounding.
        """
        rng = np.random.default_rng(29)
        for _ in range(200):
            graph = random_graph(rng, density=float(rng.uniform(0.1, 0.8)))
            matrices = get_matrices(graph)
            connected = matrices.venue_bin_deg > 0
            seed = np.where(
                connected, rng.uniform(0, 1, size=matrices.n_venues), 0.0)

            to_users = spread_to_users(matrices, seed, weighted=weighted)
            to_venues = spread_to_venues(
                matrices, to_users, weighted=weighted)

            assert to_users.sum() == pytest.approx(seed.sum(), abs=1e-9)
            assert to_venues.sum() == pytest.approx(seed.sum(), abs=1e-9)

    @pytest.mark.parametrize('weighted', [False, True])
    @pytest.mark.parametrize('rounds', [1, 2, 3, 4])
    def test_every_half_step_conserves(self, rounds: int, weighted: bool):
        """Every half-step of a multi-round flow must carry the full
        seed total, on either side.
        """
        rng = np.random.default_rng(31 + rounds)
        for _ in range(50):
            graph = random_graph(rng, density=float(rng.uniform(0.1, 0.8)))
            matrices = get_matrices(graph)
            seed = np.where(
                matrices.venue_bin_deg > 0,
                rng.uniform(0, 1, size=matrices.n_venues),
                0.0)

            totals = [
                resource.sum() for _, resource in iter_half_steps(
                    matrices, seed, rounds=rounds, weighted=weighted)]

            assert len(totals) == 2 * rounds
            for total in totals:
                assert total == pytest.approx(seed.sum(), abs=1e-9)

    def test_isolated_venue_resource_is_lost(self):
        """Resource on a venue without users has nowhere to go."""
        graph = toy_graph()
        graph.remove_pair('U3', 'V4')
        matrices = get_matrices(graph)
        seed = np.array([0.0, 0.0, 0.0, 1.0])

        assert spread_to_users(matrices, seed, weighted=False).sum() == 0


class TestRunFlow:

    def test_half_step_sides(self):
        """Half-steps must alternate users then venues, once per
        round.
        """
        matrices = get_matrices(toy_graph())
        sides = [
            side for side, _ in iter_half_steps(
                matrices, np.ones(4), rounds=3, weighted=False)]

        assert sides == [FlowSide.USERS, FlowSide.VENUES] * 3

    def test_user_boost_once(self):
        """The user boost must only be added after the first
        venue-to-user half-step.
        """
        matrices = get_matrices(toy_graph())
        boost = np.array([0.0, 0.0, 1.0])
        users = [
            resource for side, resource in iter_half_steps(
                matrices,
                np.zeros(4),
                rounds=2,
                weighted=False,
                user_boost=boost)
            if side is FlowSide.USERS]

        assert users[0].tolist() == [0.0, 0.0, 1.0]
        # U3's unit went to V3 and V4 then back: V3 is shared with U2.
        assert users[1].sum() == pytest.approx(1.0)
        assert users[1][2] == pytest.approx(0.5 / 2 + 0.5)

    def test_zero_rounds(self):
        """Fewer than one round must be rejected."""
        with pytest.raises(ValueError):
            run_flow(
                get_matrices(toy_graph()), np.ones(4), rounds=0,
                weighted=False)
