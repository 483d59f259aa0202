from collections.abc import Generator
from collections.abc import Iterable
from contextlib import contextmanager
from pathlib import Path

from checkin_linkpred.checkins import CheckIn
from checkin_linkpred.checkins import format_checkin_line
from checkin_linkpred.graph import BipartiteGraph


def write_lines(path: Path, lines: Iterable[str]) -> Path:
    """Writes the lines (newline-terminated) and returns the path."""
    with path.open('w', encoding='utf-8', newline='') as text_file:
        for line in lines:
            text_file.write(line)
            text_file.write('\n')
    return path


def write_checkin_file(path: Path, checkins: Iterable[CheckIn]) -> Path:
    """Writes a check-in dump in the default column layout."""
    return write_lines(
        path, (format_checkin_line(checkin) for checkin in checkins))


def assert_graph_invariants(g: BipartiteGraph) -> None:
    """Checks everything a graph must satisfy regardless of how it was
    built or mutated.
    """
    assert set(g.pair_counts) == set(g.checkin_times)
    for (user_idx, venue_idx), count in g.pair_counts.items():
        assert count >= 1
        assert len(g.checkin_times[(user_idx, venue_idx)]) == count
        assert g.user_adjacency[user_idx][venue_idx] == count
        assert g.venue_adjacency[venue_idx][user_idx] == count

    n_user_edges = sum(len(neighbors) for neighbors in g.user_adjacency)
    n_venue_edges = sum(len(neighbors) for neighbors in g.venue_adjacency)
    assert n_user_edges == n_venue_edges == len(g.pair_counts)

    for venue_idx, neighbors in enumerate(g.venue_adjacency):
        if neighbors:
            assert venue_idx in g.venue_meta

    assert g.users == sorted(g.users)
    assert g.venues == sorted(g.venues)


@contextmanager
def unchanged(g: BipartiteGraph) -> Generator[BipartiteGraph, None, None]:
    """Asserts that the graph is structurally identical after the
    block as it was before it.
    """
    snapshot = g.copy()
    yield g
    assert g == snapshot
