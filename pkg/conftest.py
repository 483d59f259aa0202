import os
from pathlib import Path

import pytest

DATASET_ENV_VAR = 'CHECKIN_LINKPRED_DATASET'

_TEST_PHASES: dict[None | str, int] = {
    None: 0,
    'integr8': 1,
    'e2e': 2,
}


def pytest_addoption(parser):
    parser.addoption(
        '--run-e2e',
        action='store_true', default=False,
        help='Run end-to-end tests against a real check-in dump')
    parser.addoption(
        '--run-integr8',
        action='store_true', default=False,
        help='Run integration tests through the command line')
    parser.addoption(
        '--dataset',
        default=None,
        help=f'Check-in dump for e2e tests (default: ${DATASET_ENV_VAR})')


collect_ignore_glob = []


def pytest_configure(config):
    if not config.getoption('--run-e2e'):
        collect_ignore_glob.append('*.e2e.test.py')
    if not config.getoption('--run-integr8'):
        collect_ignore_glob.append('*.integr8.test.py')


@pytest.fixture(scope='session')
def real_dataset(request) -> Path:
    """The real check-in dump the e2e tests run on. Skips when none
    was given, since the dumps are far too big to ship with the repo.
    """
    raw_path = (
        request.config.getoption('--dataset')
        or os.environ.get(DATASET_ENV_VAR))
    if not raw_path:
        pytest.skip(f'No dataset; pass --dataset or set {DATASET_ENV_VAR}')

    path = Path(raw_path)
    if not path.is_file():
        pytest.skip(f'Dataset {path} does not exist')
    return path


def pytest_collection_modifyitems(config, items):
    # Unit tests first, then integr8, then e2e
    items.sort(key=_sort_by_test_phase)


def _sort_by_test_phase(item: pytest.Item):
    """Sorting key that puts the fastest test phases first, based on
    the phase suffix of the test file (``*.integr8.test.py``).
    """
    test_fs_path = item.path
    if test_fs_path is None:
        return _TEST_PHASES[None]

    suffixes = {suffix.lstrip('.') for suffix in test_fs_path.suffixes}
    maybe_phase_name = suffixes.intersection(_TEST_PHASES)

    if maybe_phase_name:
        try:
            phase_name, = maybe_phase_name
        except ValueError as exc:
            exc.add_note(
                'Apparently you have a test file with multiple phases?')
            raise exc

        return _TEST_PHASES[phase_name]

    return _TEST_PHASES[None]
