import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semchan.cli import _data  # noqa: E402
from semchan.kb import atom, parse_kb  # noqa: E402
from semchan.kernels import load_channel_config, q_symmetric_channel  # noqa: E402


def _load(name):
    return parse_kb(_data(f"{name}.kb"))


@pytest.fixture(scope="session")
def ps():
    return _load("sender")[1]


@pytest.fixture(scope="session")
def s1():
    return _load("sender")[0]


@pytest.fixture(scope="session")
def r2():
    return _load("receiver2")[0]


@pytest.fixture(scope="session")
def r2p():
    return _load("receiver2prime")[0]


@pytest.fixture(scope="session")
def r3():
    return _load("receiver3")[0]


@pytest.fixture(scope="session")
def w10():
    return q_symmetric_channel(10, 0.1)


@pytest.fixture(scope="session")
def config():
    import json
    return load_channel_config(json.loads(_data("channel.json")))


@pytest.fixture(scope="session")
def data_dir():
    return Path(__file__).resolve().parents[1] / "src" / "semchan" / "data"


def E(x, y):
    return atom("Edge", x, y)


def P(x, y):
    return atom("Path", x, y)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
