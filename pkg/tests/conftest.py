import os
import pathlib
import sys

import pytest


ROOT_DIR = os.path.dirname(os.path.dirname(__file__))
SRC_DIR = os.path.join(ROOT_DIR, "src")
CIRCUITS_DIR = os.path.join(ROOT_DIR, "circuits")


if SRC_DIR in sys.path:
    sys.path.remove(SRC_DIR)
sys.path.insert(0, SRC_DIR)


loaded = sys.modules.get("purikit")
if loaded is not None:
    loaded_from = getattr(loaded, "__file__", "") or ""
    expected_prefix = os.path.join(SRC_DIR, "purikit")
    if not os.path.abspath(loaded_from).startswith(os.path.abspath(expected_prefix)):
        for module_name in list(sys.modules):
            if module_name == "purikit" or module_name.startswith("purikit."):
                sys.modules.pop(module_name, None)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance runs (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def circuits_dir():
    return pathlib.Path(CIRCUITS_DIR)
