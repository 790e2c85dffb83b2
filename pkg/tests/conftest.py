import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def shapes_dataset():
    from ssce.data import make_shapes

    return make_shapes(n_per_class=12, resolution=16, seed=3)


@pytest.fixture(scope="session")
def toy_data_dir(tmp_path_factory):
    """The bundled procedural toy dataset written as PNG files (3 classes x 40, 32px)."""
    from ssce.data import make_shapes, write_dataset

    root = tmp_path_factory.mktemp("toy") / "data"
    write_dataset(make_shapes(40, 32, 0), root)
    return root


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
