import numpy as np
import pytest

from relfb.config import TINY_OVERRIDES
from relfb.dataio import gen_synthetic


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory):
    """Six classes x 5 clips of 0.25 s, one clip per fold per class."""
    root = tmp_path_factory.mktemp("tiny_data")
    gen_synthetic(root, seed=0, n_per_class=5, dur=0.25)
    return root


def write_config(path, manifest, **extra):
    lines = [f"{k}={v}" for k, v in TINY_OVERRIDES.items()]
    lines += [f"data.manifest={manifest}", "optimizer.epochs=2", "optimizer.batch_size=8",
              "schedule.t0_epochs=2"]
    lines += [f"{k.replace('__', '.')}={v}" for k, v in extra.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def tiny_config_file(tmp_path, tiny_data):
    return write_config(tmp_path / "tiny.cfg", tiny_data / "manifest.csv")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, _, _ in mod.CRITERIA:
        if name in mod.RESULTS:
            terminalreporter.write_line(mod.format_line(name, *mod.RESULTS[name]))
