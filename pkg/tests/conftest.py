from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scatiris.corpus import SyntheticSpec, synthesize_images  # noqa: E402


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus():
    """4 classes x 4 images at 64x48 with subjects and images in memory."""
    spec = SyntheticSpec(n_classes=4, per_class=4, seed=3)
    return list(synthesize_images(spec))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = sorted(getattr(mod, "RESULTS", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
