from __future__ import annotations

import sys
from pathlib import Path

import pytest

# Make tests/helpers.py and tests/oracles.py importable as plain modules.
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture()
def rng():
    import numpy as np

    return np.random.default_rng(1234)
