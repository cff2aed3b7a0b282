import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from voltgrid import load_case


@pytest.fixture(scope="session")
def wscc9():
    return load_case("wscc9_augmented")


@pytest.fixture(scope="session")
def ieee24():
    return load_case("ieee24_augmented")


def feasible_draw(net, rng):
    """Random in-range load multipliers with generation following the mean."""
    scale = rng.uniform(0.5, 1.0, size=len(net.loads))
    return net.with_dispatch_scale(float(scale.mean())), scale
