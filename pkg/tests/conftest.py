import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rel_error(got: np.ndarray, want: np.ndarray) -> float:
    denom = np.linalg.norm(want)
    if denom == 0.0:
        return float(np.linalg.norm(got - want))
    return float(np.linalg.norm(got - want) / denom)
