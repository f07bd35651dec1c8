import numpy as np
import pytest

from choiceleak.data import Dataset


def dataset_1d(values, scores=None):
    feats = np.asarray(values, dtype=float).reshape(-1, 1)
    return Dataset(feats, scores=None if scores is None else np.asarray(scores, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
