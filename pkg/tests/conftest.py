"""Shared fixtures and enumeration helpers for the test suite."""

from itertools import product

import numpy as np
import pytest

from emorb.mps import ALPHABET, config_sector


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sector_configs(n_orb, sector):
    """All occupation strings of a (n_elec, 2Sz) sector, lexicographic."""
    return [
        "".join(cfg)
        for cfg in product(ALPHABET, repeat=n_orb)
        if config_sector("".join(cfg)) == sector
    ]


def dense_index(config):
    """Flat C-order index of a configuration in the (4,)*K tensor."""
    idx = 0
    for ch in config:
        idx = 4 * idx + ALPHABET.index(ch)
    return idx
