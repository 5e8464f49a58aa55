"""MPS layer: canonical forms, amplitudes, merges/splits, serialization."""

import io

import numpy as np
import pytest

from conftest import dense_index, sector_configs
from emorb.mps import MPS, config_sector, product_state, random_mps


def test_config_sector():
    assert config_sector("0ab2") == (4, 0)
    assert config_sector("aa") == (2, 2)
    assert config_sector("") == (0, 0)


def test_product_state_amplitudes():
    m = product_state("a2b0").normalize()
    assert np.isclose(m.amplitude("a2b0"), 1.0)
    assert m.amplitude("2ab0") == 0.0
    assert m.sector == (4, 0)


def test_random_mps_is_normalized_and_canonical(rng):
    m = random_mps(5, (4, 0), 7, rng)
    assert np.isclose(m.norm(), 1.0)
    m.validate()
    assert m.sector == (4, 0)


def test_amplitude_matches_dense(rng):
    m = random_mps(4, (3, 1), 9, rng).normalize()
    dense = m.to_dense().ravel()
    for cfg in sector_configs(4, (3, 1)):
        assert np.isclose(m.amplitude(cfg), dense[dense_index(cfg)])
    # out-of-sector amplitudes vanish
    assert m.amplitude("0000") == 0.0


def test_dense_support_restricted_to_sector(rng):
    m = random_mps(3, (2, 0), 5, rng)
    dense = m.to_dense().ravel()
    allowed = {dense_index(c) for c in sector_configs(3, (2, 0))}
    for i, v in enumerate(dense):
        if i not in allowed:
            assert v == 0.0


def test_center_moves_preserve_state(rng):
    m = random_mps(5, (4, 2), 8, rng)
    ref = m.to_dense()
    for target in (4, 0, 2):
        m = m.move_center(target)
        m.validate()
        assert np.allclose(m.to_dense(), ref, atol=1e-12)


def test_overlap_and_norm(rng):
    a = random_mps(4, (4, 0), 6, rng)
    b = random_mps(4, (4, 0), 6, np.random.default_rng(99))
    ref = float(np.sum(a.to_dense() * b.to_dense()))
    assert np.isclose(a.overlap(b), ref, atol=1e-12)
    assert np.isclose(a.overlap(a), 1.0)


def test_merge_split_round_trip(rng):
    m = random_mps(4, (4, 0), 8, rng).move_center(1)
    theta = m.merge_two_site(1)
    m2, dw = m.split_two_site(1, theta, 10**9)
    assert dw == 0.0
    assert np.isclose(abs(m2.overlap(m)), 1.0)


def test_split_truncation_discards_weight(rng):
    m = random_mps(6, (6, 0), 20, rng).move_center(2)
    theta = m.merge_two_site(2)
    m2, dw = m.split_two_site(2, theta, 2)
    assert 0.0 < dw < 1.0
    assert m2.bond_dims()[2] <= 2
    assert np.isclose(m2.norm(), 1.0)


def test_serialization_round_trip(rng):
    m = random_mps(5, (5, 1), 9, rng)
    buf = io.BytesIO()
    m.dump(buf)
    buf.seek(0)
    m2 = MPS.load(buf)
    assert m2.center == m.center
    assert np.isclose(abs(m2.overlap(m)), 1.0)
    assert m.to_bytes() == m2.to_bytes()


def test_serialization_rejects_junk():
    with pytest.raises(ValueError):
        MPS.load(io.BytesIO(b"not an mps file"))


def test_unreachable_sector_raises(rng):
    with pytest.raises(ValueError):
        random_mps(2, (5, 1), 4, rng)


def test_compress_exact_when_chi_large(rng):
    m = random_mps(5, (4, 0), 8, rng).normalize()
    mc, dw = m.compress(10**9)
    assert dw == 0.0
    assert np.isclose(abs(m.overlap(mc)), 1.0, atol=1e-12)


def test_compress_truncates_and_renormalizes(rng):
    m = random_mps(6, (6, 0), 20, rng).normalize()
    mc, dw = m.compress(4)
    assert mc.max_bond() <= 4
    assert dw > 0.0
    assert np.isclose(mc.norm(), 1.0, atol=1e-12)
    # fidelity degrades no more than the discarded weight suggests
    assert abs(m.overlap(mc)) ** 2 >= 1.0 - 2.0 * dw - 1e-10
