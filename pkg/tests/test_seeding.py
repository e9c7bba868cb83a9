import zlib

import numpy as np
import pytest

from qfm_noise.seeding import MAX_MASTER_SEED, rng_for, seed_sequence


class TestSeedSequence:
    def test_documented_layout(self):
        ss = seed_sequence(7, "coefficients", "sea", 4, 0, 0.03)
        assert ss.entropy == 7
        assert ss.spawn_key == (zlib.crc32(b"coefficients"), zlib.crc32(b"sea"), 4, 0, 30000)

    def test_deterministic(self):
        a = rng_for(3, "expressibility", "hea", 4, 1).uniform(size=5)
        b = rng_for(3, "expressibility", "hea", 4, 1).uniform(size=5)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("other", [
        (4, "expressibility", "hea", 4, 1),
        (3, "entanglement", "hea", 4, 1),
        (3, "expressibility", "sea", 4, 1),
        (3, "expressibility", "hea", 4, 2),
    ])
    def test_distinct_streams(self, other):
        base = rng_for(3, "expressibility", "hea", 4, 1).uniform(size=4)
        assert not np.array_equal(base, rng_for(*other).uniform(size=4))

    def test_order_independent(self):
        # drawing cell B first does not change cell A
        first = rng_for(0, "x", 1).normal(size=3)
        rng_for(0, "x", 2).normal(size=1000)
        np.testing.assert_array_equal(first, rng_for(0, "x", 1).normal(size=3))

    def test_level_keys_do_not_collide(self):
        keys = {seed_sequence(0, "c", lv).spawn_key for lv in (0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03)}
        assert len(keys) == 7

    def test_bounds(self):
        seed_sequence(MAX_MASTER_SEED, "x")
        with pytest.raises(ValueError):
            seed_sequence(2**64, "x")
        with pytest.raises(ValueError):
            seed_sequence(0, "x", -1)
        with pytest.raises(TypeError):
            seed_sequence(0, "x", object())
