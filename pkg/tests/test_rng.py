import numpy as np
import pytest

from gossipopt.rng import COMPRESS_G, COMPRESS_H, DATA, GRAD, TOPOLOGY, RngStream


class TestRngStream:
    def test_same_path_replays_identically(self):
        a = RngStream(42).child(GRAD, 17, 3).generator().random(8)
        b = RngStream(42).child(GRAD, 17, 3).generator().random(8)
        np.testing.assert_array_equal(a, b)

    def test_generator_restarts_at_stream_origin(self):
        s = RngStream(1).child(2)
        np.testing.assert_array_equal(s.generator().random(4), s.generator().random(4))

    def test_sibling_streams_differ(self):
        s = RngStream(0)
        a = s.child(GRAD, 0, 0).generator().random(16)
        b = s.child(GRAD, 0, 1).generator().random(16)
        assert not np.array_equal(a, b)

    def test_purpose_codes_are_distinct(self):
        codes = {GRAD, COMPRESS_H, COMPRESS_G, DATA, TOPOLOGY}
        assert len(codes) == 5

    def test_path_order_matters(self):
        a = RngStream(5).child(1, 2).generator().random(4)
        b = RngStream(5).child(2, 1).generator().random(4)
        assert not np.array_equal(a, b)

    def test_chained_child_equals_flat_path(self):
        a = RngStream(9).child(1).child(2, 3)
        b = RngStream(9).child(1, 2, 3)
        assert a.path == b.path
        np.testing.assert_array_equal(a.generator().random(4), b.generator().random(4))

    def test_string_keys_are_stable(self):
        """String keys hash through their bytes, not the salted builtin hash."""
        s = RngStream(7).child("shuffle")
        assert s.path == (int.from_bytes(b"shuffle", "big") % 2**63,)

    def test_distinct_strings_distinct_streams(self):
        a = RngStream(7).child("shuffle").generator().random(8)
        b = RngStream(7).child("binary").generator().random(8)
        assert not np.array_equal(a, b)

    def test_rejects_negative_key(self):
        with pytest.raises(ValueError, match="non-negative"):
            RngStream(0).child(-1)

    def test_rejects_non_int_non_str(self):
        with pytest.raises(TypeError):
            RngStream(0).child(1.5)

    def test_numpy_integer_keys_accepted(self):
        a = RngStream(3).child(np.int64(4)).generator().random(4)
        b = RngStream(3).child(4).generator().random(4)
        np.testing.assert_array_equal(a, b)
