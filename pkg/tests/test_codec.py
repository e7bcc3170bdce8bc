import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parapat.comm import codec


@codec.register
@dataclasses.dataclass
class Point:
    x: float
    label: str
    data: np.ndarray


values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.floats(allow_nan=False)
    | st.text() | st.binary(),
    lambda children: st.lists(children, max_size=5)
    | st.tuples(children, children)
    | st.dictionaries(st.text(max_size=5), children, max_size=5),
    max_leaves=20,
)


@given(values)
def test_roundtrip_plain_values(value):
    assert codec.decode(codec.encode(value)) == value


@given(st.integers(min_value=-2**200, max_value=2**200))
def test_roundtrip_big_integers(n):
    assert codec.decode(codec.encode(n)) == n


@pytest.mark.parametrize("dtype", ["<f8", ">f8", "<i4", "u1", "<c16", "?"])
def test_arrays_keep_dtype_shape_and_bits(dtype):
    rng = np.random.default_rng(1)
    a = (rng.standard_normal((3, 4, 2)) * 100).astype(dtype)
    b = codec.decode(codec.encode(a))
    assert b.dtype == a.dtype and b.shape == a.shape
    assert b.tobytes() == a.tobytes()
    assert b.flags.writeable


def test_non_contiguous_array():
    a = np.arange(20.0).reshape(4, 5)[:, ::2]
    assert np.array_equal(codec.decode(codec.encode(a)), a)


def test_float_special_values_bit_exact():
    for x in (float("nan"), float("inf"), -0.0, 5e-324):
        y = codec.decode(codec.encode(x))
        assert np.float64(x).tobytes() == np.float64(y).tobytes()


def test_numpy_scalar_roundtrip():
    for x in (np.float32(1.5), np.int64(-3), np.bool_(True)):
        y = codec.decode(codec.encode(x))
        assert type(y) is type(x) and y == x


def test_registered_dataclass():
    p = Point(1.5, "a", np.arange(3))
    q = codec.decode(codec.encode(p))
    assert isinstance(q, Point) and q.x == 1.5 and q.label == "a"
    assert np.array_equal(q.data, p.data)


def test_unregistered_dataclass_rejected():
    @dataclasses.dataclass
    class Loose:
        a: int

    with pytest.raises(codec.CodecError):
        codec.encode(Loose(1))


def test_unsupported_type_rejected():
    with pytest.raises(codec.CodecError):
        codec.encode({1, 2})
    with pytest.raises(codec.CodecError):
        codec.encode(np.array([object()], dtype=object))


def test_malformed_payloads_rejected():
    good = codec.encode([1, "two", 3.0])
    with pytest.raises(codec.CodecError):
        codec.decode(good + b"x")
    with pytest.raises(codec.CodecError):
        codec.decode(good[:-1])
    with pytest.raises(codec.CodecError):
        codec.decode(b"?")


def test_frame_prefix_is_u32_le_length():
    payload = codec.encode("hello")
    framed = codec.frame(payload)
    assert framed[:4] == len(payload).to_bytes(4, "little")
    assert framed[4:] == payload


@settings(max_examples=20)
@given(st.binary(min_size=0, max_size=1 << 20))
def test_bytes_roundtrip_up_to_1mib(blob):
    assert codec.decode(codec.encode(blob)) == blob
