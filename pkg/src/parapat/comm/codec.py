"""Self-describing binary encoding for values that cross rank boundaries.

Every message exchanged between ranks is a ``bytes`` payload produced by
:func:`encode`.  The format is a small tagged tree::

    N                      None
    T / F                  True / False
    i <u32 n> <n bytes>    int, signed little-endian two's complement
    f <8 bytes>            float64
    s <u32 n> <utf-8>      str
    b <u32 n> <raw>        bytes
    l/t <u32 k> item*k     list / tuple
    d <u32 k> (key val)*k  dict, insertion order preserved
    a <dtype> <u8 ndim> <u64 dim>*ndim <u64 n> <raw>   ndarray (C order)
    g <dtype> <raw>        numpy scalar
    D <str name> <dict>    registered dataclass

``<dtype>`` is a length-prefixed ``numpy.dtype.str`` (e.g. ``'<f8'``), so
arrays round-trip bit-exactly including byte order.  Dataclasses must be
registered with :func:`register` before they can be sent; decoding never
imports arbitrary modules.

Wire framing (used by the socket backend) prefixes each payload with its
length as a little-endian unsigned 32-bit integer, see :func:`frame`.
"""
from __future__ import annotations

import dataclasses
import struct

import numpy as np

__all__ = ["encode", "decode", "register", "frame", "MAX_FRAME", "CodecError"]

MAX_FRAME = 2**32 - 1

_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")

_registry: dict[str, type] = {}


class CodecError(TypeError):
    """Raised for values the codec cannot represent or malformed payloads."""


def register(cls):
    """Class decorator that allows a dataclass to be encoded.

    The wire name is ``module:qualname``; decoding looks it up in the registry
    and rebuilds the instance from its fields.
    """
    if not dataclasses.is_dataclass(cls):
        raise CodecError(f"{cls!r} is not a dataclass")
    _registry[f"{cls.__module__}:{cls.__qualname__}"] = cls
    return cls


def frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME:
        raise CodecError(f"payload of {len(payload)} bytes exceeds frame limit")
    return _U32.pack(len(payload)) + payload


def _put_blob(out: list, data: bytes) -> None:
    out.append(_U32.pack(len(data)))
    out.append(data)


def _encode(obj, out: list) -> None:
    # bool before int, numpy scalars before float (np.float64 subclasses float)
    if obj is None:
        out.append(b"N")
    elif obj is True:
        out.append(b"T")
    elif obj is False:
        out.append(b"F")
    elif isinstance(obj, np.generic):
        if obj.dtype.hasobject:
            raise CodecError("object-dtype numpy scalars are not encodable")
        out.append(b"g")
        _put_blob(out, obj.dtype.str.encode("ascii"))
        out.append(obj.tobytes())
    elif isinstance(obj, int):
        nbytes = (obj.bit_length() + 8) // 8
        out.append(b"i")
        _put_blob(out, obj.to_bytes(nbytes, "little", signed=True))
    elif isinstance(obj, float):
        out.append(b"f")
        out.append(_F64.pack(obj))
    elif isinstance(obj, str):
        out.append(b"s")
        _put_blob(out, obj.encode("utf-8"))
    elif isinstance(obj, (bytes, bytearray, memoryview)):
        out.append(b"b")
        _put_blob(out, bytes(obj))
    elif isinstance(obj, np.ndarray):
        if obj.dtype.hasobject:
            raise CodecError("object-dtype arrays are not encodable")
        arr = np.ascontiguousarray(obj)
        out.append(b"a")
        _put_blob(out, arr.dtype.str.encode("ascii"))
        out.append(_U8.pack(arr.ndim))
        for dim in arr.shape:
            out.append(_U64.pack(dim))
        raw = arr.tobytes()
        out.append(_U64.pack(len(raw)))
        out.append(raw)
    elif isinstance(obj, (list, tuple)):
        out.append(b"l" if isinstance(obj, list) else b"t")
        out.append(_U32.pack(len(obj)))
        for item in obj:
            _encode(item, out)
    elif isinstance(obj, dict):
        out.append(b"d")
        out.append(_U32.pack(len(obj)))
        for key, value in obj.items():
            _encode(key, out)
            _encode(value, out)
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        name = f"{type(obj).__module__}:{type(obj).__qualname__}"
        if _registry.get(name) is not type(obj):
            raise CodecError(f"dataclass {name} is not registered for transport")
        out.append(b"D")
        _put_blob(out, name.encode("utf-8"))
        fields = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
        _encode(fields, out)
    else:
        raise CodecError(f"cannot encode value of type {type(obj).__name__}")


def encode(obj) -> bytes:
    """Serialise ``obj`` to a payload."""
    out: list[bytes] = []
    _encode(obj, out)
    return b"".join(out)


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        end = self.pos + n
        if end > len(self.buf):
            raise CodecError("truncated payload")
        chunk = self.buf[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self.take(1))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def blob(self) -> bytes:
        return bytes(self.take(self.u32()))


def _decode(r: _Reader):
    tag = bytes(r.take(1))
    if tag == b"N":
        return None
    if tag == b"T":
        return True
    if tag == b"F":
        return False
    if tag == b"i":
        return int.from_bytes(r.blob(), "little", signed=True)
    if tag == b"f":
        return _F64.unpack(r.take(8))[0]
    if tag == b"s":
        return r.blob().decode("utf-8")
    if tag == b"b":
        return r.blob()
    if tag == b"g":
        dtype = np.dtype(r.blob().decode("ascii"))
        return np.frombuffer(bytes(r.take(dtype.itemsize)), dtype=dtype)[0]
    if tag == b"a":
        dtype = np.dtype(r.blob().decode("ascii"))
        ndim = r.u8()
        shape = tuple(r.u64() for _ in range(ndim))
        raw = bytes(r.take(r.u64()))
        # frombuffer gives a read-only view; copy so receivers own the data
        return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    if tag in (b"l", b"t"):
        items = [_decode(r) for _ in range(r.u32())]
        return items if tag == b"l" else tuple(items)
    if tag == b"d":
        n = r.u32()
        result = {}
        for _ in range(n):
            key = _decode(r)
            result[key] = _decode(r)
        return result
    if tag == b"D":
        name = r.blob().decode("utf-8")
        cls = _registry.get(name)
        if cls is None:
            raise CodecError(f"unknown dataclass {name!r} in payload")
        return cls(**_decode(r))
    raise CodecError(f"unknown tag {tag!r} at offset {r.pos - 1}")


def decode(payload: bytes):
    """Inverse of :func:`encode`; rejects trailing bytes."""
    r = _Reader(payload)
    obj = _decode(r)
    if r.pos != len(r.buf):
        raise CodecError(f"{len(r.buf) - r.pos} trailing bytes in payload")
    return obj
