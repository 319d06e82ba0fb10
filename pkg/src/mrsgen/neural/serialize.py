"""SFNET1 network snapshots.

Layout: a text header (magic, input shape, one line per layer giving its kind
and constructor arguments, then ``end``) followed by a binary body. For every
layer, each parameter then each buffer is written as a little-endian uint64
element count and that many little-endian float64 values.
"""

import io
import struct

import numpy as np

from ..spectra import format_float
from .layers import LAYER_KINDS
from .network import Network

MAGIC = "SFNET1"


def _fmt(v):
    return format_float(v) if isinstance(v, float) else str(v)


def _arrays(layer):
    return list(layer.params.values()) + list(layer.buffers().values())


def dump_network(net: Network, fh) -> None:
    header = [MAGIC, "input " + " ".join(map(str, net.input_shape)), f"layers {len(net.layers)}"]
    for layer in net.layers:
        header.append(" ".join([layer.kind] + [_fmt(a) for a in layer.spec()]))
    header.append("end")
    fh.write(("\n".join(header) + "\n").encode("ascii"))
    for layer in net.layers:
        for arr in _arrays(layer):
            flat = np.ascontiguousarray(arr, dtype="<f8").ravel()
            fh.write(struct.pack("<Q", flat.size))
            fh.write(flat.tobytes())


def _readline(fh):
    line = fh.readline()
    if not line:
        raise ValueError("truncated SFNET1 header")
    return line.decode("ascii").rstrip("\n")


def _parse_arg(tok):
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def load_network(fh) -> Network:
    if _readline(fh) != MAGIC:
        raise ValueError("not an SFNET1 snapshot")
    kw, *shape = _readline(fh).split()
    if kw != "input":
        raise ValueError("missing input line")
    kw, count = _readline(fh).split()
    layers = []
    for _ in range(int(count)):
        kind, *args = _readline(fh).split()
        if kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {kind!r}")
        layers.append(LAYER_KINDS[kind](*[_parse_arg(a) for a in args]))
    if _readline(fh) != "end":
        raise ValueError("missing end of SFNET1 header")
    for layer in layers:
        for arr in _arrays(layer):
            raw = fh.read(8)
            if len(raw) != 8:
                raise ValueError("truncated SFNET1 body")
            (n,) = struct.unpack("<Q", raw)
            if n != arr.size:
                raise ValueError(f"{layer.kind}: expected {arr.size} values, found {n}")
            data = fh.read(8 * n)
            if len(data) != 8 * n:
                raise ValueError("truncated SFNET1 body")
            arr[...] = np.frombuffer(data, dtype="<f8").reshape(arr.shape)
    if fh.read(1):
        raise ValueError("trailing bytes after SFNET1 body")
    return Network(layers, tuple(int(s) for s in shape))


def save_network(net: Network, path) -> None:
    with open(path, "wb") as fh:
        dump_network(net, fh)


def read_network(path) -> Network:
    with open(path, "rb") as fh:
        return load_network(fh)


def network_bytes(net: Network) -> bytes:
    buf = io.BytesIO()
    dump_network(net, buf)
    return buf.getvalue()
