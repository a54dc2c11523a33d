"""Binary container for built structures.

Layout (all integers little-endian)::

    offset  size      field
    0       4         magic b"DPST"
    4       2         u16 format version (currently 1)
    6       1         u8 kind tag: 0 = substring trie, 1 = qgram
    7       4         u32 header length H
    11      H         header, UTF-8 JSON with sorted keys (build metadata)
    11+H    4         u32 node count N
    15+H    4N        int32 parent ids (root = -1, parent[v] < v)
    ..      2N        uint16 edge symbols (root = 0)
    ..      8N        float64 noisy counts (NaN for q-gram inner nodes)
    end-32  32        SHA-256 of every preceding byte
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .countingtrie import PrivateCountTrie
from .qgrams import QGramStructure

MAGIC = b"DPST"
FORMAT_VERSION = 1
KIND_TAGS = {"substring": 0, "qgram": 1}


class CorruptFileError(ValueError):
    """Bad magic, unsupported version, truncated data or checksum mismatch."""


def dumps(ds: PrivateCountTrie) -> bytes:
    kind = "qgram" if isinstance(ds, QGramStructure) else "substring"
    header = json.dumps(ds.meta, sort_keys=True).encode("utf-8")
    n = len(ds)
    body = b"".join([
        MAGIC,
        struct.pack("<HBI", FORMAT_VERSION, KIND_TAGS[kind], len(header)),
        header,
        struct.pack("<I", n),
        ds.parent.astype("<i4").tobytes(),
        ds.symbol.astype("<u2").tobytes(),
        ds.count.astype("<f8").tobytes(),
    ])
    return body + hashlib.sha256(body).digest()


def loads(data: bytes) -> PrivateCountTrie:
    if len(data) < 4 + 7 + 4 + 32 or data[:4] != MAGIC:
        raise CorruptFileError("not a structure file (bad magic)")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptFileError("checksum mismatch: file is corrupt")
    version, tag, hlen = struct.unpack_from("<HBI", body, 4)
    if version != FORMAT_VERSION:
        raise CorruptFileError(f"unsupported format version {version}")
    pos = 11
    meta = json.loads(body[pos:pos + hlen].decode("utf-8"))
    pos += hlen
    (n,) = struct.unpack_from("<I", body, pos)
    pos += 4
    if len(body) != pos + 14 * n:
        raise CorruptFileError("node table has the wrong size")
    parent = np.frombuffer(body, "<i4", n, pos)
    symbol = np.frombuffer(body, "<u2", n, pos + 4 * n)
    count = np.frombuffer(body, "<f8", n, pos + 6 * n)
    if tag == KIND_TAGS["qgram"]:
        return QGramStructure(parent, symbol, count, meta)
    if tag == KIND_TAGS["substring"]:
        return PrivateCountTrie(parent, symbol, count, meta)
    raise CorruptFileError(f"unknown kind tag {tag}")


def save(ds: PrivateCountTrie, path) -> str:
    """Write ``ds`` to ``path``; returns the hex SHA-256 trailer."""
    data = dumps(ds)
    Path(path).write_bytes(data)
    return data[-32:].hex()


def load(path) -> PrivateCountTrie:
    return loads(Path(path).read_bytes())
