"""Wire encoding for matrices handed between computation parties.

A matrix travels as one length-prefixed frame: a u32 payload length,
then a 4-byte version tag, the bin count, the recorded noise total, the
row count, and the c1/c2 element arrays as big-endian u32 (the group
modulus is below 2**32, so 4 bytes per element). Round transcripts wrap
the same frames in base64 inside JSON for debugging.
"""

from __future__ import annotations

import base64
import json
import struct

import numpy as np

from privmeter.psc.protocol import Matrix

MAGIC = b"PSC1"
_HEAD = struct.Struct(">4sIII")


def pack_matrix(matrix: Matrix) -> bytes:
    n = len(matrix)
    payload = b"".join([
        _HEAD.pack(MAGIC, matrix.b, matrix.n_noise_total, n),
        matrix.c1.astype(">u4").tobytes(),
        matrix.c2.astype(">u4").tobytes(),
    ])
    return struct.pack(">I", len(payload)) + payload


def unpack_matrix(data: bytes, offset: int = 0) -> tuple:
    """Decode one frame; returns (matrix, offset past the frame)."""
    if len(data) - offset < 4:
        raise ValueError("truncated frame: missing length prefix")
    (plen,) = struct.unpack_from(">I", data, offset)
    offset += 4
    if len(data) - offset < plen:
        raise ValueError("truncated frame: payload shorter than prefix")
    magic, b, n_noise, n = _HEAD.unpack_from(data, offset)
    if magic != MAGIC:
        raise ValueError(f"bad frame tag {magic!r}")
    if plen != _HEAD.size + 8 * n:
        raise ValueError("frame length does not match row count")
    body = offset + _HEAD.size
    c1 = np.frombuffer(data, dtype=">u4", count=n, offset=body)
    c2 = np.frombuffer(data, dtype=">u4", count=n, offset=body + 4 * n)
    return (Matrix(c1=c1.astype(np.uint64), c2=c2.astype(np.uint64),
                   b=b, n_noise_total=n_noise), offset + plen)


def write_frames(fileobj, matrices) -> None:
    for m in matrices:
        fileobj.write(pack_matrix(m))


def read_frames(fileobj) -> list:
    data = fileobj.read()
    out, offset = [], 0
    while offset < len(data):
        m, offset = unpack_matrix(data, offset)
        out.append(m)
    return out


class Transcript:
    """Labelled matrix snapshots from one round, JSON-serializable."""

    def __init__(self):
        self.entries = []

    def record(self, label: str, matrix: Matrix) -> None:
        self.entries.append((label, pack_matrix(matrix)))

    def matrices(self) -> list:
        return [(label, unpack_matrix(frame)[0]) for label, frame in self.entries]

    def to_json(self) -> str:
        return json.dumps({
            "format": MAGIC.decode(),
            "frames": [{"label": label,
                        "data": base64.b64encode(frame).decode()}
                       for label, frame in self.entries],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        doc = json.loads(text)
        if doc.get("format") != MAGIC.decode():
            raise ValueError(f"unsupported transcript format {doc.get('format')!r}")
        t = cls()
        for f in doc["frames"]:
            t.entries.append((f["label"], base64.b64decode(f["data"])))
        return t
