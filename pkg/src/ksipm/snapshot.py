"""Binary density snapshots.

Layout (little-endian): magic ``b"KSIPM1"``, version byte, ``n1`` and ``n2`` as
u32, ``t``, ``g`` and ``rho_M`` as f64, then ``n1 * n2`` f64 values with x2
rows outermost (row ``j`` holds every x1 node at ``x2_j``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .spectral import Grid, RealField

MAGIC = b"KSIPM1"
VERSION = 1
_HEAD = struct.Struct("<6sBIIddd")
HEADER_SIZE = _HEAD.size  # 39 bytes


class SnapshotError(OSError):
    pass


@dataclass(frozen=True)
class Snapshot:
    t: float
    g: float
    rho_M: float
    rho: RealField


def encode(snap: Snapshot) -> bytes:
    g = snap.rho.grid
    head = _HEAD.pack(MAGIC, VERSION, g.n1, g.n2, snap.t, snap.g, snap.rho_M)
    return head + np.ascontiguousarray(snap.rho.values.T, dtype="<f8").tobytes()


def decode(data: bytes) -> Snapshot:
    if len(data) < HEADER_SIZE:
        raise SnapshotError(f"snapshot truncated: {len(data)} bytes, header needs {HEADER_SIZE}")
    magic, version, n1, n2, t, g, rho_M = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    need = 8 * n1 * n2
    payload = data[HEADER_SIZE:]
    if len(payload) != need:
        raise SnapshotError(f"payload has {len(payload)} bytes, expected {need}")
    try:
        grid = Grid(n1, n2)
        values = np.frombuffer(payload, dtype="<f8").reshape(n2, n1).T.astype(float)
        rho = RealField(grid, values)
    except ValueError as exc:
        raise SnapshotError(f"invalid snapshot contents: {exc}") from exc
    return Snapshot(t=t, g=g, rho_M=rho_M, rho=rho)


def write_snapshot(path, snap: Snapshot) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(snap))


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        return decode(fh.read())


def from_state(state, g: float) -> Snapshot:
    return Snapshot(t=state.t, g=g, rho_M=state.rho_M, rho=state.rho)


def to_state(snap: Snapshot, step_count: int = 0):
    from .dynamics import SimState

    return SimState(t=snap.t, rho=snap.rho, rho_M=snap.rho_M, step_count=step_count)
