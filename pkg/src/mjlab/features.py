"""Observation encoding: one table view becomes 86 binary planes of 34x4.

Three filling styles share the 34x4 grid. Count planes write a kind's
multiplicity left-aligned into its row (three 6p reads 1110). Row-fill
planes mark a single kind with a full row of ones. 0/1 planes are solid
black or white. Keeping everything on the same grid preserves the
at-most-four-per-kind texture the convolutions key on.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .tiles import NUM_KINDS, TILES_PER_KIND

LAYOUT = "mj86-v1"
NUM_PLANES = 86

# present-situation plane indices; opponents sit viewer-relative
HAND = 0
AKA = 1
DISCARDS = 2  # ..5: self, right, across, left
MELDS = 6  # ..9
DORA = 10
RIICHI = 11  # ..13: the other three players
RANK = 14  # ..17: own rank one-hot
KYOKU = 18  # ..25: East-1 .. South-4
ROUND_WIND = 26
SEAT_WIND = 27
PAST = 28  # past-1 takes 13 planes, past-2..6 take 9 each


def _layout_table():
    seats = ("self", "right", "across", "left")
    rows = [("hand", "count"), ("aka fives", "row")]
    rows += [(f"discards {s}", "count") for s in seats]
    rows += [(f"melds {s}", "count") for s in seats]
    rows.append(("dora indicators", "count"))
    rows += [(f"riichi {s}", "flag") for s in seats[1:]]
    rows += [(f"rank {r}", "flag") for r in (1, 2, 3, 4)]
    rows += [(f"kyoku {w}{n}", "flag") for w in "ES" for n in (1, 2, 3, 4)]
    rows += [("round wind", "row"), ("seat wind", "row")]
    for k in range(1, 7):
        rows.append((f"past-{k} hand", "count"))
        rows += [(f"past-{k} discards {s}", "count") for s in seats]
        rows += [(f"past-{k} melds {s}", "count") for s in seats]
        if k == 1:
            rows.append(("past-1 dora indicators", "count"))
            rows += [(f"past-1 riichi {s}", "flag") for s in seats[1:]]
    return tuple(rows)


PLANE_LAYOUT = _layout_table()  # (name, filling style) per plane index


@dataclass(frozen=True, eq=False)
class PlaneStack:
    """An 86 x 34 x 4 bit tensor plus the tag naming its plane map."""

    bits: np.ndarray
    layout: str = LAYOUT


def _counts(kinds) -> np.ndarray:
    out = np.zeros(NUM_KINDS, dtype=np.uint8)
    for k in kinds:
        out[k] += 1
    return out


def _count_plane(counts) -> np.ndarray:
    return (np.arange(TILES_PER_KIND) < counts[:, None]).astype(np.uint8)


def _table_planes(view) -> np.ndarray:
    """The nine planes every situation gets: hand, discards, melds."""
    planes = np.zeros((9, NUM_KINDS, TILES_PER_KIND), dtype=np.uint8)
    planes[0] = _count_plane(_counts(t.kind for t in view.hand))
    for i in range(4):
        kept = (e.tile.kind for e in view.discards[i] if not e.called)
        planes[1 + i] = _count_plane(_counts(kept))
        melded = (t.kind for m in view.melds[i] for t in m.tiles)
        planes[5 + i] = _count_plane(_counts(melded))
    return planes


def _dora_plane(view) -> np.ndarray:
    return _count_plane(_counts(view.dora_indicators))


def _riichi_planes(view) -> np.ndarray:
    planes = np.zeros((3, NUM_KINDS, TILES_PER_KIND), dtype=np.uint8)
    for i in (1, 2, 3):
        if view.riichi[i]:
            planes[i - 1] = 1
    return planes


def snapshot_history(view, k: int) -> np.ndarray:
    """Planes for the viewer's k-th most recent own decision (1 = latest).

    Nine planes of hand/discards/melds as they stood just before that
    decision, all zero when the viewer has not decided k times yet. The
    freshest snapshot (k=1) carries four more: the dora indicators and the
    other players' riichi flags of that moment.
    """
    size = 13 if k == 1 else 9
    planes = np.zeros((size, NUM_KINDS, TILES_PER_KIND), dtype=np.uint8)
    if k <= len(view.history):
        past = view.history[k - 1]
        planes[0:9] = _table_planes(past)
        if k == 1:
            planes[9] = _dora_plane(past)
            planes[10:13] = _riichi_planes(past)
    return planes


def encode(view) -> PlaneStack:
    """Pure view-to-planes mapping; the layout is frozen under LAYOUT."""
    bits = np.zeros((NUM_PLANES, NUM_KINDS, TILES_PER_KIND), dtype=np.uint8)
    table = _table_planes(view)
    bits[HAND] = table[0]
    for t in view.hand:
        if t.aka:
            bits[AKA, t.kind] = 1
    bits[DISCARDS:DISCARDS + 4] = table[1:5]
    bits[MELDS:MELDS + 4] = table[5:9]
    bits[DORA] = _dora_plane(view)
    bits[RIICHI:RIICHI + 3] = _riichi_planes(view)
    bits[RANK + view.ranks[0] - 1] = 1
    # overtime kyoku beyond South-4 shares the last plane
    bits[KYOKU + min(view.kyoku, 8) - 1] = 1
    bits[ROUND_WIND, view.round_wind] = 1
    bits[SEAT_WIND, view.seat_wind] = 1
    at = PAST
    for k in range(1, 7):
        block = snapshot_history(view, k)
        bits[at:at + len(block)] = block
        at += len(block)
    return PlaneStack(bits)


def validate(stack: PlaneStack) -> list:
    """Every layout invariant, checked; an empty list means a valid stack."""
    if stack.layout != LAYOUT:
        return [f"unknown layout {stack.layout!r}"]
    bits = np.asarray(stack.bits)
    shape = (NUM_PLANES, NUM_KINDS, TILES_PER_KIND)
    if bits.shape != shape:
        return [f"shape {bits.shape} is not {shape}"]
    if not np.isin(bits, (0, 1)).all():
        return ["values outside 0/1"]
    problems = []
    for i, (name, style) in enumerate(PLANE_LAYOUT):
        plane = bits[i]
        if style == "count":
            if (np.diff(plane.astype(np.int8), axis=1) > 0).any():
                problems.append(f"plane {i} ({name}): row not left-aligned")
        elif style == "flag":
            if plane.any() and not plane.all():
                problems.append(f"plane {i} ({name}): not a 0/1 plane")
        else:
            partial = plane.any(axis=1) & ~plane.all(axis=1)
            if partial.any():
                problems.append(f"plane {i} ({name}): partially filled row")
    for start, size, label in ((RANK, 4, "rank"), (KYOKU, 8, "kyoku")):
        black = sum(bool(bits[start + j].all()) for j in range(size))
        if black != 1:
            problems.append(f"{label} planes not one-hot ({black} black)")
    visible = (
        bits[HAND].sum(axis=1)
        + bits[DISCARDS:MELDS + 4].sum(axis=(0, 2))
        + bits[DORA].sum(axis=1)
    )
    for kind in np.nonzero(visible > TILES_PER_KIND)[0]:
        problems.append(f"kind {kind}: {int(visible[kind])} tiles visible")
    return problems


# ------------------------------------------------------- packed sample files

PACK_MAGIC = b"MJPL"
PACK_VERSION = 1
_PACK_HEADER = struct.Struct("<4sHHQ")  # magic, version, planes, samples
SAMPLE_BITS = NUM_PLANES * NUM_KINDS * TILES_PER_KIND
SAMPLE_BYTES = SAMPLE_BITS // 8


def pack_planes(bits) -> bytes:
    """Serialize an (n, 86, 34, 4) bit tensor at 1462 bytes per sample."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 4 or arr.shape[1:] != (NUM_PLANES, NUM_KINDS,
                                          TILES_PER_KIND):
        raise ValueError(f"cannot pack shape {arr.shape}")
    n = arr.shape[0]
    payload = np.packbits(arr.reshape(n, SAMPLE_BITS), axis=1,
                          bitorder="little")
    return _PACK_HEADER.pack(PACK_MAGIC, PACK_VERSION, NUM_PLANES,
                             n) + payload.tobytes()


def unpack_planes(data: bytes) -> np.ndarray:
    if len(data) < _PACK_HEADER.size:
        raise ValueError("not a plane pack: truncated header")
    magic, version, planes, n = _PACK_HEADER.unpack_from(data)
    if magic != PACK_MAGIC:
        raise ValueError("not a plane pack")
    if version != PACK_VERSION:
        raise ValueError(f"plane pack version {version} unsupported")
    if planes != NUM_PLANES:
        raise ValueError(f"plane pack carries {planes}-plane samples")
    body = data[_PACK_HEADER.size:]
    if len(body) != n * SAMPLE_BYTES:
        raise ValueError(
            f"plane pack of {n} samples needs {n * SAMPLE_BYTES} payload "
            f"bytes, found {len(body)}"
        )
    raw = np.frombuffer(body, dtype=np.uint8).reshape(n, SAMPLE_BYTES)
    bits = np.unpackbits(raw, axis=1, count=SAMPLE_BITS, bitorder="little")
    return bits.reshape(n, NUM_PLANES, NUM_KINDS, TILES_PER_KIND)


def write_planes(path, bits) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_planes(bits))


def read_planes(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return unpack_planes(fh.read())
