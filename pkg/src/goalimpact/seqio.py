"""Processed-sequence file: the trainer's input, written by `ingest`.

Layout (little-endian throughout):

    magic   b"GIMSEQ\\x00"
    version 1 byte (currently 1)
    u32     JSON header length
    header  UTF-8 JSON: vocabulary, scaler, array manifest
    arrays  raw C-order bytes, concatenated in manifest order

Sequences are stored flattened: one row per step plus an offsets table.
"""

from __future__ import annotations

import json
from typing import List, Tuple

import numpy as np

from .errors import CorruptCheckpointError, VersionMismatchError
from .events import ActionVocabulary, FeatureScaler, NEITHER, TeamSide
from .ingest import Sequence

MAGIC = b"GIMSEQ\x00"
VERSION = 1

_TERMINAL_CODES = {TeamSide.HOME: 0, TeamSide.AWAY: 1, NEITHER: 2}
_TERMINAL_FROM_CODE = {0: TeamSide.HOME, 1: TeamSide.AWAY, 2: NEITHER}

_STEP_ARRAYS = [
    ("steps", np.float64),
    ("raw", np.float64),
    ("tl", np.int64),
    ("player_ids", np.int64),
    ("action_idx", np.int64),
    ("sides", np.int8),
    ("possession", np.int8),
    ("manpower_idx", np.int8),
    ("game_time", np.float64),
]


def save_sequences(path, sequences: List[Sequence], scaler: FeatureScaler,
                   vocabulary: ActionVocabulary) -> None:
    if not sequences:
        raise ValueError("refusing to write an empty sequence file")
    flat = {name: np.concatenate([getattr(s, name) for s in sequences]) for name, _ in _STEP_ARRAYS}
    offsets = np.cumsum([0] + [len(s) for s in sequences]).astype(np.int64)
    game_ids = np.array([s.game_id for s in sequences], dtype=np.int64)
    terminals = np.array([_TERMINAL_CODES[s.terminal] for s in sequences], dtype=np.int8)

    arrays: List[Tuple[str, np.ndarray]] = [(n, np.ascontiguousarray(flat[n], dtype=dt))
                                            for n, dt in _STEP_ARRAYS]
    arrays += [("offsets", offsets), ("game_ids", game_ids), ("terminals", terminals)]

    header = {
        "vocabulary": list(vocabulary.names),
        "scaler": {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()},
        "arrays": [{"name": n, "dtype": a.dtype.str, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(np.uint32(len(blob)).tobytes())
        fh.write(blob)
        for _, arr in arrays:
            fh.write(arr.tobytes())


def load_sequences(path):
    """Returns (sequences, scaler, vocabulary)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise CorruptCheckpointError(f"{path}: not a sequence file (bad magic)")
    pos = len(MAGIC)
    version = data[pos]
    if version != VERSION:
        raise VersionMismatchError(f"{path}: sequence format version {version}, expected {VERSION}")
    pos += 1
    (hlen,) = np.frombuffer(data[pos:pos + 4], dtype=np.uint32)
    pos += 4
    try:
        header = json.loads(data[pos:pos + int(hlen)].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CorruptCheckpointError(f"{path}: corrupt header ({err})") from None
    pos += int(hlen)

    arrays = {}
    for meta in header["arrays"]:
        dt = np.dtype(meta["dtype"])
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        nbytes = dt.itemsize * count
        if pos + nbytes > len(data):
            raise CorruptCheckpointError(f"{path}: truncated array {meta['name']!r}")
        arrays[meta["name"]] = np.frombuffer(
            data[pos:pos + nbytes], dtype=dt
        ).reshape(meta["shape"]).copy()
        pos += nbytes

    vocabulary = ActionVocabulary(header["vocabulary"])
    scaler = FeatureScaler(
        mean=np.asarray(header["scaler"]["mean"], dtype=np.float64),
        std=np.asarray(header["scaler"]["std"], dtype=np.float64),
    )
    offsets = arrays["offsets"]
    sequences = []
    for i in range(len(offsets) - 1):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        sequences.append(
            Sequence(
                game_id=int(arrays["game_ids"][i]),
                steps=arrays["steps"][lo:hi],
                raw=arrays["raw"][lo:hi],
                tl=arrays["tl"][lo:hi],
                player_ids=arrays["player_ids"][lo:hi],
                action_idx=arrays["action_idx"][lo:hi],
                sides=arrays["sides"][lo:hi],
                possession=arrays["possession"][lo:hi],
                manpower_idx=arrays["manpower_idx"][lo:hi],
                game_time=arrays["game_time"][lo:hi],
                terminal=_TERMINAL_FROM_CODE[int(arrays["terminals"][i])],
            )
        )
    return sequences, scaler, vocabulary
