"""State snapshots: a self-describing binary container plus a JSON sidecar.

Binary layout (all integers little-endian uint32, all floats little-endian
IEEE-754 binary64):

    magic   4 bytes  b"MPS1"
    nsites  u32
    per site:   left u32, phys u32, right u32,
                then left*phys*right scalars, row-major
                (complex mode stores two floats per scalar, real then imag)
    per bond:   len u32, then len weight floats

The sidecar at ``<path>.json`` records the scalar mode, the layout labels and
the per-site orthonormality flags.  Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .mps import MpsState

MAGIC = b"MPS1"


def _label_to_json(label):
    if isinstance(label, tuple):
        return {"pair": [_label_to_json(x) for x in label]}
    return label


def _label_from_json(obj):
    if isinstance(obj, dict) and "pair" in obj:
        return tuple(_label_from_json(x) for x in obj["pair"])
    return obj


def save_snapshot(state: MpsState, path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", state.n_sites))
        for g in state.gammas:
            fh.write(struct.pack("<III", *g.shape))
            if state.complex_mode:
                interleaved = np.empty(g.size * 2)
                interleaved[0::2] = g.real.ravel()
                interleaved[1::2] = g.imag.ravel()
                fh.write(interleaved.astype("<f8").tobytes())
            else:
                fh.write(g.ravel().astype("<f8").tobytes())
        for lam in state.lambdas:
            fh.write(struct.pack("<I", lam.size))
            fh.write(lam.astype("<f8").tobytes())
    sidecar = {
        "schema": 1,
        "scalar_mode": "complex" if state.complex_mode else "real",
        "labels": [_label_to_json(lab) for lab in state.labels],
        "lortho": state.lortho,
        "rortho": state.rortho,
    }
    with open(path.with_name(path.name + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=1)


def load_snapshot(path) -> MpsState:
    path = Path(path)
    with open(path.with_name(path.name + ".json")) as fh:
        sidecar = json.load(fh)
    complex_mode = sidecar["scalar_mode"] == "complex"
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path} is not a state snapshot")
        (nsites,) = struct.unpack("<I", fh.read(4))
        gammas = []
        for _ in range(nsites):
            shape = struct.unpack("<III", fh.read(12))
            count = shape[0] * shape[1] * shape[2]
            if complex_mode:
                raw = np.frombuffer(fh.read(16 * count), dtype="<f8")
                g = (raw[0::2] + 1j * raw[1::2]).reshape(shape)
            else:
                g = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
            gammas.append(g.copy())
        lambdas = []
        for _ in range(nsites - 1):
            (size,) = struct.unpack("<I", fh.read(4))
            lambdas.append(np.frombuffer(fh.read(8 * size), dtype="<f8").copy())
    labels = [_label_from_json(x) for x in sidecar["labels"]]
    state = MpsState(gammas, lambdas, labels, complex_mode)
    state.lortho = list(sidecar["lortho"])
    state.rortho = list(sidecar["rortho"])
    return state
