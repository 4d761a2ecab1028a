"""Plain-text matrix archive for regression fixtures.

Format (one record per named matrix, entries row major as "re im" pairs):

    pilotforge-archive v1 <kind>
    int <name> <value>
    matrix <name> <rows> <cols>
    <re> <im> <re> <im> ...     (one line per row)

Floats are written with shortest round-trip precision, so saving and
loading reproduces every value bit for bit.
"""

from __future__ import annotations

import numpy as np

from .channel import FullySeparable, MuMimo, PartiallySeparable
from .estimator import PilotSet

_MAGIC = "pilotforge-archive v1"


def _write_matrix(fh, name, mat):
    mat = np.asarray(mat, dtype=np.complex128)
    fh.write(f"matrix {name} {mat.shape[0]} {mat.shape[1]}\n")
    for row in mat:
        fh.write(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row) + "\n")


def _write(path, kind, ints, matrices):
    with open(path, "w") as fh:
        fh.write(f"{_MAGIC} {kind}\n")
        for name, value in ints:
            fh.write(f"int {name} {value}\n")
        for name, mat in matrices:
            _write_matrix(fh, name, mat)


def _read(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise ValueError(f"{path} is not a pilotforge archive")
    kind = lines[0][len(_MAGIC) :].strip()
    ints = {}
    matrices = {}
    pos = 1
    while pos < len(lines):
        parts = lines[pos].split()
        if not parts:
            pos += 1
            continue
        if parts[0] == "int":
            ints[parts[1]] = int(parts[2])
            pos += 1
        elif parts[0] == "matrix":
            name, rows, cols = parts[1], int(parts[2]), int(parts[3])
            data = np.empty((rows, cols), dtype=np.complex128)
            for r in range(rows):
                vals = [float(x) for x in lines[pos + 1 + r].split()]
                data[r] = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
            matrices[name] = data
            pos += 1 + rows
        else:
            raise ValueError(f"unrecognized archive line: {lines[pos]!r}")
    return kind, ints, matrices


def save_profile(profile, path):
    """Serialize a correlation profile to the text archive format."""
    if isinstance(profile, FullySeparable):
        mats = [(f"Q{i}", q) for i, q in enumerate(profile.rx)]
        mats += [(f"P{j}", p) for j, p in enumerate(profile.tx)]
        _write(path, "fully_separable", [("cells", profile.n_cells)], mats)
    elif isinstance(profile, PartiallySeparable):
        mats = [(f"Q{i}", q) for i, q in enumerate(profile.rx)]
        mats += [
            (f"P{i}_{j}", profile.tx[i][j])
            for i in range(profile.n_cells)
            for j in range(profile.n_cells)
        ]
        _write(path, "partially_separable", [("cells", profile.n_cells)], mats)
    elif isinstance(profile, MuMimo):
        mats = [(f"beta{i}", profile.beta[i]) for i in range(profile.n_cells)]
        _write(
            path,
            "mu_mimo",
            [("cells", profile.n_cells), ("bs_antennas", profile.bs_antennas)],
            mats,
        )
    else:
        raise TypeError(f"cannot serialize {type(profile).__name__}")


def load_profile(path):
    kind, ints, mats = _read(path)
    m = ints["cells"]
    if kind == "fully_separable":
        return FullySeparable(
            rx=[mats[f"Q{i}"] for i in range(m)], tx=[mats[f"P{j}"] for j in range(m)]
        )
    if kind == "partially_separable":
        return PartiallySeparable(
            rx=[mats[f"Q{i}"] for i in range(m)],
            tx=[[mats[f"P{i}_{j}"] for j in range(m)] for i in range(m)],
        )
    if kind == "mu_mimo":
        beta = np.stack([mats[f"beta{i}"].real for i in range(m)])
        return MuMimo(beta=beta, bs_antennas=ints["bs_antennas"])
    raise ValueError(f"unknown archive kind {kind!r}")


def save_pilots(pilots: PilotSet, path):
    """Serialize a pilot set, one matrix per cell."""
    mats = [(f"S{i}", s) for i, s in enumerate(pilots.per_cell)]
    _write(path, "pilot_set", [("cells", pilots.n_cells)], mats)


def load_pilots(path):
    kind, ints, mats = _read(path)
    if kind != "pilot_set":
        raise ValueError(f"expected a pilot_set archive, found {kind!r}")
    return PilotSet(per_cell=[mats[f"S{i}"] for i in range(ints["cells"])])
