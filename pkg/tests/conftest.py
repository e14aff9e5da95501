"""Shared fixtures: deterministic RNG, document builders, raw cube text maker."""

from __future__ import annotations

import numpy as np
import pytest

from cubeforge import AtomRecord, CubeDocument, Volume


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


def make_volume(rng, dims=(4, 4, 4), nval=1, scale=1.0) -> Volume:
    values = rng.standard_normal(dims[0] * dims[1] * dims[2] * nval) * scale
    return Volume(
        dims=dims,
        origin=rng.standard_normal(3),
        axes=np.diag(rng.uniform(0.2, 1.5, 3)) + rng.standard_normal((3, 3)) * 0.01,
        values=values,
        nval=nval,
    )


def make_doc(rng, dims=(4, 4, 4), nval=1, natoms=2, negative_natoms=False, scale=1.0) -> CubeDocument:
    volume = make_volume(rng, dims, nval, scale)
    atoms = tuple(
        AtomRecord(
            atomic_number=int(rng.integers(1, 30)),
            charge=float(rng.uniform(0, 10)),
            position=tuple(rng.standard_normal(3)),
        )
        for _ in range(natoms)
    )
    if negative_natoms:
        return CubeDocument(
            comment1="test doc",
            comment2="generated",
            natoms_raw=-natoms,
            atoms=atoms,
            volume=volume,
            dset_ids=tuple(range(1, nval + 1)),
        )
    return CubeDocument(
        comment1="test doc",
        comment2="generated",
        natoms_raw=natoms,
        atoms=atoms,
        volume=volume,
    )


def raw_cube_text(
    values,
    dims=(2, 2, 2),
    nval=1,
    natoms_raw=1,
    dset_ids=None,
    origin=(0.0, 0.0, 0.0),
    step=0.5,
    negative_counts=False,
    value_format="{:.10E}",
    per_line=6,
    line_ending="\n",
    nval_token=True,
    comment1="made by hand",
    comment2="for parser tests",
) -> bytes:
    """Assemble cube text with full control over the quirks under test."""
    sign = -1 if negative_counts else 1
    lines = [comment1, comment2]
    head = f"{natoms_raw:5d}" + "".join(f"{o:12.6f}" for o in origin)
    if nval_token and nval != 1:
        head += f"{nval:5d}"
    lines.append(head)
    for axis in range(3):
        vec = [step if axis == i else 0.0 for i in range(3)]
        lines.append(f"{sign * dims[axis]:5d}" + "".join(f"{v:12.6f}" for v in vec))
    for i in range(abs(natoms_raw)):
        lines.append(
            f"{i + 1:5d}{0.0:12.6f}" + "".join(f"{x:12.6f}" for x in (0.1 * i, 0.0, 0.0))
        )
    if natoms_raw < 0:
        ids = dset_ids if dset_ids is not None else tuple(range(1, nval + 1))
        lines.append("".join(f"{x:5d}" for x in (len(ids), *ids)))
    vals = list(values)
    for start in range(0, len(vals), per_line):
        lines.append(" ".join(value_format.format(v) for v in vals[start : start + per_line]))
    return (line_ending.join(lines) + line_ending).encode()
