"""Field sources and the RAFTFIELD v1 dump format.

A RAFTFIELD file is one ASCII header line ``RAFTFIELD v1 d n1 [n2 [n3]] boundary``
followed by the values as little-endian float64 in row-major order. Extents
are not stored; a reader supplies the grid.
"""
import csv
import logging
import math
from pathlib import Path
from typing import Union

import numpy as np

from raftmin.exceptions import ConfigError, FieldFormatError
from raftmin.grid import Grid, ScalarField, backward, band_mask, cosine_mode_index
from raftmin.models import FieldSource
from raftmin.schemas import FieldSpec

logger = logging.getLogger(__name__)

MAGIC = "RAFTFIELD"
VERSION = "v1"

PathLike = Union[str, Path]


def header_line(grid: Grid) -> str:
    dims = " ".join(str(k) for k in grid.n)
    return f"{MAGIC} {VERSION} {grid.d} {dims} {grid.boundary.value}\n"


def write_raftfield(path: PathLike, field: ScalarField) -> None:
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header_line(field.grid).encode("ascii"))
        fh.write(payload)
    logger.info(f"Wrote field {field.grid.shape} to {path}")


def read_raftfield(path: PathLike, grid: Grid) -> ScalarField:
    """Read a dump onto ``grid``; header and payload must match it exactly."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise FieldFormatError(str(path), str(e))
    end = raw.find(b"\n")
    if end < 0:
        raise FieldFormatError(str(path), "missing header line")
    try:
        tokens = raw[:end].decode("ascii").split()
    except UnicodeDecodeError:
        raise FieldFormatError(str(path), "header is not ASCII")
    if len(tokens) < 5 or tokens[0] != MAGIC:
        raise FieldFormatError(str(path), "not a RAFTFIELD file")
    if tokens[1] != VERSION:
        raise FieldFormatError(str(path), f"unsupported version {tokens[1]}")
    try:
        d = int(tokens[2])
        n = tuple(int(t) for t in tokens[3:3 + d])
    except ValueError:
        raise FieldFormatError(str(path), "malformed dimensions")
    if len(tokens) != 4 + d:
        raise FieldFormatError(str(path), "malformed header")
    boundary = tokens[3 + d]
    if d != grid.d or n != grid.n or boundary != grid.boundary.value:
        raise FieldFormatError(str(path), f"header {d} {n} {boundary} does not match {grid!r}")
    payload = raw[end + 1:]
    expected = 8 * math.prod(n)
    if len(payload) != expected:
        raise FieldFormatError(str(path), f"payload has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<f8").reshape(n)
    if not np.all(np.isfinite(values)):
        raise FieldFormatError(str(path), "non-finite values")
    return ScalarField(grid, values)


def write_field_csv(path: PathLike, field: ScalarField) -> None:
    """Index columns plus value; only for d <= 2."""
    grid = field.grid
    if grid.d > 2:
        raise FieldFormatError(str(path), "CSV dumps support d <= 2 only")
    names = ["i", "j"][:grid.d] + ["value"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for idx in np.ndindex(*grid.shape):
            writer.writerow([*idx, repr(float(field.values[idx]))])


def synthetic_field(grid: Grid, spec: FieldSpec) -> ScalarField:
    """Build the field a FieldSpec describes on ``grid``."""
    if spec.source == FieldSource.CONST:
        return ScalarField(grid, np.full(grid.shape, spec.value))

    if spec.source in (FieldSource.MODE, FieldSource.MODES):
        coeffs = np.zeros(grid.shape)
        if spec.source == FieldSource.MODE:
            entries = [(_mode_index(grid, spec), spec.amplitude)]
        else:
            entries = [(tuple(idx), amp) for idx, amp in spec.modes]
        for idx, amp in entries:
            if len(idx) != grid.d or any(not 0 <= k < n for k, n in zip(idx, grid.n)):
                raise ConfigError(f"Mode index {idx} outside grid {grid.n}")
            coeffs[idx] += amp
        return ScalarField(grid, backward(grid, coeffs) + spec.mean)

    if spec.source == FieldSource.STEP:
        if spec.axis >= grid.d:
            raise ConfigError(f"Step axis {spec.axis} on a {grid.d}-dimensional grid")
        x = grid.mesh()[spec.axis]
        return ScalarField(grid, np.tanh((x - spec.position) / spec.width))

    if spec.source == FieldSource.RANDOM:
        rng = np.random.default_rng(spec.seed)
        if spec.band is None:
            noise = rng.uniform(-spec.amplitude, spec.amplitude, size=grid.shape)
        else:
            coeffs = rng.standard_normal(grid.shape) * band_mask(grid, spec.band)
            coeffs[(0,) * grid.d] = 0.0
            noise = backward(grid, coeffs)
            rms = math.sqrt(float(np.mean(noise**2)))
            noise *= spec.amplitude / rms if rms > 0 else 0.0
        noise -= noise.mean()
        return ScalarField(grid, noise + spec.mean)

    if spec.source == FieldSource.FILE:
        return read_raftfield(spec.path, grid)

    raise ConfigError(f"Unknown field source {spec.source}")


def _mode_index(grid: Grid, spec: FieldSpec):
    if spec.cos_mode is not None:
        return cosine_mode_index(grid, spec.cos_mode)
    return tuple(spec.index)


def cos_mode(grid: Grid, n: int, amplitude: float = 1.0) -> ScalarField:
    """Unit-norm basis function proportional to cos(2 pi n x_1); equal to it on (-1, 1)."""
    coeffs = np.zeros(grid.shape)
    coeffs[cosine_mode_index(grid, n)] = amplitude
    return ScalarField(grid, backward(grid, coeffs))
