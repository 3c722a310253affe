import csv
import math

import numpy as np
import pytest

from raftmin.exceptions import ConfigError, FieldFormatError
from raftmin.fieldio import cos_mode, header_line, read_raftfield, synthetic_field, write_field_csv, write_raftfield
from raftmin.grid import ScalarField, make_grid
from raftmin.schemas import FieldSpec


def test_raftfield_dump_reads_back_bitwise(tmp_path, neumann_2d, smooth_field):
    """Test that a dump reproduces the field exactly."""
    field = smooth_field(neumann_2d, seed=2)
    path = tmp_path / "u.raftfield"
    write_raftfield(path, field)

    assert path.read_bytes().startswith(b"RAFTFIELD v1 2 64 48 neumann\n")
    assert np.array_equal(read_raftfield(path, neumann_2d).values, field.values)


def test_raftfield_header_must_match_grid(tmp_path, neumann_1d, periodic_1d):
    path = tmp_path / "u.raftfield"
    write_raftfield(path, cos_mode(neumann_1d, 1))
    with pytest.raises(FieldFormatError):
        read_raftfield(path, periodic_1d)


@pytest.mark.parametrize("payload", [
    b"",
    b"NOTAFIELD v1 1 128 neumann\n" + bytes(8 * 128),
    b"RAFTFIELD v2 1 128 neumann\n" + bytes(8 * 128),
    b"RAFTFIELD v1 1 128 neumann\n" + bytes(8 * 127),
    b"RAFTFIELD v1 1 128 neumann\n" + np.full(128, np.inf).astype("<f8").tobytes(),
])
def test_raftfield_rejects_malformed_files(tmp_path, neumann_1d, payload):
    """Test the format checks of the reader."""
    path = tmp_path / "bad.raftfield"
    path.write_bytes(payload)
    with pytest.raises(FieldFormatError):
        read_raftfield(path, neumann_1d)


def test_missing_file_is_a_format_error(tmp_path, neumann_1d):
    with pytest.raises(FieldFormatError) as exc:
        read_raftfield(tmp_path / "absent.raftfield", neumann_1d)
    assert exc.value.exit_code == 3


def test_csv_dump_lists_indices_and_values(tmp_path, neumann_2d):
    field = ScalarField(neumann_2d, np.arange(64 * 48, dtype=float))
    path = tmp_path / "u.csv"
    write_field_csv(path, field)
    with open(path) as fh:
        rows = list(csv.reader(fh))

    assert rows[0] == ["i", "j", "value"]
    assert len(rows) == 1 + 64 * 48
    assert rows[50] == ["1", "1", "49.0"]


def test_csv_dump_refuses_3d(tmp_path):
    grid = make_grid(3, [1.0] * 3, [4] * 3)
    with pytest.raises(FieldFormatError):
        write_field_csv(tmp_path / "u.csv", ScalarField(grid, np.zeros(64)))


def test_header_line_for_periodic(periodic_1d):
    assert header_line(periodic_1d) == "RAFTFIELD v1 1 128 periodic\n"


def test_synthetic_sources(neumann_1d):
    """Test constant, cosine-mode, step and random sources."""
    x = neumann_1d.coords(0)

    const = synthetic_field(neumann_1d, FieldSpec(source="const", value=0.7))
    mode = synthetic_field(neumann_1d, FieldSpec(source="mode", cos_mode=2, amplitude=0.5, mean=0.1))
    step = synthetic_field(neumann_1d, FieldSpec(source="step", position=0.25, width=0.1))
    noise = synthetic_field(neumann_1d, FieldSpec(source="random", seed=4, amplitude=0.2, mean=-0.3))
    again = synthetic_field(neumann_1d, FieldSpec(source="random", seed=4, amplitude=0.2, mean=-0.3))

    assert np.all(const.values == 0.7)
    np.testing.assert_allclose(mode.values, 0.1 + 0.5 * np.cos(4 * math.pi * x), atol=1e-12)
    np.testing.assert_allclose(step.values, np.tanh((x - 0.25) / 0.1))
    assert noise.mean() == pytest.approx(-0.3, abs=1e-14)
    assert np.max(np.abs(noise.values + 0.3)) <= 0.4
    assert np.array_equal(noise.values, again.values)


def test_band_limited_random_field_has_requested_rms(neumann_1d):
    field = synthetic_field(neumann_1d, FieldSpec(source="random", band=4, amplitude=0.3))
    assert math.sqrt(float(np.mean(field.values**2))) == pytest.approx(0.3, rel=1e-12)


def test_modes_source_sums_entries(neumann_1d):
    spec = FieldSpec(source="modes", modes=[([4], 1.0), ([8], -0.5)])
    expected = cos_mode(neumann_1d, 1).values - 0.5 * cos_mode(neumann_1d, 2).values
    np.testing.assert_allclose(synthetic_field(neumann_1d, spec).values, expected, atol=1e-12)


def test_mode_outside_grid_is_a_config_error(neumann_1d):
    with pytest.raises(ConfigError):
        synthetic_field(neumann_1d, FieldSpec(source="mode", index=[400]))


def test_file_source_reads_the_dump(tmp_path, neumann_1d):
    path = tmp_path / "u.raftfield"
    write_raftfield(path, cos_mode(neumann_1d, 3))
    field = synthetic_field(neumann_1d, FieldSpec(source="file", path=str(path)))
    assert np.array_equal(field.values, cos_mode(neumann_1d, 3).values)
