"""
Trajectory dumps.

Both sampled Gaussian paths (PathSample) and q-Whittaker snapshots
(ParticleTrajectory) are written as a stack of frames: one row per
(sample, time), one column per lattice point in lattice order.

CSV layout:
    # config_sha256=<hash>
    sample,time,a_1_1,a_1_2,a_2_2,...

Binary layout (all little-endian):
    header   '<4sHHIII'  magic b'WLTR', version, value kind
                         (0 = float64, 1 = int64), n_samples, n_times,
                         n_points
    points   '<II' per point (a1, a2)
    times    float64[n_times]
    values   float64 or int64[n_samples, n_times, n_points], C order
"""
import csv
import struct
from pathlib import Path
from typing import IO, Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from whitlab.core.elements import LatticePoint, ParticleTrajectory, PathSample
from whitlab.output.base import ResultOutput
from whitlab.output.table import CONFIG_HASH_PREFIX

BINARY_MAGIC = b'WLTR'
BINARY_VERSION = 1
BINARY_HEADER = struct.Struct('<4sHHIII')
BINARY_POINT = struct.Struct('<II')
KIND_FLOAT = 0
KIND_INT = 1

Trajectory = Union[PathSample, ParticleTrajectory]


def point_labels(points: Sequence[LatticePoint]) -> List[str]:
    """Column names a_<a1>_<a2> in lattice order."""
    return [f"a_{p.a1}_{p.a2}" for p in points]


def _frames(record: Trajectory) -> Tuple[np.ndarray, Tuple[LatticePoint, ...], np.ndarray, int]:
    """(times, points, values[sample, time, point], kind) of a trajectory."""
    if isinstance(record, PathSample):
        return (
            np.asarray(record.times, dtype=float),
            tuple(record.points),
            np.asarray(record.values, dtype=float),
            KIND_FLOAT,
        )
    if isinstance(record, ParticleTrajectory):
        snapshots = np.asarray(record.snapshots, dtype=np.int64)
        return (
            np.asarray(record.snapshot_times, dtype=float),
            tuple(record.points),
            snapshots[np.newaxis, :, :],
            KIND_INT,
        )
    raise TypeError(f"Cannot dump trajectory of type {type(record).__name__}")


class TrajectoryCsvOutput(ResultOutput):
    """CSV trajectory dump with the config-hash comment line."""

    scheme = "csv"

    def __init__(self, points: Sequence[LatticePoint], config_hash: str = "") -> None:
        super().__init__()
        self.points = tuple(points)
        self.config_hash = config_hash
        self._writer: Optional[Any] = None

    def _begin(self, f: IO[Any]) -> None:
        f.write(f"{CONFIG_HASH_PREFIX}{self.config_hash}\n")
        self._writer = csv.writer(f, lineterminator='\n')
        self._writer.writerow(['sample', 'time'] + point_labels(self.points))

    def write(self, record: Trajectory) -> int:
        """
        Append every frame of a trajectory.

        Returns:
            Number of rows written

        Raises:
            ValueError: If the trajectory's points differ from the header
        """
        self._require_open()
        times, points, values, kind = _frames(record)
        if points != self.points:
            raise ValueError("Trajectory lattice order does not match the CSV header")

        rows = 0
        for sample in range(values.shape[0]):
            for i, t in enumerate(times):
                cells = values[sample, i].tolist()
                self._writer.writerow([sample, repr(float(t))] + [
                    repr(c) if kind == KIND_FLOAT else c for c in cells
                ])
                rows += 1
        return rows

    def get_info(self) -> str:
        return f"{super().get_info()}?points={len(self.points)}"


class TrajectoryBinaryOutput(ResultOutput):
    """Little-endian binary trajectory dump; one trajectory per file."""

    binary = True

    def __init__(self) -> None:
        super().__init__()
        self._written = False

    def _begin(self, f: IO[Any]) -> None:
        self._written = False

    def write(self, record: Trajectory) -> int:
        """
        Write the trajectory.

        Returns:
            Number of bytes written

        Raises:
            RuntimeError: If the file is not open or already holds a trajectory
        """
        f = self._require_open()
        if self._written:
            raise RuntimeError("Binary dump holds exactly one trajectory")

        times, points, values, kind = _frames(record)
        dtype = '<f8' if kind == KIND_FLOAT else '<i8'
        chunks = [
            BINARY_HEADER.pack(
                BINARY_MAGIC, BINARY_VERSION, kind,
                values.shape[0], len(times), len(points)
            ),
            b''.join(BINARY_POINT.pack(p.a1, p.a2) for p in points),
            np.ascontiguousarray(times, dtype='<f8').tobytes(),
            np.ascontiguousarray(values, dtype=dtype).tobytes(),
        ]
        try:
            size = 0
            for chunk in chunks:
                f.write(chunk)
                size += len(chunk)
        except OSError as e:
            raise RuntimeError(f"Error writing to file: {e}")
        self._written = True
        return size

    def get_info(self) -> str:
        return f"{super().get_info()}?type=binary"


def read_binary_trajectory(path: str) -> Tuple[np.ndarray, Tuple[LatticePoint, ...], np.ndarray]:
    """
    Load a dump written by TrajectoryBinaryOutput.

    Returns:
        (times, points, values) with values shaped (samples, times, points)

    Raises:
        ValueError: On a bad magic number or version
    """
    data = Path(path).read_bytes()
    magic, version, kind, n_samples, n_times, n_points = BINARY_HEADER.unpack_from(data, 0)
    if magic != BINARY_MAGIC:
        raise ValueError(f"{path} is not a trajectory dump")
    if version != BINARY_VERSION:
        raise ValueError(f"Unsupported trajectory dump version {version}")

    offset = BINARY_HEADER.size
    points = []
    for _ in range(n_points):
        a1, a2 = BINARY_POINT.unpack_from(data, offset)
        points.append(LatticePoint(a1, a2))
        offset += BINARY_POINT.size

    times = np.frombuffer(data, dtype='<f8', count=n_times, offset=offset)
    offset += 8 * n_times
    dtype = '<f8' if kind == KIND_FLOAT else '<i8'
    values = np.frombuffer(
        data, dtype=dtype, count=n_samples * n_times * n_points, offset=offset
    ).reshape(n_samples, n_times, n_points)
    return times.copy(), tuple(points), values.copy()
