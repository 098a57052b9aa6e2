"""
Result writers.

Tables (CSV with a config-hash comment line), JSON documents and trajectory
dumps (CSV or little-endian binary).
"""
from whitlab.output.base import ResultOutput
from whitlab.output.table import CsvOutput, JsonOutput, read_config_hash
from whitlab.output.trajectory import (
    TrajectoryBinaryOutput,
    TrajectoryCsvOutput,
    read_binary_trajectory,
)

__all__ = [
    'ResultOutput',
    'CsvOutput',
    'JsonOutput',
    'read_config_hash',
    'TrajectoryCsvOutput',
    'TrajectoryBinaryOutput',
    'read_binary_trajectory',
]
