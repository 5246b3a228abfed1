"""Benchmark of input normalization methods for recurrent stock-index forecasters."""

from .errors import NormbenchError
from .normalizers import Method, ScalerParams
from .series_data import OhlcRecord, SampleSet, SplitIndices, TimeSeriesTable

__all__ = ["Method", "NormbenchError", "OhlcRecord", "SampleSet", "ScalerParams",
           "SplitIndices", "TimeSeriesTable"]
__version__ = "0.1.0"
