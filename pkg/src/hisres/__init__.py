"""Temporal knowledge graph extrapolation with multi-granularity recent encoding
and query-conditioned global relevance attention."""

from hisres.config import RunConfig
from hisres.data import DatasetBundle, Quadruple, Snapshot, load_dataset
from hisres.model import HisRES

__all__ = ["RunConfig", "DatasetBundle", "Quadruple", "Snapshot", "load_dataset", "HisRES"]
__version__ = "0.1.0"
