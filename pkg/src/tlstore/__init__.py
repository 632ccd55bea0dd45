"""tlstore: a two-level block storage engine and its analytic model.

The package has three layers that can be used independently:

- ``tlstore.model``: closed-form per-node and aggregate throughput
  estimates for node-local, parallel-file-system, in-memory, and
  two-level storage, plus a crossover solver.
- ``tlstore.store`` (with ``backing`` and ``manifest``): a working
  desk-scale engine — a block-granular memory tier with LRU eviction
  and pinning over a striped, checksummed backing store.
- ``tlstore.bench``: benchmark drivers that measure the engine and
  cross-check it against the model.
"""

from .backing import (
    BackingStore,
    DirectoryTarget,
    SimulatedTarget,
    StartPolicy,
    StripeLayout,
    plan_stripes,
)
from .bench import (
    BenchTarget,
    CacheDiscipline,
    MountainPoint,
    MountainSpec,
    SeqBenchResult,
    SeqBenchSpec,
    measure_level_rates,
    run_mountain,
    run_seqbench,
)
from .clock import RateLimitedDevice, VirtualClock, WallClock
from .config import CliConfig, build_store, load_config, parse_size
from .errors import (
    CapacityError,
    ConfigError,
    DataLossError,
    IntegrityError,
    PartialPutError,
    PinError,
    StoreError,
    TierMissError,
    UsageError,
)
from .model import (
    BindingResource,
    ClusterParams,
    CrossoverResult,
    Direction,
    Locality,
    ModelQuery,
    StorageKind,
    ThroughputReport,
    aggregate,
    crossover_nodes,
    hdfs_read,
    hdfs_write,
    ofs_throughput,
    sweep,
    tachyon_read,
    tachyon_write,
    tls_read,
    tls_write,
)
from .store import (
    FileMetadata,
    ReadMode,
    Residency,
    Store,
    StoreConfig,
    StoreStats,
    WriteMode,
)

__version__ = "0.1.0"

__all__ = [
    "BackingStore",
    "BenchTarget",
    "BindingResource",
    "CacheDiscipline",
    "CapacityError",
    "CliConfig",
    "ClusterParams",
    "ConfigError",
    "CrossoverResult",
    "DataLossError",
    "DirectoryTarget",
    "Direction",
    "FileMetadata",
    "IntegrityError",
    "Locality",
    "ModelQuery",
    "MountainPoint",
    "MountainSpec",
    "PartialPutError",
    "PinError",
    "RateLimitedDevice",
    "ReadMode",
    "Residency",
    "SeqBenchResult",
    "SeqBenchSpec",
    "SimulatedTarget",
    "StartPolicy",
    "StorageKind",
    "Store",
    "StoreConfig",
    "StoreError",
    "StoreStats",
    "StripeLayout",
    "ThroughputReport",
    "TierMissError",
    "UsageError",
    "VirtualClock",
    "WallClock",
    "WriteMode",
    "aggregate",
    "build_store",
    "crossover_nodes",
    "hdfs_read",
    "hdfs_write",
    "load_config",
    "measure_level_rates",
    "ofs_throughput",
    "parse_size",
    "plan_stripes",
    "run_mountain",
    "run_seqbench",
    "sweep",
    "tachyon_read",
    "tachyon_write",
    "tls_read",
    "tls_write",
    "__version__",
]
