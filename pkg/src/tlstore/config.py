"""Shared textual configuration: flat ``key = value`` lines, ``#``
comments, unknown keys rejected by name.

One file drives everything the CLI does: cluster parameters for the
analytic model, store sizing, server targets (simulated rates or real
directories), clock choice, and benchmark grids.  Sizes accept decimal
(KB/MB/GB) and binary (KiB/MiB/GiB) suffixes; bare numbers are bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .backing import BackingStore, DirectoryTarget, SimulatedTarget, StartPolicy
from .clock import RateLimitedDevice, VirtualClock, WallClock
from .errors import ConfigError
from .model import ClusterParams
from .store import ReadMode, Store, StoreConfig, WriteMode

MIB = 1024 * 1024

_SIZE_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([A-Za-z]*)\s*$")
_SIZE_FACTORS = {
    "": 1, "b": 1,
    "k": 1000, "kb": 1000, "m": 1000 ** 2, "mb": 1000 ** 2,
    "g": 1000 ** 3, "gb": 1000 ** 3,
    "ki": 1024, "kib": 1024, "mi": 1024 ** 2, "mib": 1024 ** 2,
    "gi": 1024 ** 3, "gib": 1024 ** 3,
}


def parse_size(text: str) -> int:
    """Byte count from e.g. '4194304', '4MiB', '1.5 GB'."""
    m = _SIZE_RE.match(str(text))
    if not m:
        raise ConfigError(f"bad size {text!r}")
    value, suffix = m.groups()
    try:
        factor = _SIZE_FACTORS[suffix.lower()]
    except KeyError:
        raise ConfigError(f"bad size suffix {suffix!r} in {text!r}")
    nbytes = float(value) * factor
    if nbytes != int(nbytes):
        raise ConfigError(f"size {text!r} is not a whole number of bytes")
    return int(nbytes)


def parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


def _parse_size_list(text: str) -> tuple[int, ...]:
    items = [part.strip() for part in str(text).split(",") if part.strip()]
    if not items:
        raise ConfigError(f"empty size list {text!r}")
    return tuple(parse_size(part) for part in items)


@dataclass
class CliConfig:
    """Everything the CLI can be told, with desk-scale defaults.

    Default device rates mirror the modeled hardware: the backing
    targets move data like data-node disk arrays (400/200 MB/s plus a
    small fixed latency) and the tier like local memory (6267 MB/s), so
    a default virtual-clock benchmark produces the expected two-level
    behavior out of the box.
    """

    # cluster parameters (analytic model)
    n_compute: int = 16
    m_data: int = 2
    backplane_bw: float = 800_000.0
    nic_bw: float = 1170.0
    compute_disk_read: float = 237.0
    compute_disk_write: float = 116.0
    data_disk_read: float = 400.0
    data_disk_write: float = 200.0
    mem_bw: float = 6267.0
    replication: int = 3
    # store sizing
    block_size: int = 4 * MIB
    tier_capacity: int = 64 * MIB
    app_buffer: int = 1 * MIB
    backing_buffer: int = 4 * MIB
    default_write_mode: WriteMode = WriteMode.WRITE_THROUGH
    default_read_mode: ReadMode = ReadMode.TIERED_CACHING
    # backing layout and targets
    stripe_size: int = 1 * MIB
    start_policy: StartPolicy = StartPolicy.ROTATE_PER_BLOCK
    servers: int = 2  # simulated server count, used when no dirs given
    server_dirs: tuple[str, ...] = ()
    fsync: bool = True
    backing_read_mbps: float = 400.0
    backing_write_mbps: float = 200.0
    backing_latency_us: float = 100.0
    # tier device (0 disables charging for tier traffic)
    tier_read_mbps: float = 6267.0
    tier_write_mbps: float = 6267.0
    tier_latency_us: float = 0.0
    # clock and persistence
    clock: str = "virtual"
    manifest: Optional[str] = None
    # benchmark grids
    mountain_data_sizes: tuple[int, ...] = tuple(
        4 * MIB * 2 ** i for i in range(9))  # 4 MiB .. 1 GiB
    mountain_skip_sizes: tuple[int, ...] = (
        0, 64 * 1024, 256 * 1024, 1 * MIB, 4 * MIB)
    mountain_repetitions: int = 5
    seq_target: str = "backing"
    seq_file_count: int = 16
    seq_file_size: int = 16 * MIB
    seq_direction: str = "read"
    seq_cache_discipline: str = "best_effort_bypass"
    seq_parallel_streams: int = 1


def _parse_write_mode(text: str) -> WriteMode:
    try:
        return WriteMode(str(text).strip())
    except ValueError:
        raise ConfigError(f"bad write mode {text!r}")


def _parse_read_mode(text: str) -> ReadMode:
    try:
        return ReadMode(str(text).strip())
    except ValueError:
        raise ConfigError(f"bad read mode {text!r}")


def _parse_start_policy(text: str) -> StartPolicy:
    try:
        return StartPolicy(str(text).strip())
    except ValueError:
        raise ConfigError(f"bad start policy {text!r}")


def _parse_clock(text: str) -> str:
    low = str(text).strip().lower()
    if low not in ("virtual", "wall"):
        raise ConfigError(f"bad clock {text!r} (virtual or wall)")
    return low


def _parse_dirs(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in str(text).split(",") if part.strip())


_PARSERS = {
    "n_compute": int, "m_data": int, "replication": int,
    "backplane_bw": float, "nic_bw": float,
    "compute_disk_read": float, "compute_disk_write": float,
    "data_disk_read": float, "data_disk_write": float, "mem_bw": float,
    "block_size": parse_size, "tier_capacity": parse_size,
    "app_buffer": parse_size, "backing_buffer": parse_size,
    "default_write_mode": _parse_write_mode,
    "default_read_mode": _parse_read_mode,
    "stripe_size": parse_size, "start_policy": _parse_start_policy,
    "servers": int, "server_dirs": _parse_dirs, "fsync": parse_bool,
    "backing_read_mbps": float, "backing_write_mbps": float,
    "backing_latency_us": float,
    "tier_read_mbps": float, "tier_write_mbps": float,
    "tier_latency_us": float,
    "clock": _parse_clock, "manifest": str,
    "mountain_data_sizes": _parse_size_list,
    "mountain_skip_sizes": _parse_size_list,
    "mountain_repetitions": int,
    "seq_target": str, "seq_file_count": int,
    "seq_file_size": parse_size, "seq_direction": str,
    "seq_cache_discipline": str, "seq_parallel_streams": int,
}

assert set(_PARSERS) == {f.name for f in fields(CliConfig)}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse key = value lines into typed values; unknown keys are
    rejected with the offending key named."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source} line {lineno}: expected key = value, got "
                f"{line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"{source} line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ConfigError as exc:
            raise ConfigError(f"{source} line {lineno}: {exc}")
        except (TypeError, ValueError):
            raise ConfigError(
                f"{source} line {lineno}: bad value {value!r} for {key!r}")
    return values


def load_config(path=None, overrides: Optional[dict] = None) -> CliConfig:
    """Build a CliConfig from an optional file plus typed overrides
    (flags win over the file, the file wins over defaults)."""
    cfg = CliConfig()
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for key, value in parse_config_text(text, source=str(path)).items():
            setattr(cfg, key, value)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg


def cluster_params(cfg: CliConfig) -> ClusterParams:
    return ClusterParams(
        n_compute=cfg.n_compute, m_data=cfg.m_data,
        backplane_bw=cfg.backplane_bw, nic_bw=cfg.nic_bw,
        compute_disk_read=cfg.compute_disk_read,
        compute_disk_write=cfg.compute_disk_write,
        data_disk_read=cfg.data_disk_read,
        data_disk_write=cfg.data_disk_write,
        mem_bw=cfg.mem_bw, replication=cfg.replication)


def build_clock(cfg: CliConfig):
    return VirtualClock() if cfg.clock == "virtual" else WallClock()


def build_store(cfg: CliConfig, clock=None) -> Store:
    """Assemble a store from configuration.

    Directory targets are used when ``server_dirs`` is set, otherwise
    ``servers`` simulated targets with the configured rates.  A store
    whose manifest file already exists is reloaded from it.
    """
    clock = clock or build_clock(cfg)
    if cfg.server_dirs:
        targets = [DirectoryTarget(i, root, fsync=cfg.fsync)
                   for i, root in enumerate(cfg.server_dirs)]
    else:
        if cfg.servers < 1:
            raise ConfigError("servers must be >= 1")
        targets = [SimulatedTarget(i, clock, cfg.backing_read_mbps,
                                   cfg.backing_write_mbps,
                                   cfg.backing_latency_us)
                   for i in range(cfg.servers)]
    backing = BackingStore(targets, cfg.stripe_size, cfg.start_policy)
    store_cfg = StoreConfig(
        block_size=cfg.block_size, tier_capacity=cfg.tier_capacity,
        app_buffer=cfg.app_buffer, backing_buffer=cfg.backing_buffer,
        default_write_mode=cfg.default_write_mode,
        default_read_mode=cfg.default_read_mode)
    tier_device = None
    if cfg.tier_read_mbps > 0 and cfg.tier_write_mbps > 0:
        tier_device = RateLimitedDevice(clock, cfg.tier_read_mbps,
                                        cfg.tier_write_mbps,
                                        cfg.tier_latency_us)
    manifest = Path(cfg.manifest) if cfg.manifest else None
    if manifest is not None and manifest.exists():
        return Store.load(store_cfg, backing, manifest, clock=clock,
                          tier_device=tier_device)
    return Store(store_cfg, backing, clock=clock, tier_device=tier_device,
                 manifest_path=manifest)
