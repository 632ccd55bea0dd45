"""Analytic I/O throughput model for four cluster storage layouts.

Pure, stateless functions estimate the average per-node throughput a
compute node receives from: node-local disk storage (``hdfs``), a
network-attached parallel file system (``ofs``), node-local memory storage
(``tachyon``), and a two-level combination of memory over the parallel
file system (``tls``).  On top of the per-node equations sit aggregate
(whole-cluster) estimates, a crossover solver that finds the smallest
cluster size at which node-local aggregate bandwidth overtakes a
network-bound rival, and a sweep emitter for plotting.

Conventions: bandwidths are decimal MB/s (1 MB = 10^6 bytes, so
1 GB/s = 1000 MB/s).  The model deliberately ignores network-level
interference (TCP congestion, incast); every result is a best-case bound.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import UsageError


class StorageKind(Enum):
    HDFS = "hdfs"
    OFS = "ofs"
    TACHYON = "tachyon"
    TLS = "tls"


class Direction(Enum):
    READ = "read"
    WRITE = "write"


class Locality(Enum):
    LOCAL = "local"
    REMOTE = "remote"


class BindingResource(Enum):
    """Which resource the min-term analysis identifies as the bottleneck."""

    NIC = "nic"
    BACKPLANE_SHARE = "backplane_share"
    LOCAL_DISK = "local_disk"
    DATA_NIC_SHARE = "data_nic_share"
    DATA_DISK_SHARE = "data_disk_share"
    MEMORY = "memory"
    PFS_CAP = "pfs_cap"


@dataclass(frozen=True)
class ClusterParams:
    """Hardware parameters of the modeled cluster.

    Disk throughput is split into read/write components for both compute
    and data nodes because measured values differ substantially; the
    defaults are calibrated from measurements on a 10 GbE cluster with
    single-SATA compute nodes and RAID-backed data nodes.
    """

    n_compute: int = 16
    m_data: int = 2
    backplane_bw: float = 800_000.0  # 6.4 Tb/s switch backplane
    nic_bw: float = 1170.0
    compute_disk_read: float = 237.0
    compute_disk_write: float = 116.0
    data_disk_read: float = 400.0
    data_disk_write: float = 200.0
    mem_bw: float = 6267.0
    replication: int = 3

    def __post_init__(self):
        if self.n_compute < 1:
            raise UsageError("n_compute must be >= 1")
        if self.m_data < 1:
            raise UsageError("m_data must be >= 1")
        if self.replication < 1:
            raise UsageError("replication must be >= 1")
        for name in ("backplane_bw", "nic_bw", "compute_disk_read",
                     "compute_disk_write", "data_disk_read",
                     "data_disk_write", "mem_bw"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be strictly positive")

    def with_nodes(self, n_compute: int) -> "ClusterParams":
        return dataclasses.replace(self, n_compute=n_compute)


@dataclass(frozen=True)
class ModelQuery:
    """One model evaluation request."""

    kind: StorageKind
    direction: Direction
    locality: Locality = Locality.LOCAL
    tachyon_fraction: float = 0.0
    data_size_mb: Optional[float] = None  # carried for report context only
    pfs_aggregate_bw: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.tachyon_fraction <= 1.0:
            raise UsageError("tachyon_fraction must lie in [0, 1]")
        if self.pfs_aggregate_bw is not None and self.pfs_aggregate_bw <= 0:
            raise UsageError("pfs_aggregate_bw must be strictly positive")


@dataclass(frozen=True)
class ThroughputReport:
    per_node: float
    aggregate: float
    binding_resource: BindingResource
    inputs_echo: ModelQuery


@dataclass(frozen=True)
class CrossoverResult:
    """Smallest node count where the node-local aggregate strictly exceeds
    the rival's aggregate, with both aggregates at that count."""

    node_count: int
    hdfs_aggregate_at_n: float
    rival_aggregate_at_n: float


@dataclass(frozen=True)
class SweepRow:
    n: int
    kind: StorageKind
    direction: Direction
    per_node: float
    aggregate: float
    binding_resource: BindingResource


def _least(terms: Sequence[tuple[float, BindingResource]]) -> tuple[float, BindingResource]:
    # first minimal term wins so binding attribution is deterministic
    best_value, best_label = terms[0]
    for value, label in terms[1:]:
        if value < best_value:
            best_value, best_label = value, label
    return best_value, best_label


def _hdfs_read(p: ClusterParams, locality: Locality) -> tuple[float, BindingResource]:
    if locality is Locality.LOCAL:
        return p.compute_disk_read, BindingResource.LOCAL_DISK
    return _least([
        (p.nic_bw, BindingResource.NIC),
        (p.backplane_bw / p.n_compute, BindingResource.BACKPLANE_SHARE),
        (p.compute_disk_read, BindingResource.LOCAL_DISK),
    ])


def _hdfs_write(p: ClusterParams) -> tuple[float, BindingResource]:
    r = p.replication
    if r == 1:
        # no mirror copies, so no network traffic at all
        return p.compute_disk_write, BindingResource.LOCAL_DISK
    return _least([
        (p.nic_bw / (r - 1), BindingResource.NIC),
        (p.backplane_bw / ((r - 1) * p.n_compute), BindingResource.BACKPLANE_SHARE),
        (p.compute_disk_write / r, BindingResource.LOCAL_DISK),
    ])


def _ofs(p: ClusterParams, direction: Direction) -> tuple[float, BindingResource]:
    disk = p.data_disk_read if direction is Direction.READ else p.data_disk_write
    # each compute node's share of the data-node resources; a node cannot
    # receive more than one unshared stream, so the share is clamped at 1
    share = min(p.m_data / p.n_compute, 1.0)
    return _least([
        (p.nic_bw, BindingResource.NIC),
        (p.backplane_bw / p.n_compute, BindingResource.BACKPLANE_SHARE),
        (share * p.nic_bw, BindingResource.DATA_NIC_SHARE),
        (share * disk, BindingResource.DATA_DISK_SHARE),
    ])


def _tachyon_read(p: ClusterParams, locality: Locality) -> tuple[float, BindingResource]:
    if locality is Locality.LOCAL:
        return p.mem_bw, BindingResource.MEMORY
    return _least([
        (p.nic_bw, BindingResource.NIC),
        (p.backplane_bw / p.n_compute, BindingResource.BACKPLANE_SHARE),
        (p.mem_bw, BindingResource.MEMORY),
    ])


def hdfs_read(p: ClusterParams, locality: Locality = Locality.LOCAL) -> float:
    """Per-node read throughput with node-local disk storage.

    Local access is bound by the local disk alone; remote access is the
    least of NIC bandwidth, the per-node backplane share, and the disk.
    """
    return _hdfs_read(p, locality)[0]


def hdfs_write(p: ClusterParams) -> float:
    """Per-node write throughput with replicated node-local disk storage.

    With replication r the node ships r-1 mirror copies over the network
    while the whole cluster absorbs r copies on disk, so the write rate is
    min(nic/(r-1), backplane/((r-1)N), disk_write/r).
    """
    return _hdfs_write(p)[0]


def ofs_throughput(p: ClusterParams, direction: Direction) -> float:
    """Per-node throughput against the parallel file system.

    All traffic crosses the network: the node's own NIC, its backplane
    share, and its share of the data nodes' NICs and disks all cap it.
    """
    return _ofs(p, direction)[0]


def tachyon_read(p: ClusterParams, locality: Locality = Locality.LOCAL) -> float:
    """Per-node read throughput with in-memory storage."""
    return _tachyon_read(p, locality)[0]


def tachyon_write(p: ClusterParams) -> float:
    """Per-node write throughput with in-memory storage: memory-bound."""
    return p.mem_bw


def tls_write(p: ClusterParams) -> float:
    """Two-level synchronous write: the slower of the memory tier and the
    parallel file system, which in practice is the parallel file system."""
    return min(tachyon_write(p), ofs_throughput(p, Direction.WRITE))


def tls_read(p: ClusterParams, f: float, q_ofs: float) -> float:
    """Two-level read at memory-residency ratio ``f``.

    A fraction f of the data moves at memory speed and the rest at the
    parallel-file-system rate ``q_ofs``; the combined rate is the
    weighted harmonic mean 1 / (f/mem + (1-f)/q_ofs).  Endpoints are
    exact: f=1 gives the memory rate, f=0 gives ``q_ofs``.
    """
    if not 0.0 <= f <= 1.0:
        raise UsageError("residency ratio f must lie in [0, 1]")
    if q_ofs <= 0:
        raise UsageError("q_ofs must be strictly positive")
    if f == 1.0:
        return p.mem_bw
    if f == 0.0:
        return q_ofs
    return 1.0 / (f / p.mem_bw + (1.0 - f) / q_ofs)


def _ofs_aggregate(p: ClusterParams, pfs_bw: float) -> tuple[float, BindingResource]:
    return _least([
        (pfs_bw, BindingResource.PFS_CAP),
        (p.n_compute * p.nic_bw, BindingResource.NIC),
        (p.backplane_bw, BindingResource.BACKPLANE_SHARE),
    ])


def _require_pfs(q: ModelQuery) -> float:
    if q.pfs_aggregate_bw is None:
        raise UsageError(
            f"pfs_aggregate_bw is required for kind={q.kind.value}")
    return q.pfs_aggregate_bw


def aggregate(q: ModelQuery, p: ClusterParams) -> ThroughputReport:
    """Evaluate a query into per-node and aggregate throughput.

    Node-local kinds (hdfs, tachyon) scale linearly: aggregate is N times
    the per-node value, with reads assumed data-local unless the query says
    otherwise.  Network-bound kinds are capped: the ofs aggregate is
    min(pfs cap, N x nic, backplane) and its per-node value is the fair
    share aggregate/N; the two-level read aggregate combines the memory
    tier (scaling with N) and the ofs aggregate harmonically.
    """
    n = p.n_compute
    kind, direction = q.kind, q.direction

    if kind is StorageKind.HDFS:
        per_node, binding = (_hdfs_read(p, q.locality)
                             if direction is Direction.READ else _hdfs_write(p))
        return ThroughputReport(per_node, n * per_node, binding, q)

    if kind is StorageKind.TACHYON:
        if direction is Direction.READ:
            per_node, binding = _tachyon_read(p, q.locality)
        else:
            per_node, binding = p.mem_bw, BindingResource.MEMORY
        return ThroughputReport(per_node, n * per_node, binding, q)

    if kind is StorageKind.OFS:
        agg, binding = _ofs_aggregate(p, _require_pfs(q))
        return ThroughputReport(agg / n, agg, binding, q)

    if kind is StorageKind.TLS:
        if direction is Direction.WRITE:
            ofs_agg, ofs_binding = _ofs_aggregate(p, _require_pfs(q))
            agg, binding = _least([
                (n * p.mem_bw, BindingResource.MEMORY),
                (ofs_agg, ofs_binding),
            ])
            return ThroughputReport(agg / n, agg, binding, q)
        f = q.tachyon_fraction
        if f == 1.0:
            # everything is memory-resident; the pfs term vanishes
            return ThroughputReport(p.mem_bw, n * p.mem_bw,
                                    BindingResource.MEMORY, q)
        ofs_agg, ofs_binding = _ofs_aggregate(p, _require_pfs(q))
        if f == 0.0:
            return ThroughputReport(ofs_agg / n, ofs_agg, ofs_binding, q)
        mem_term = f / (n * p.mem_bw)
        ofs_term = (1.0 - f) / ofs_agg
        agg = 1.0 / (mem_term + ofs_term)
        binding = BindingResource.MEMORY if mem_term > ofs_term else ofs_binding
        return ThroughputReport(agg / n, agg, binding, q)

    raise UsageError(f"unknown storage kind {kind!r}")


def crossover_nodes(rival: ModelQuery, p: ClusterParams,
                    ceiling: int = 10_000) -> Optional[CrossoverResult]:
    """Smallest N where the node-local (hdfs) aggregate strictly exceeds
    the rival's aggregate in the rival's direction.

    The rival must be a network-bound kind (ofs or tls).  Scans integer N
    upward from 1; the rival aggregate is monotone non-decreasing in N
    while the hdfs aggregate grows linearly, so the first crossing found
    is the answer.  Returns None when no crossing occurs by ``ceiling``.
    """
    if rival.kind not in (StorageKind.OFS, StorageKind.TLS):
        raise UsageError("rival must be of kind ofs or tls")
    if ceiling < 1:
        raise UsageError("ceiling must be >= 1")
    hdfs_q = ModelQuery(kind=StorageKind.HDFS, direction=rival.direction,
                        locality=Locality.LOCAL)
    for n in range(1, ceiling + 1):
        pn = p.with_nodes(n)
        hdfs_agg = aggregate(hdfs_q, pn).aggregate
        rival_agg = aggregate(rival, pn).aggregate
        if hdfs_agg > rival_agg:
            return CrossoverResult(n, hdfs_agg, rival_agg)
    return None


def sweep(p: ClusterParams, queries: Iterable[ModelQuery],
          n_values: Iterable[int]) -> list[SweepRow]:
    """Evaluate each query over a range of node counts.

    Returns one row per (n, query), sorted by (n, kind, direction) so the
    emitted table is deterministic.
    """
    rows = []
    for n in n_values:
        if n < 1:
            raise UsageError("node counts in a sweep must be >= 1")
        pn = p.with_nodes(n)
        for q in queries:
            rep = aggregate(q, pn)
            rows.append(SweepRow(n, q.kind, q.direction, rep.per_node,
                                 rep.aggregate, rep.binding_resource))
    rows.sort(key=lambda r: (r.n, r.kind.value, r.direction.value))
    return rows


def format_mbps(value: float) -> str:
    """Render a throughput with up to three decimal places."""
    text = f"{value:.3f}".rstrip("0").rstrip(".")
    return text if text else "0"


SWEEP_CSV_HEADER = "n,kind,direction,per_node_mbps,aggregate_mbps,binding_resource"


def sweep_csv_lines(rows: Sequence[SweepRow]) -> list[str]:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(",".join([
            str(r.n), r.kind.value, r.direction.value,
            format_mbps(r.per_node), format_mbps(r.aggregate),
            r.binding_resource.value,
        ]))
    return lines
