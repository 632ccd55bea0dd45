"""Command line front end.

One binary, one subcommand family per module:

- ``model eval | crossover | sweep``: analytic throughput queries
- ``store put | get | seal | checkpoint | evict | stat``: operate on a
  manifest-backed store over directory servers
- ``bench mountain | seq``: run the benchmarks and emit CSV

All subcommands share a ``key = value`` configuration file (``--config``)
whose keys can be overridden with repeated ``--set key=value`` flags.
Tabular output goes to stdout or ``--out``; errors are printed to stderr
as ``error: <code>: <detail>`` with exit codes 0 (ok), 2 (usage),
3 (data/integrity) and 4 (capacity).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .bench import (
    BenchTarget,
    CacheDiscipline,
    MountainSpec,
    SeqBenchSpec,
    emit_csv,
    mountain_csv_lines,
    run_mountain,
    run_seqbench,
    seqbench_csv_lines,
)
from .config import (
    CliConfig,
    build_store,
    cluster_params,
    load_config,
    parse_config_text,
    parse_size,
)
from .errors import StoreError, UsageError
from .model import (
    Direction,
    Locality,
    ModelQuery,
    StorageKind,
    aggregate,
    crossover_nodes,
    format_mbps,
    sweep,
    sweep_csv_lines,
)


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so every failure funnels
    through the one error formatter."""

    def error(self, message):
        raise UsageError(message)


def _emit(lines, out: Optional[str]) -> None:
    emit_csv(lines, out if out else sys.stdout)


def _load(args) -> CliConfig:
    overrides = {}
    for item in getattr(args, "set", None) or []:
        overrides.update(parse_config_text(item, source="--set"))
    # explicit cluster flags win over --set and the file
    for key in ("n_compute", "m_data", "replication", "backplane_bw",
                "nic_bw", "compute_disk_read", "compute_disk_write",
                "data_disk_read", "data_disk_write", "mem_bw"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return load_config(getattr(args, "config", None), overrides)


def _query_from_args(args, kind: StorageKind) -> ModelQuery:
    return ModelQuery(
        kind=kind,
        direction=Direction(args.direction),
        locality=Locality(getattr(args, "locality", "local")),
        tachyon_fraction=args.f,
        pfs_aggregate_bw=args.pfs_mbps,
    )


def cmd_model_eval(args) -> int:
    cfg = _load(args)
    params = cluster_params(cfg)
    report = aggregate(_query_from_args(args, StorageKind(args.kind)), params)
    _emit([
        f"kind={args.kind}",
        f"direction={args.direction}",
        f"per_node_mbps={format_mbps(report.per_node)}",
        f"aggregate_mbps={format_mbps(report.aggregate)}",
        f"binding_resource={report.binding_resource.value}",
    ], args.out)
    return 0


def cmd_model_crossover(args) -> int:
    cfg = _load(args)
    params = cluster_params(cfg)
    rival = _query_from_args(args, StorageKind(args.rival))
    result = crossover_nodes(rival, params, args.ceiling)
    if result is None:
        # a no-crossover answer is an answer, not a failure
        _emit(["crossover=none", f"ceiling={args.ceiling}"], args.out)
        return 0
    _emit([
        "crossover=found",
        f"nodes={result.node_count}",
        f"node_local_aggregate_mbps={format_mbps(result.hdfs_aggregate_at_n)}",
        f"rival_aggregate_mbps={format_mbps(result.rival_aggregate_at_n)}",
    ], args.out)
    return 0


def _parse_n_range(text: str) -> list[int]:
    """Node counts from '1:500' (inclusive) or '1,5,25'."""
    text = text.strip()
    try:
        if ":" in text:
            lo_text, _, hi_text = text.partition(":")
            lo, hi = int(lo_text), int(hi_text)
            if lo < 1 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise UsageError(f"bad node range {text!r} (use lo:hi or a,b,c)")


def cmd_model_sweep(args) -> int:
    cfg = _load(args)
    params = cluster_params(cfg)
    queries = [_query_from_args(args, StorageKind(kind))
               for kind in dict.fromkeys(args.kinds)]
    rows = sweep(params, queries, _parse_n_range(args.n))
    _emit(sweep_csv_lines(rows), args.out)
    return 0


def _open_store(cfg: CliConfig):
    if not cfg.server_dirs or not cfg.manifest:
        raise UsageError(
            "store subcommands need server_dirs and manifest set in the "
            "config so state survives between invocations")
    return build_store(cfg)


def cmd_store_put(args) -> int:
    cfg = _load(args)
    store = _open_store(cfg)
    source = Path(args.file)
    if not source.is_file():
        raise UsageError(f"no such file: {source}")
    logical = args.path or source.name
    data = source.read_bytes()
    handle = store.create(logical)
    for start in range(0, len(data), cfg.app_buffer):
        handle.append(data[start:start + cfg.app_buffer])
    handle.seal()
    _emit([f"stored={logical}", f"bytes={len(data)}"], args.out)
    return 0


def cmd_store_get(args) -> int:
    cfg = _load(args)
    store = _open_store(cfg)
    data = store.read(args.path)
    dest = Path(args.dest or Path(args.path).name)
    dest.write_bytes(data)
    _emit([f"retrieved={args.path}", f"bytes={len(data)}",
           f"dest={dest}"], args.out)
    return 0


def cmd_store_seal(args) -> int:
    cfg = _load(args)
    store = _open_store(cfg)
    meta = store.seal(args.path)
    _emit([f"sealed={args.path}", f"bytes={meta.length}",
           f"blocks={len(meta.blocks)}"], args.out)
    return 0


def cmd_store_checkpoint(args) -> int:
    cfg = _load(args)
    store = _open_store(cfg)
    flushed = store.checkpoint(args.path)
    _emit([f"checkpointed={args.path}", f"blocks_flushed={flushed}"],
          args.out)
    return 0


def cmd_store_evict(args) -> int:
    cfg = _load(args)
    store = _open_store(cfg)
    victims = store.evict(parse_size(args.bytes))
    store.save_manifest()
    lines = [f"evicted={len(victims)}"]
    lines.extend(f"victim={block_id}" for block_id in victims)
    _emit(lines, args.out)
    return 0


def cmd_store_stat(args) -> int:
    cfg = _load(args)
    store = _open_store(cfg)
    stats = store.stats()
    lines = [
        f"files={len(store.files())}",
        f"tier_used_bytes={store.tier_used_bytes()}",
        f"tier_capacity={store.config.tier_capacity}",
        f"tier_hits={stats.tier_hits}",
        f"backing_fetches={stats.backing_fetches}",
        f"tier_bytes={stats.tier_bytes}",
        f"backing_bytes={stats.backing_bytes}",
        f"evictions={stats.evictions}",
        f"lost_blocks={stats.lost_blocks}",
    ]
    for path in store.files():
        meta = store.metadata(path)
        ratio = store.residency_ratio(path)
        lines.append(f"file\t{path}\t{meta.length}\t"
                     f"{'sealed' if meta.sealed else 'open'}\t"
                     f"{ratio:.4f}")
    _emit(lines, args.out)
    return 0


def cmd_bench_mountain(args) -> int:
    cfg = _load(args)
    spec = MountainSpec(cfg.mountain_data_sizes, cfg.mountain_skip_sizes,
                        cfg.mountain_repetitions)
    points = run_mountain(spec, lambda: build_store(cfg))
    _emit(mountain_csv_lines(points), args.out)
    return 0


def cmd_bench_seq(args) -> int:
    cfg = _load(args)
    try:
        target = BenchTarget(cfg.seq_target)
        direction = Direction(cfg.seq_direction)
        discipline = CacheDiscipline(cfg.seq_cache_discipline)
    except ValueError as exc:
        raise UsageError(str(exc))
    spec = SeqBenchSpec(target=target, file_size=cfg.seq_file_size,
                        file_count=cfg.seq_file_count, direction=direction,
                        cache_discipline=discipline,
                        parallel_streams=cfg.seq_parallel_streams)
    result = run_seqbench(spec, build_store(cfg))
    _emit(seqbench_csv_lines(result), args.out)
    return 0


def _add_common(parser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="key = value configuration file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--out", metavar="FILE",
                        help="write output here instead of stdout")


def _add_cluster_flags(parser) -> None:
    group = parser.add_argument_group("cluster parameter overrides")
    for flag, kind in (("n_compute", int), ("m_data", int),
                       ("replication", int), ("backplane_bw", float),
                       ("nic_bw", float), ("compute_disk_read", float),
                       ("compute_disk_write", float),
                       ("data_disk_read", float), ("data_disk_write", float),
                       ("mem_bw", float)):
        group.add_argument("--" + flag.replace("_", "-"), dest=flag,
                           type=kind, default=None)


def _add_query_flags(parser, with_kind: bool) -> None:
    if with_kind:
        parser.add_argument("--kind", required=True,
                            choices=[k.value for k in StorageKind])
    parser.add_argument("--direction", default="read",
                        choices=[d.value for d in Direction])
    parser.add_argument("--f", type=float, default=0.0,
                        help="memory-resident fraction of the dataset")
    parser.add_argument("--pfs-mbps", dest="pfs_mbps", type=float,
                        default=None,
                        help="aggregate parallel-filesystem bandwidth")


def build_parser() -> _Parser:
    parser = _Parser(prog="tlstore")
    top = parser.add_subparsers(dest="family", required=True)

    model = top.add_parser("model", help="analytic throughput model")
    model_sub = model.add_subparsers(dest="command", required=True)

    p_eval = model_sub.add_parser("eval", help="one throughput query")
    _add_common(p_eval)
    _add_cluster_flags(p_eval)
    _add_query_flags(p_eval, with_kind=True)
    p_eval.add_argument("--locality", default="local",
                        choices=[loc.value for loc in Locality])
    p_eval.set_defaults(func=cmd_model_eval)

    p_cross = model_sub.add_parser(
        "crossover",
        help="smallest node count where node-local beats the rival")
    _add_common(p_cross)
    _add_cluster_flags(p_cross)
    p_cross.add_argument("--rival", required=True,
                         choices=[StorageKind.OFS.value,
                                  StorageKind.TLS.value])
    p_cross.add_argument("--direction", default="read",
                         choices=[d.value for d in Direction])
    p_cross.add_argument("--f", type=float, default=0.0)
    p_cross.add_argument("--pfs-mbps", dest="pfs_mbps", type=float,
                         default=None)
    p_cross.add_argument("--ceiling", type=int, default=10_000)
    p_cross.set_defaults(func=cmd_model_crossover)

    p_sweep = model_sub.add_parser("sweep", help="CSV over node counts")
    _add_common(p_sweep)
    _add_cluster_flags(p_sweep)
    _add_query_flags(p_sweep, with_kind=False)
    p_sweep.add_argument("--n", required=True, metavar="LO:HI|A,B,C",
                         help="node counts to evaluate")
    p_sweep.add_argument("--kinds", nargs="+",
                         default=["hdfs", "ofs"],
                         choices=[k.value for k in StorageKind])
    p_sweep.set_defaults(func=cmd_model_sweep)

    store = top.add_parser("store", help="manifest-backed store operations")
    store_sub = store.add_subparsers(dest="command", required=True)

    p_put = store_sub.add_parser("put", help="store a local file")
    _add_common(p_put)
    p_put.add_argument("file", help="local file to store")
    p_put.add_argument("--path", help="logical path (default: file name)")
    p_put.set_defaults(func=cmd_store_put)

    p_get = store_sub.add_parser("get", help="retrieve a stored file")
    _add_common(p_get)
    p_get.add_argument("path", help="logical path to read")
    p_get.add_argument("dest", nargs="?",
                       help="destination file (default: base name)")
    p_get.set_defaults(func=cmd_store_get)

    p_seal = store_sub.add_parser("seal", help="seal an open file")
    _add_common(p_seal)
    p_seal.add_argument("path")
    p_seal.set_defaults(func=cmd_store_seal)

    p_ckpt = store_sub.add_parser(
        "checkpoint", help="flush tier-only blocks of a file to backing")
    _add_common(p_ckpt)
    p_ckpt.add_argument("path")
    p_ckpt.set_defaults(func=cmd_store_checkpoint)

    p_evict = store_sub.add_parser(
        "evict", help="free tier space down to the requested headroom")
    _add_common(p_evict)
    p_evict.add_argument("--bytes", required=True,
                         help="headroom to free (size suffixes allowed)")
    p_evict.set_defaults(func=cmd_store_evict)

    p_stat = store_sub.add_parser("stat", help="store counters and files")
    _add_common(p_stat)
    p_stat.set_defaults(func=cmd_store_stat)

    bench = top.add_parser("bench", help="benchmarks")
    bench_sub = bench.add_subparsers(dest="command", required=True)

    p_mountain = bench_sub.add_parser(
        "mountain", help="read throughput over a (data size, skip) grid")
    _add_common(p_mountain)
    p_mountain.set_defaults(func=cmd_bench_mountain)

    p_seq = bench_sub.add_parser(
        "seq", help="sequential file write/read throughput")
    _add_common(p_seq)
    p_seq.set_defaults(func=cmd_bench_seq)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except StoreError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
