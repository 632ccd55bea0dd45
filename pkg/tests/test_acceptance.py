"""End-to-end acceptance gate.

One test per numbered criterion, each at its stated tolerance, each
recording a single PASS/FAIL verdict line that the terminal summary
echoes in an "acceptance criteria" section at the end of the run.
"""

import random
import statistics
import time

import pytest

from conftest import record_acceptance
from lru_reference import LruReference
from test_lru import run_trace, single_block_store

from tlstore.backing import (
    BackingStore,
    SimulatedTarget,
    StartPolicy,
    StripeLayout,
    plan_stripes,
)
from tlstore.bench import (
    BenchTarget,
    MountainSpec,
    SeqBenchSpec,
    measure_level_rates,
    run_mountain,
    run_seqbench,
)
from tlstore.cli import main
from tlstore.clock import RateLimitedDevice, VirtualClock
from tlstore.errors import (
    BackingMissError,
    CapacityError,
    DataLossError,
    OutOfRangeError,
    TierMissError,
)
from tlstore.model import (
    ClusterParams,
    Direction,
    ModelQuery,
    StorageKind,
    aggregate,
    tls_read,
)
from tlstore.store import ReadMode, Residency, Store, StoreConfig, WriteMode

KIB = 1024
MIB = 1024 * KIB


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = (f"criterion {number} {'PASS' if ok else 'FAIL'}: "
            f"{title} ({detail})")
    record_acceptance(line)
    print(line)
    assert ok, line


# -- 1: crossover table ------------------------------------------------------

CROSSOVER_CASES = [
    (["--rival", "ofs", "--pfs-mbps", "10000"], 43),
    (["--rival", "tls", "--f", "0.2", "--pfs-mbps", "10000"], 53),
    (["--rival", "tls", "--f", "0.5", "--pfs-mbps", "10000"], 83),
    (["--rival", "ofs", "--pfs-mbps", "50000"], 211),
    (["--rival", "tls", "--f", "0.2", "--pfs-mbps", "50000"], 262),
    (["--rival", "tls", "--f", "0.5", "--pfs-mbps", "50000"], 414),
    (["--rival", "tls", "--direction", "write", "--pfs-mbps", "10000"], 259),
    (["--rival", "tls", "--direction", "write", "--pfs-mbps", "50000"], 1294),
]


def test_criterion_1_crossover_table(capsys):
    started = time.perf_counter()
    got = []
    for flags, _ in CROSSOVER_CASES:
        code = main(["model", "crossover"] + flags)
        out = capsys.readouterr().out
        assert code == 0
        nodes = dict(line.split("=", 1)
                     for line in out.strip().splitlines())["nodes"]
        got.append(int(nodes))
    elapsed = time.perf_counter() - started
    expected = [n for _, n in CROSSOVER_CASES]
    within = all(abs(g - e) <= 1 for g, e in zip(got, expected))
    verdict(1, "crossover node counts via `model crossover`",
            within and elapsed < 1.0,
            f"got {got}, expected {expected} (tol 1), {elapsed:.2f}s < 1s")


# -- 2: aggregate throughput gains -------------------------------------------

def test_criterion_2_aggregate_gains():
    params = ClusterParams()
    large_n = aggregate(
        ModelQuery(StorageKind.TLS, Direction.READ, tachyon_fraction=0.2,
                   pfs_aggregate_bw=10_000.0),
        params.with_nodes(10_000)).aggregate
    at_83 = aggregate(
        ModelQuery(StorageKind.TLS, Direction.READ, tachyon_fraction=0.5,
                   pfs_aggregate_bw=10_000.0),
        params.with_nodes(83)).aggregate
    err_large = abs(large_n - 12_500.0) / 12_500.0
    err_83 = abs(at_83 - 19_600.0) / 19_600.0
    verdict(2, "two-level read aggregates at f=0.2 and f=0.5",
            err_large <= 0.005 and err_83 <= 0.01,
            f"{large_n:.1f} vs 12500 ({err_large:.2%} <= 0.5%), "
            f"{at_83:.1f} vs 19600 ({err_83:.2%} <= 1%)")


# -- 3: harmonic read identity ------------------------------------------------

def test_criterion_3_read_identity():
    rng = random.Random(0x7e51)
    worst = 0.0
    for _ in range(10_000):
        f = rng.uniform(1e-6, 1.0 - 1e-6)
        nu = rng.uniform(50.0, 50_000.0)
        q_ofs = rng.uniform(1.0, 20_000.0)
        params = ClusterParams(mem_bw=nu)
        q_tls = tls_read(params, f, q_ofs)
        lhs = 1.0 / q_tls
        rhs = f / nu + (1.0 - f) / q_ofs
        worst = max(worst, abs(lhs - rhs) / rhs)
    endpoint_params = ClusterParams(mem_bw=1234.5)
    endpoints_exact = (tls_read(endpoint_params, 0.0, 777.0) == 777.0
                       and tls_read(endpoint_params, 1.0, 777.0) == 1234.5)
    verdict(3, "1/q_tls = f/nu + (1-f)/q_ofs over 10,000 random triples",
            worst <= 1e-9 and endpoints_exact,
            f"worst relative error {worst:.2e} <= 1e-9, endpoints exact: "
            f"{endpoints_exact}")


# -- 4: randomized store round trips ------------------------------------------

BS4 = 1024
CAP4 = 4 * BS4
APP4 = 512


def _sequence_store() -> Store:
    clock = VirtualClock()
    backing = BackingStore(
        [SimulatedTarget(i, clock, 1e6, 1e6) for i in range(2)],
        stripe_size=512)
    config = StoreConfig(block_size=BS4, tier_capacity=CAP4,
                         app_buffer=APP4, backing_buffer=BS4)
    return Store(config, backing, clock=clock)


def _run_sequence(seed: int) -> tuple[int, int, int]:
    """One random operation sequence.

    Returns (byte-verified reads, mismatches, loss checks).  A mismatch
    is any read that returned bytes differing from the independently
    tracked shadow copy, or any post-eviction read of un-checkpointed
    memory-only data that returned bytes at all instead of failing.
    """
    rng = random.Random(seed)
    store = _sequence_store()
    shadow: dict[str, bytearray] = {}
    mode_of: dict[str, WriteMode] = {}
    sealed: set[str] = set()
    counter = 0
    verified = 0
    mismatches = 0
    loss_checks = 0

    def resync_after_capacity_error(path, data):
        # append/seal keep every byte up to the block that failed to fit;
        # reconcile the shadow with the retained prefix
        retained = store.file_length(path) - len(shadow[path])
        assert 0 <= retained <= len(data)
        shadow[path].extend(data[:retained])

    for _ in range(rng.randint(12, 28)):
        roll = rng.random()
        open_paths = [p for p in shadow if p not in sealed]
        if roll < 0.22 or not shadow:
            path = f"f{counter}"
            counter += 1
            mode = rng.choice(list(WriteMode))
            store.create(path, mode)
            shadow[path] = bytearray()
            mode_of[path] = mode
        elif roll < 0.50 and open_paths:
            path = rng.choice(open_paths)
            data = rng.randbytes(rng.randint(0, 2 * CAP4))
            try:
                store.append(path, data)
                shadow[path].extend(data)
            except CapacityError:
                resync_after_capacity_error(path, data)
        elif roll < 0.62 and open_paths:
            path = rng.choice(open_paths)
            try:
                store.seal(path)
                sealed.add(path)
            except CapacityError:
                resync_after_capacity_error(path, b"")
        elif roll < 0.82 and sealed:
            path = rng.choice(sorted(sealed))
            file_len = len(shadow[path])
            offset = rng.randint(0, file_len)
            length = rng.randint(0, file_len - offset)
            read_mode = rng.choice(list(ReadMode))
            try:
                got = store.read(path, offset, length, read_mode)
                verified += 1
                if got != bytes(shadow[path][offset:offset + length]):
                    mismatches += 1
            except TierMissError:
                assert read_mode is ReadMode.MEMORY_ONLY
            except BackingMissError:
                assert read_mode is ReadMode.BYPASS_NO_CACHE
            except DataLossError:
                # only volatile data can vanish, and only via eviction
                assert mode_of[path] is WriteMode.MEMORY_ONLY
                assert store.eviction_log
        elif roll < 0.88:
            store.evict(rng.randrange(0, CAP4 + 1))
        elif roll < 0.94 and shadow:
            store.checkpoint(rng.choice(sorted(shadow)))
        else:
            path = rng.choice(sorted(shadow))
            store.pin(path, on=rng.random() < 0.5)
        if rng.random() < 0.02 and sealed:
            path = rng.choice(sorted(sealed))
            with pytest.raises(OutOfRangeError):
                store.read(path, len(shadow[path]) + 1, 1)

    # settle: drop every pin, then seal what remains so every file is
    # readable; a short tail always fits once nothing is pinned
    for path in sorted(shadow):
        store.pin(path, on=False)
    for path in sorted(shadow):
        if path not in sealed:
            try:
                store.seal(path)
            except CapacityError:
                store.evict(CAP4)
                store.seal(path)
            sealed.add(path)

    # forced-loss check: volatile blocks evicted without a checkpoint
    # must fail loudly, never produce bytes
    volatile = [p for p in sorted(sealed)
                if any(b.residency is Residency.TIER
                       for b in store.metadata(p).blocks)]
    store.evict(CAP4)
    for path in volatile:
        loss_checks += 1
        try:
            store.read(path)
            mismatches += 1
        except DataLossError:
            pass

    # durable files still read back exactly after a full tier flush
    for path in sorted(sealed):
        if path in volatile:
            continue
        blocks = store.metadata(path).blocks
        if any(b.residency is Residency.LOST for b in blocks):
            continue  # volatile data already lost before the settle phase
        got = store.read(path)
        verified += 1
        if got != bytes(shadow[path]):
            mismatches += 1
    return verified, mismatches, loss_checks


def test_criterion_4_randomized_round_trips():
    started = time.perf_counter()
    verified = 0
    mismatches = 0
    loss_checks = 0
    for seed in range(1_000):
        v, m, l = _run_sequence(0x40000 + seed)
        verified += v
        mismatches += m
        loss_checks += l
    elapsed = time.perf_counter() - started
    verdict(4, "1,000 randomized operation sequences round-trip",
            mismatches == 0 and verified > 0 and elapsed < 120.0,
            f"{verified} byte-verified reads, {mismatches} mismatches, "
            f"{loss_checks} forced-loss checks, {elapsed:.1f}s < 120s")


# -- 5: LRU oracle equivalence -------------------------------------------------

def test_criterion_5_lru_oracle():
    failures = 0
    for index in range(100):
        rng = random.Random(0x50000 + index)
        capacity = rng.randint(1, 12)
        store = single_block_store(capacity)
        oracle = LruReference(capacity)
        try:
            run_trace(store, oracle, rng, accesses=1_000)
        except AssertionError:
            failures += 1
    verdict(5, "eviction victims match the reference LRU on 100 traces",
            failures == 0,
            f"{failures} of 100 traces diverged; 1,000 accesses each")


# -- 6: stripe layout invariants ----------------------------------------------

def test_criterion_6_stripe_invariants():
    rng = random.Random(0x60000)
    bad = 0
    for _ in range(500):
        length = rng.randint(1, 192 * KIB)
        stripe = rng.choice(
            [rng.randint(1, 2 * length), 512, 4096, 64 * KIB])
        servers = rng.randint(1, 8)
        layout = StripeLayout(stripe, tuple(range(servers)))
        plan = plan_stripes(length, layout, start=rng.randrange(servers))
        counts = [0] * servers
        for piece in plan:
            counts[piece.server_id] += 1
        balanced = max(counts) - min(counts) <= 1
        tiled = (plan[0].offset == 0
                 and all(a.offset + a.length == b.offset
                         for a, b in zip(plan, plan[1:]))
                 and plan[-1].offset + plan[-1].length == length)

        clock = VirtualClock()
        backing = BackingStore(
            [SimulatedTarget(i, clock, 1e6, 1e6) for i in range(servers)],
            stripe_size=stripe,
            start_policy=rng.choice(list(StartPolicy)))
        payload = rng.randbytes(length)
        backing.put_block("blk", payload)
        identical = backing.get_block("blk") == payload
        lo = rng.randint(0, length)
        hi = rng.randint(lo, length)
        identical = identical and (
            backing.get_range("blk", lo, hi - lo) == payload[lo:hi])
        if not (balanced and tiled and identical):
            bad += 1

    concrete_plan = plan_stripes(
        512 * MIB, StripeLayout(64 * MIB, (0, 1)), start=0)
    per_server = [0, 0]
    for piece in concrete_plan:
        per_server[piece.server_id] += 1
    concrete = len(concrete_plan) == 8 and per_server == [4, 4]
    verdict(6, "500 random stripe layouts balance, tile, and reassemble",
            bad == 0 and concrete,
            f"{bad} of 500 combos failed; 512 MiB / 64 MiB / 2 servers -> "
            f"{len(concrete_plan)} stripes {per_server} per server")


# -- 7: storage-mountain shape --------------------------------------------------

TIER_CAP7 = 16 * MIB
DATA7 = (16 * MIB, 32 * MIB, 64 * MIB, 256 * MIB)
SKIPS7 = (0, 512 * KIB, 4 * MIB)


def _mountain_store() -> Store:
    clock = VirtualClock()
    backing = BackingStore(
        [SimulatedTarget(i, clock, 400.0, 400.0, fixed_latency_us=100.0)
         for i in range(2)],
        stripe_size=256 * KIB)
    config = StoreConfig(block_size=1 * MIB, tier_capacity=TIER_CAP7,
                         app_buffer=256 * KIB, backing_buffer=1 * MIB)
    device = RateLimitedDevice(clock, 8000.0, 8000.0, fixed_latency_us=2.0)
    return Store(config, backing, clock=clock, tier_device=device)


def test_criterion_7_storage_mountain():
    started = time.perf_counter()
    tier_rate, backing_rate = measure_level_rates(_mountain_store, 32 * MIB)
    assert tier_rate >= 8.0 * backing_rate  # stated device precondition
    points = run_mountain(
        MountainSpec(DATA7, SKIPS7, repetitions=3), _mountain_store)
    by_cell = {(p.data_size, p.skip_size): p for p in points}

    high = statistics.median(p.throughput_mbps for p in points
                             if p.data_size <= TIER_CAP7)
    low = statistics.median(p.throughput_mbps for p in points
                            if p.data_size == 16 * TIER_CAP7)
    plateaus = high >= 2.0 * low

    params = ClusterParams(mem_bw=tier_rate)
    worst_model_err = 0.0
    for data_size in DATA7:
        point = by_cell[(data_size, 0)]
        assert point.residency == TIER_CAP7 / data_size
        predicted = tls_read(params, point.residency, backing_rate)
        worst_model_err = max(
            worst_model_err,
            abs(point.throughput_mbps - predicted) / predicted)
    model_ok = worst_model_err <= 0.20

    low_ridge = by_cell[(256 * MIB, 0)].throughput_mbps
    skip_hurts = all(by_cell[(256 * MIB, skip)].throughput_mbps < low_ridge
                     for skip in SKIPS7[1:])

    elapsed = time.perf_counter() - started
    verdict(7, "storage mountain: plateaus, model band, skip penalty",
            plateaus and model_ok and skip_hurts and elapsed < 300.0,
            f"plateau ratio {high / low:.1f}x >= 2x, worst model error "
            f"{worst_model_err:.2%} <= 20%, skip penalty on low ridge: "
            f"{skip_hurts}, {elapsed:.1f}s < 300s")


# -- 8: sequential benchmark calibration ----------------------------------------

def test_criterion_8_seqbench_calibration():
    rate = 500.0

    def calibrated_store() -> Store:
        clock = VirtualClock()
        backing = BackingStore(
            [SimulatedTarget(i, clock, rate, rate, fixed_latency_us=0.0)
             for i in range(2)],
            stripe_size=256 * KIB)
        config = StoreConfig(block_size=1 * MIB, tier_capacity=4 * MIB,
                             app_buffer=256 * KIB, backing_buffer=1 * MIB)
        return Store(config, backing, clock=clock)

    read_result = run_seqbench(
        SeqBenchSpec(target=BenchTarget.BACKING, file_size=2 * MIB,
                     file_count=16),
        calibrated_store())
    write_result = run_seqbench(
        SeqBenchSpec(target=BenchTarget.BACKING, file_size=2 * MIB,
                     file_count=16, direction=Direction.WRITE),
        calibrated_store())
    read_err = abs(read_result.mean_mbps - rate) / rate
    write_err = abs(write_result.mean_mbps - rate) / rate
    files_ok = (len(read_result.files) == 16
                and len(write_result.files) == 16)
    verdict(8, "seqbench measures a rate-R zero-latency target within 5%",
            read_err <= 0.05 and write_err <= 0.05 and files_ok,
            f"read {read_result.mean_mbps:.2f} ({read_err:.2%}), write "
            f"{write_result.mean_mbps:.2f} ({write_err:.2%}) vs R={rate:g}, "
            f"16 files each")
