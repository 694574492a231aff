import random

import pytest

from wsikv.oracle import IsolationPolicy
from wsikv.workload import (
    WorkloadSpec,
    ZipfianKeys,
    ZipfianLatestKeys,
    bench_oracle,
    generate_txn,
    make_distribution,
    run,
)

SI, WSI = IsolationPolicy.SI, IsolationPolicy.WSI

# X^2 critical value at alpha=0.01 for 99 degrees of freedom
CHI2_99_CRIT_01 = 134.642


def test_spec_validation():
    with pytest.raises(ValueError):
        WorkloadSpec(key_space=0)
    with pytest.raises(ValueError):
        WorkloadSpec(key_space=10, mix="weird")
    with pytest.raises(ValueError):
        WorkloadSpec(key_space=10, zipf_constant=1.0)


def test_spec_from_config(tmp_path):
    path = tmp_path / "spec.conf"
    path.write_text(
        "key_space = 5000\n"
        "mix = mixed  # half read-only\n"
        "distribution = zipfian-latest\n"
        "seed = 9\n"
        "txn_count = 123\n"
        "client_count = 4\n"
    )
    spec = WorkloadSpec.from_config(path)
    assert spec.key_space == 5000
    assert spec.distribution == "zipfian-latest"
    assert spec.client_count == 4
    bad = tmp_path / "bad.conf"
    bad.write_text("keyspace = 10\n")
    with pytest.raises(ValueError):
        WorkloadSpec.from_config(bad)


def test_mixed_workload_is_half_read_only():
    spec = WorkloadSpec(key_space=1000, mix="mixed", seed=4)
    rng = random.Random(spec.seed)
    dist = make_distribution(spec)
    long_scripts = with_write = 0
    for _ in range(100_000):
        script = generate_txn(spec, rng, dist)
        if len(script) >= 7:  # long complex scripts carry a write almost surely
            long_scripts += 1
            with_write += any(kind == "w" for kind, _ in script)
    assert long_scripts > 50_000
    assert abs(with_write / long_scripts - 0.5) < 0.01


def test_complex_workload_mixes_reads_and_writes_evenly():
    spec = WorkloadSpec(key_space=1000, mix="complex", seed=5)
    rng = random.Random(spec.seed)
    dist = make_distribution(spec)
    reads = writes = 0
    for _ in range(20_000):
        for kind, _ in generate_txn(spec, rng, dist):
            reads += kind == "r"
            writes += kind == "w"
    total = reads + writes
    assert abs(reads / total - 0.5) < 0.01


def test_txn_size_is_uniform_on_0_to_20():
    spec = WorkloadSpec(key_space=10, mix="complex", seed=6)
    rng = random.Random(spec.seed)
    dist = make_distribution(spec)
    sizes = [len(generate_txn(spec, rng, dist)) for _ in range(40_000)]
    assert min(sizes) == 0 and max(sizes) == 20
    mean = sum(sizes) / len(sizes)
    assert abs(mean - 10.0) < 0.15


def test_empty_script_commits_as_read_only():
    spec = WorkloadSpec(key_space=10, mix="complex", txn_count=200, seed=7)
    metrics = run(spec, WSI)
    assert metrics.aborted == 0 or metrics.read_only_aborted == 0
    assert metrics.read_only_committed > 0  # n=0 scripts occur and commit


def test_uniform_rows_pass_chi_square():
    spec = WorkloadSpec(key_space=20_000_000, distribution="uniform", seed=8)
    rng = random.Random(spec.seed)
    dist = make_distribution(spec)
    buckets = [0] * 100
    draws = 100_000
    width = spec.key_space / 100
    for _ in range(draws):
        buckets[int(dist.next(rng) / width)] += 1
    expected = draws / 100
    chi2 = sum((c - expected) ** 2 / expected for c in buckets)
    assert chi2 < CHI2_99_CRIT_01


def test_zipfian_latest_concentrates_on_highest_ids():
    keys = 100_000
    dist = ZipfianLatestKeys(keys, 0.99)
    rng = random.Random(1)
    draws = [dist.next(rng) for _ in range(50_000)]
    assert sum(draws) / len(draws) > 0.8 * keys
    top_slice = sum(1 for d in draws if d >= keys - keys // 100)
    assert top_slice / len(draws) > 0.4


def _collision_mass(draws):
    counts = {}
    for d in draws:
        counts[d] = counts.get(d, 0) + 1
    n = len(draws)
    return sum(c * (c - 1) for c in counts.values()) / (n * (n - 1))


def test_contention_ordering_of_distributions():
    # pairwise collision probability drives conflict rates:
    # latest (sharp) > zipfian (scrambled, flatter) > uniform
    keys = 100_000
    rng = random.Random(2)
    uniform = [rng.randrange(keys) for _ in range(40_000)]
    zipf = ZipfianKeys(keys, 0.99)
    zipfian = [zipf.next(rng) for _ in range(40_000)]
    latest_dist = ZipfianLatestKeys(keys, 0.99)
    latest = [latest_dist.next(rng) for _ in range(40_000)]
    assert _collision_mass(latest) > 2 * _collision_mass(zipfian)
    assert _collision_mass(zipfian) > 2 * _collision_mass(uniform)


def test_single_client_runs_are_deterministic():
    spec = WorkloadSpec(
        key_space=50, mix="mixed", distribution="zipfian-latest", seed=3, txn_count=2000
    )
    a = run(spec, WSI)
    b = run(spec, WSI)
    assert (a.committed, a.aborted, a.pessimistic_aborts) == (
        b.committed,
        b.aborted,
        b.pessimistic_aborts,
    )
    assert (a.read_only_committed, a.read_only_aborted) == (
        b.read_only_committed,
        b.read_only_aborted,
    )


def test_generated_scripts_are_deterministic_per_seed():
    spec = WorkloadSpec(key_space=500, mix="mixed", distribution="zipfian", seed=11)
    rng_a, rng_b = random.Random(99), random.Random(99)
    dist_a, dist_b = make_distribution(spec), make_distribution(spec)
    for _ in range(200):
        assert generate_txn(spec, rng_a, dist_a) == generate_txn(spec, rng_b, dist_b)


def test_uniform_large_keyspace_abort_rate_is_negligible():
    for policy in (SI, WSI):
        spec = WorkloadSpec(
            key_space=100_000,
            mix="mixed",
            distribution="uniform",
            seed=19,
            txn_count=4000,
            client_count=4,
        )
        assert run(spec, policy).abort_rate < 0.005


def test_read_only_transactions_never_abort_in_concurrent_runs():
    for policy in (SI, WSI):
        spec = WorkloadSpec(
            key_space=200,
            mix="mixed",
            distribution="zipfian-latest",
            seed=13,
            txn_count=2000,
            client_count=4,
        )
        metrics = run(spec, policy)
        assert metrics.read_only_aborted == 0
        assert metrics.read_only_committed > 0
        assert metrics.committed + metrics.aborted == spec.txn_count


def test_run_with_wal_and_bounded_capacity(tmp_path):
    spec = WorkloadSpec(key_space=50, mix="complex", seed=17, txn_count=300)
    metrics = run(spec, WSI, wal_path=tmp_path / "run.wal", capacity=8)
    assert metrics.committed + metrics.aborted == 300
    from wsikv.wal import recover

    table, _ = recover(tmp_path / "run.wal", capacity=8)
    assert len(table.commit_records) == metrics.committed


def test_bench_oracle_reports_decisions_and_latency():
    result = bench_oracle(WSI, clients=2, requests=2000, rows_per_txn=4, key_space=64, seed=5)
    assert result.committed + result.aborted == 2000
    assert result.decisions_per_sec > 0
    assert result.latency.percentile(0.5) <= result.latency.percentile(0.99)


def test_bench_oracle_with_small_capacity_counts_pessimistic_aborts():
    result = bench_oracle(
        WSI, clients=8, requests=4000, rows_per_txn=4, key_space=8, capacity=4, seed=6
    )
    assert result.pessimistic_aborts > 0
