#!/usr/bin/env python3
"""Drive the status oracle with synthetic commit traffic at doubling client
counts and report decision throughput and latency percentiles per policy.

    python3 scripts/oracle_saturation.py --requests 40000 --max-clients 64
"""

import argparse
import sys

from wsikv.oracle import IsolationPolicy
from wsikv.workload import BENCH_CSV_HEADER, bench_oracle


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--requests", type=int, default=40_000)
    parser.add_argument("--rows-per-txn", type=int, default=5)
    parser.add_argument("--keys", type=int, default=20_000)
    parser.add_argument("--max-clients", type=int, default=64)
    parser.add_argument("--capacity", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(BENCH_CSV_HEADER)
    clients = 1
    while clients <= args.max_clients:
        for policy in (IsolationPolicy.SI, IsolationPolicy.WSI):
            result = bench_oracle(
                policy,
                clients,
                args.requests,
                args.rows_per_txn,
                key_space=args.keys,
                capacity=args.capacity,
                seed=args.seed,
            )
            print(result.csv_row(), flush=True)
        clients *= 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
