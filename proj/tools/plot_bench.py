#!/usr/bin/env python3
# Copyright 2026 the svtpm-sim authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Terminal bar charts for svtpm-cli bench CSV output.

Reads the per-iteration sample file emitted by `svtpm-cli bench` and draws
one two-bar (plain vs sealed) comparison per command, plus the relative
overhead of the sealed backend. Pure standard library; no display needed.
"""

import argparse
import csv
import math
import sys
from collections import defaultdict

BAR_WIDTH = 48


def nearest_rank(samples, pct):
    """Percentile by the nearest-rank rule, matching the C++ aggregates."""
    ordered = sorted(samples)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def load(path):
    groups = defaultdict(list)
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        expected = ["command", "backend", "iteration", "nanos"]
        if reader.fieldnames != expected:
            raise SystemExit(
                f"{path}: expected header {','.join(expected)}, "
                f"got {reader.fieldnames}"
            )
        for row in reader:
            groups[(row["command"], row["backend"])].append(int(row["nanos"]))
    if not groups:
        raise SystemExit(f"{path}: no samples")
    return groups


def stat(samples, metric):
    if metric == "mean":
        return sum(samples) / len(samples)
    return nearest_rank(samples, {"p50": 50, "p95": 95}[metric])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", help="sample file written by svtpm-cli bench")
    ap.add_argument(
        "--metric",
        choices=["p50", "mean", "p95"],
        default="p50",
        help="statistic each bar shows (default p50)",
    )
    args = ap.parse_args()

    groups = load(args.csv)
    values = {key: stat(s, args.metric) for key, s in groups.items()}
    commands = []
    for cmd, _ in values:
        if cmd not in commands:
            commands.append(cmd)
    scale = max(values.values())

    print(f"{args.metric} latency, ms ({args.csv})")
    for cmd in commands:
        print(cmd)
        per_backend = {}
        for backend in ("plain", "sealed"):
            v = values.get((cmd, backend))
            if v is None:
                continue
            per_backend[backend] = v
            bar = "#" * max(1, round(v / scale * BAR_WIDTH))
            print(f"  {backend:<7} {v / 1e6:9.3f}  {bar}")
        if "plain" in per_backend and "sealed" in per_backend:
            overhead = per_backend["sealed"] / per_backend["plain"] - 1.0
            print(f"  sealed overhead {overhead:+.1%}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
