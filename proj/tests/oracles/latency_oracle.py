"""Sample statistics of latency values in a JSON-lines file.

Independent of the C++ metrics code. Reads every line that carries the
given key (default latency_ms) and prints mean, population std, median and
nearest-rank P95 as JSON.

    python3 latency_oracle.py injected.jsonl [key]
"""
import json
import math
import statistics
import sys


def nearest_rank(values, pct):
    ordered = sorted(values)
    rank = math.ceil(pct / 100.0 * len(ordered))
    return ordered[max(rank, 1) - 1]


def main():
    path = sys.argv[1]
    key = sys.argv[2] if len(sys.argv) > 2 else "latency_ms"
    values = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if doc.get(key) is not None:
                values.append(float(doc[key]))
    out = {
        "n": len(values),
        "mean_ms": statistics.fmean(values),
        "std_ms": statistics.pstdev(values),
        "median_ms": statistics.median(values),
        "p95_ms": nearest_rank(values, 95),
    }
    print(json.dumps(out))


if __name__ == "__main__":
    main()
