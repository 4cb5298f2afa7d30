"""Time the band-placement counter: compiled extension vs pure Python.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends must return the same counts; the script exits nonzero if they
disagree or the extension is not built.
"""

import argparse
import sys
import timeit

from artifact import bandcount

# (label, n, rho, n_items, edges, pinned)
CASES = [
    ("path of 4", 72, 2, 4, [(0, 1), (1, 2), (2, 3)], None),
    ("star of 5", 72, 2, 5, [(0, i) for i in range(1, 5)], None),
    ("two paths of 4", 72, 2, 8, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7)], None),
    ("cycle of 8", 40, 3, 8, [(i, (i + 1) % 8) for i in range(8)], None),
    ("pinned path of 6", 60, 2, 6, [(i, i + 1) for i in range(5)], {0: 30}),
    ("path + free item", 30, 2, 5, [(0, 1), (1, 2), (2, 3)], None),
]


def run(repeat: int) -> int:
    if bandcount._compiled is None:
        print("compiled extension not available; build with `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'case':<20}{'count':>16}{'python ms':>12}{'compiled ms':>13}{'speedup':>9}")
    status = 0
    for label, n, rho, k, edges, pinned in CASES:
        counts = {b: bandcount.count_placements(n, rho, k, edges, pinned, backend=b)
                  for b in ("python", "compiled")}
        times = {}
        for b in ("python", "compiled"):
            timer = timeit.Timer(lambda: bandcount.count_placements(n, rho, k, edges, pinned, backend=b))
            loops, _ = timer.autorange()
            times[b] = min(timer.repeat(repeat, loops)) / loops * 1000
        if counts["python"] != counts["compiled"]:
            status = 1
        print(f"{label:<20}{counts['compiled']:>16}{times['python']:>12.3f}"
              f"{times['compiled']:>13.4f}{times['python'] / times['compiled']:>8.0f}x")
    if status:
        print("backends disagree")
    return status


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    sys.exit(run(parser.parse_args().repeat))
