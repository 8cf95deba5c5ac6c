"""Time the compiled and numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel is run on identical arrays through every available backend;
outputs are compared for exact equality before timings are reported.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from soficount.homspace import HomContext
from soficount.kernels import backends
from soficount.measure import MeasureSystem, PartitionSpec
from soficount.sofic import build_cyclic


def cases():
    nu = MeasureSystem.bernoulli([0.5, 0.5])
    alpha = PartitionSpec.points(2)
    rng = np.random.default_rng(0)

    big = HomContext.build(build_cyclic(2000), nu, alpha, [0, 1, -1])
    t = big.table
    labels = rng.integers(0, t.m, size=(256, big.d))
    gamma = rng.integers(0, 2, size=(256, big.d))
    yield "labeling_defects d=2000 batch=256", lambda k: k.labeling_defects(labels, big.inv, t.coord, t.e_pos, t.measures)
    yield "gamma_labels d=2000 batch=256", lambda k: k.gamma_labels(gamma, big.inv, 2)

    small = HomContext.build(build_cyclic(9), nu, alpha, [0, 1])
    s = small.table
    total = s.m ** small.d
    yield f"enumerate_defects m={s.m} d=9 ({total} labelings)", \
        lambda k: k.enumerate_defects(s.m, small.d, 0, total, small.inv, s.coord, s.e_pos, s.measures)
    yield "decode 2^18 indices", lambda k: k.decode(np.arange(1 << 18, dtype=np.int64), s.m, small.d)


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    ks = backends()
    print(f"backends: {', '.join(ks)}")
    for name, fn in cases():
        outs = {b: fn(k) for b, k in ks.items()}
        ref = outs["numpy"]
        agree = all(same(ref, o) for o in outs.values())
        times = {b: min(timeit.repeat(lambda k=k: fn(k), number=1, repeat=args.repeat)) for b, k in ks.items()}
        line = "  ".join(f"{b} {1e3 * t:9.2f} ms" for b, t in times.items())
        speed = f"  speedup x{times['numpy'] / times['cython']:.1f}" if "cython" in times else ""
        print(f"{name:45s} {line}{speed}  outputs {'identical' if agree else 'DIFFER'}")


if __name__ == "__main__":
    main()
