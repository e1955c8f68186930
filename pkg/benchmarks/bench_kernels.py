"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both kernel modules are imported directly, so the DRASTOCH_PURE_NUMPY flag
does not matter here. Numba timings exclude the first (compiling) call.
"""

import argparse
import time

import numpy as np

from drastoch.kernels import _numba, _numpy
from drastoch.sim import reference_policy, reference_world


def best_of(fn, repeat):
    fn()  # warm-up / jit
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    world, cfg = reference_world(), reference_policy()
    base, w, s_logits, u_logits = cfg.arrays(world)
    docs = world.doc_matrix()
    m, n, k = 20000, world.n_findings, cfg.proposal_size
    beliefs = (rng.random((m, n)) < 0.3).astype(np.uint8)
    uq = rng.random((m, cfg.max_proposals * k))
    us = rng.random((m, n))
    uu = rng.random((m, n))
    x = rng.random((400, 64))
    acts = rng.integers(0, world.n_queries, m)
    summ = (rng.random((m, n)) < 0.2).astype(np.uint8)
    pen = float(cfg.coverage_penalty)
    return {
        "pair_sqdists (400x64)": lambda mod: mod.pair_sqdists(x),
        "query_stage (20k, N=3)": lambda mod: mod.query_stage(beliefs, base, w, docs, pen, 1.0, uq, 3, k),
        "summary_stage (20k)": lambda mod: mod.summary_stage(acts, docs, s_logits, 1.0, us),
        "update_stage (20k)": lambda mod: mod.update_stage(beliefs, summ, u_logits, 1.0, uu),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'kernel':28s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, fn in cases(np.random.default_rng(args.seed)).items():
        a = fn(_numpy)
        b = fn(_numba)
        same = np.array_equal(a, b) if a.dtype.kind in "iub" else np.allclose(a, b, rtol=0, atol=1e-12)
        t_np = best_of(lambda: fn(_numpy), args.repeat)
        t_nb = best_of(lambda: fn(_numba), args.repeat)
        flag = "" if same else "  (outputs differ!)"
        print(f"{name:28s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:7.1f}x{flag}")


if __name__ == "__main__":
    main()
