"""Compare the numba and numpy paths of the hot kernels.

    python benchmarks/bench_kernels.py [--reps 20]

Both variants are imported directly, so the SECONNDS_NUMBA flag does not
matter here. The first numba call (compilation) is excluded from timing.
"""
import argparse
import time

import numpy as np

from seconnds import kernels
from seconnds.lattice import RlweParams


def best_of(fn, reps):
    fn()  # warm-up / JIT compile
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()

    params = RlweParams()
    q, psi, psi_inv, n_inv = params.tables
    rng = np.random.default_rng(0)
    a = (rng.integers(0, 1 << 62, (params.k, params.n), dtype=np.uint64) % q[:, None]).astype(np.uint64)
    bits = rng.integers(0, 256, (128, 8192 // 8), dtype=np.uint8)

    # both paths must agree before timing means anything
    assert np.array_equal(kernels.ntt_forward_numpy(a.copy(), q, psi), kernels.ntt_forward_numba(a.copy(), q, psi))
    assert np.array_equal(kernels.transpose_bits_numpy(bits), kernels.transpose_bits_numba(bits))

    cases = [
        ("ntt_forward N=4096 k=4", lambda f: f(a.copy(), q, psi), kernels.ntt_forward_numpy, kernels.ntt_forward_numba),
        ("ntt_inverse N=4096 k=4", lambda f: f(a.copy(), q, psi_inv, n_inv), kernels.ntt_inverse_numpy,
         kernels.ntt_inverse_numba),
        ("transpose 128x8192 bits", lambda f: f(bits), kernels.transpose_bits_numpy, kernels.transpose_bits_numba),
    ]
    print(f"{'kernel':<26}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, call, f_np, f_nb in cases:
        t_np = best_of(lambda: call(f_np), args.reps)
        t_nb = best_of(lambda: call(f_nb), args.reps)
        print(f"{name:<26}{t_np * 1e3:>10.3f}{t_nb * 1e3:>10.3f}{t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
