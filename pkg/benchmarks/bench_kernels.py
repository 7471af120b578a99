"""Compiled against pure-Python kernels on representative workloads.

Run with ``python3 benchmarks/bench_kernels.py``.
"""

import argparse
import timeit

import numpy as np

from forgeqse import _kernels_py
from forgeqse.casci import DeterminantBasis
from forgeqse.chemio import random_integrals

try:
    from forgeqse import _kernels
except ImportError:
    _kernels = None


def workloads(n_orbitals: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    ints = random_integrals(n_orbitals, n_orbitals, seed=seed)
    dets = DeterminantBasis(n_orbitals, n_orbitals // 2, n_orbitals // 2).combined()
    n = 2 * n_orbitals
    dim = 1 << n_orbitals
    bra = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    ket = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    xs = rng.integers(0, dim, size=256, dtype=np.int64)
    zs = rng.integers(0, dim, size=256, dtype=np.int64)
    weights = rng.random(dim)
    masks = rng.integers(0, dim, size=64, dtype=np.int64)
    h, g = np.asarray(ints.h), np.asarray(ints.g)
    return {
        "casci_elements": lambda m: m.casci_elements(dets, h, g, n_orbitals),
        "pauli_expectations": lambda m: m.pauli_expectations(bra, ket, xs, zs),
        "parity_expectations": lambda m: m.parity_expectations(weights, masks),
    }, len(dets), n


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--orbitals", type=int, default=6)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; only the Python timings are shown")
    jobs, n_dets, _ = workloads(args.orbitals)
    print(f"{args.orbitals} orbitals, {n_dets} determinants")
    print(f"{'kernel':<22}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, job in jobs.items():
        t_py = min(timeit.repeat(lambda: job(_kernels_py), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{name:<22}{t_py:>12.4f}")
            continue
        t_cy = min(timeit.repeat(lambda: job(_kernels), number=1, repeat=args.repeat))
        print(f"{name:<22}{t_py:>12.4f}{t_cy:>12.5f}{t_py / t_cy:>10.1f}")


if __name__ == "__main__":
    main()
