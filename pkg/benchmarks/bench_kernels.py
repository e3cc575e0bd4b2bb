"""Compare the compiled and pure-numpy Pauli kernels.

Usage: python3 benchmarks/bench_kernels.py [--qubits 4 6 8 10] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from maxent_compat import _pauli_py
from maxent_compat.operators import PauliTerm, pauli_strings

try:
    from maxent_compat import _pauli_ext
except ImportError:
    _pauli_ext = None


def random_strings(n, count, rng):
    letters = rng.choice(list("IXYZ"), size=(count, n))
    masks = [PauliTerm("".join(row)).masks() for row in letters]
    xs = np.array([m[0] for m in masks], dtype=np.int64)
    zs = np.array([m[1] for m in masks], dtype=np.int64)
    coefs = np.array([m[2] for m in masks], dtype=np.complex128) * rng.normal(size=count)
    return xs, zs, coefs


def bench(mod, n, count, repeat, rng):
    xs, zs, coefs = random_strings(n, count, rng)
    d = 1 << n
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    cases = {
        "pauli_sum_dense": lambda: mod.pauli_sum_dense(xs, zs, coefs, n),
        "pauli_expectations": lambda: mod.pauli_expectations(rho, xs, zs, coefs),
        "apply_paulis": lambda: mod.apply_paulis(psi, xs, zs, coefs),
    }
    return {k: min(timeit.repeat(f, number=1, repeat=repeat)) for k, f in cases.items()}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--qubits", type=int, nargs="+", default=[4, 6, 8, 10])
    ap.add_argument("--strings", type=int, default=None, help="strings per call (default 4**2 * n)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _pauli_py)] + ([("cython", _pauli_ext)] if _pauli_ext else [])
    if _pauli_ext is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'n':>3} {'strings':>8} {'kernel':<20}" + "".join(f"{b:>12}" for b, _ in backends) + "   speedup")
    for n in args.qubits:
        count = args.strings or 16 * n
        times = [bench(mod, n, count, args.repeat, np.random.default_rng(n)) for _, mod in backends]
        for k in times[0]:
            row = f"{n:>3} {count:>8} {k:<20}" + "".join(f"{t[k] * 1e3:>10.3f}ms" for t in times)
            if len(times) == 2:
                row += f"   {times[0][k] / times[1][k]:7.1f}x"
            print(row)


if __name__ == "__main__":
    main()
