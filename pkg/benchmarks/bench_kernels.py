"""Compiled vs numpy tableau kernels.

    python3 benchmarks/bench_kernels.py [--n 64] [--gates 5000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from hassenet import kernels
from hassenet.stabilizer import compile_program, init_tableau, random_clifford_circuit


def _case(n: int, n_gates: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    gates = []
    while len(gates) < n_gates:
        a, b = (int(v) for v in rng.choice(n, 2, replace=False))
        gates += [(g, (a, b)[: len(q)]) for g, q in random_clifford_circuit(2, rng)]
    ops = compile_program(gates[:n_gates])
    tab = init_tableau(n)
    rows = np.random.default_rng(seed).integers(0, 2, (n, 2 * n), dtype=np.uint8)
    return tab, ops, rows


def bench(n: int, n_gates: int, repeat: int) -> list[tuple[str, str, float]]:
    tab, ops, rows = _case(n, n_gates)
    out = []
    impls = [("python", kernels.load("python"))]
    try:
        impls.append(("cython", kernels.load("cython")))
    except ImportError:
        pass
    for name, mod in impls:
        def program():
            t = tab.copy()
            mod.apply_program(t.x, t.z, t.r, ops)

        def measure():
            t = tab.copy()
            mod.apply_program(t.x, t.z, t.r, ops)
            for q in range(n):
                mod.measure_z(t.x, t.z, t.r, q, q & 1)

        for label, fn in (("program", program), ("program+measure", measure), ("gf2_rank", lambda: mod.gf2_rank(rows))):
            best = min(timeit.repeat(fn, number=1, repeat=repeat))
            out.append((name, label, best))
    return out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--gates", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    res = bench(args.n, args.gates, args.repeat)
    print(f"n={args.n} gates={args.gates} default backend={kernels.BACKEND}")
    base = {label: t for name, label, t in res if name == "python"}
    for name, label, t in res:
        print(f"{name:7s} {label:16s} {t * 1e3:9.3f} ms  x{base[label] / t:6.1f}")


if __name__ == "__main__":
    main()
