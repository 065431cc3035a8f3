"""Compare the compiled and pure-numpy modular arithmetic kernels.

Times mul_mod and pow_mod on shared random inputs, then one full
set-union round per backend in a subprocess (the selector binds the
backend at import time, so in-process switching is not possible).

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 1000,100000 --repeats 5
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from privmeter.psc.group import GROUP_DESK

P = GROUP_DESK.p
Q = GROUP_DESK.q


def _load_backends():
    from privmeter._kernels import _kernels_py
    backends = [("python", _kernels_py)]
    try:
        from privmeter._kernels import _kernels_c
        backends.append(("c", _kernels_c))
    except ImportError:
        print("compiled backend not installed; timing python only")
    return backends


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_elementwise(backends, sizes, repeats):
    rng = np.random.default_rng(0)
    rows = []
    for size in sizes:
        a = rng.integers(1, P, size=size, dtype=np.uint64)
        b = rng.integers(1, P, size=size, dtype=np.uint64)
        e = rng.integers(1, Q, size=size, dtype=np.uint64)
        for op, args in (("mul_mod", (a, b)), ("pow_mod", (a, e))):
            timings = {}
            outputs = {}
            for name, mod in backends:
                fn = getattr(mod, op)
                outputs[name] = fn(*args, P)
                timings[name] = _best_of(lambda: fn(*args, P), repeats)
            first = next(iter(outputs.values()))
            for out in outputs.values():
                assert np.array_equal(out, first), "backends disagree"
            rows.append((op, size, timings))
    return rows


def bench_round(repeats):
    """One 4096-bin union round with 3 CPs, per backend, own process."""
    code = (
        "import time; "
        "from privmeter.psc.protocol import NoiseBinParams, run_psc_round; "
        "items=[list(range(i*200,(i+1)*200)) for i in range(4)]; "
        "run_psc_round(items, b=4096, n_cps=3, noise=NoiseBinParams(64), seed=1); "
        "t0=time.perf_counter(); "
        "r=run_psc_round(items, b=4096, n_cps=3, noise=NoiseBinParams(64), seed=2); "
        "print(time.perf_counter()-t0, r.raw_count)"
    )
    results = {}
    for name in ("python", "c"):
        env = dict(os.environ, PRIVMETER_BACKEND=name)
        best, raw = float("inf"), None
        for _ in range(repeats):
            proc = subprocess.run([sys.executable, "-c", code], env=env,
                                  capture_output=True, text=True)
            if proc.returncode != 0:
                results[name] = (None, proc.stderr.strip().splitlines()[-1])
                break
            t, raw = proc.stdout.split()
            best = min(best, float(t))
        else:
            results[name] = (best, int(raw))
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="10000,100000,1000000",
                    help="comma-separated array lengths")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--skip-round", action="store_true",
                    help="skip the subprocess round benchmark")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = _load_backends()
    names = [n for n, _ in backends]
    print(f"modulus p = {P} (prime, < 2**32)\n")
    header = f"{'op':<8} {'n':>9} " + " ".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for op, size, timings in bench_elementwise(backends, sizes, args.repeats):
        line = f"{op:<8} {size:>9} " + " ".join(
            f"{timings[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            line += f" {timings['python'] / timings['c']:>8.2f}x"
        print(line)

    if not args.skip_round:
        print("\nfull 4096-bin round, 3 CPs, 64 noise bins/CP (subprocess):")
        for name, (t, raw) in bench_round(args.repeats).items():
            if t is None:
                print(f"  {name:<8} failed: {raw}")
            else:
                print(f"  {name:<8} {t * 1e3:>10.2f}ms  raw_count={raw}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
