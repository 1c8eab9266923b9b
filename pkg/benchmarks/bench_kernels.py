"""Compare the compiled kernels against the numpy fallback.

Kernel timings call both backends in-process. The end-to-end timing trains
one pedestrian model for a few epochs in a subprocess per backend, since the
backend is fixed when the package is imported.

    python3 benchmarks/bench_kernels.py [--repeat 50] [--epochs 5]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vrutwin._backend import available_backends

TRAIN_SNIPPET = """
import time
from vrutwin import BACKEND
from vrutwin.predictor import ModelConfig, train
from vrutwin.scenario import GenConfig, gen_dataset, make_site
ds = gen_dataset(make_site(), GenConfig(seed=1), 20, roles=("pedestrian",))["pedestrian"]
t = time.perf_counter()
train(ModelConfig.for_role("pedestrian", epochs={epochs}), ds)
print(BACKEND, time.perf_counter() - t)
"""


def kernel_cases(rng: np.random.Generator) -> dict[str, tuple]:
    cases = {}
    for n, h in ((32, 128), (32, 64), (512, 128)):
        z = rng.normal(size=(n, 4 * h))
        c = rng.normal(size=(n, h))
        cases[f"gates_fwd n={n} H={h}"] = ("lstm_gates_forward", (z, c))
        act = np.concatenate([1 / (1 + np.exp(-z[:, : 2 * h])), np.tanh(z[:, 2 * h:3 * h]),
                              1 / (1 + np.exp(-z[:, 3 * h:]))], axis=1)
        cases[f"gates_bwd n={n} H={h}"] = (
            "lstm_gates_backward", (rng.normal(size=(n, h)), rng.normal(size=(n, h)), act, c, np.tanh(c))
        )
    for n in (100, 100_000):
        lat1, lat2 = rng.uniform(-80, 80, n), rng.uniform(-80, 80, n)
        lon1, lon2 = rng.uniform(-180, 180, n), rng.uniform(-180, 180, n)
        cases[f"haversine n={n}"] = ("haversine_many", (lat1, lon1, lat2, lon2, 6_371_000.0))
    return cases


def bench_kernels(repeat: int) -> list[tuple[str, dict[str, float]]]:
    backends = available_backends()
    rows = []
    for label, (fn, args) in kernel_cases(np.random.default_rng(0)).items():
        times = {}
        for name, mod in backends.items():
            f = getattr(mod, fn)
            times[name] = min(timeit.repeat(lambda: f(*args), number=1, repeat=repeat))
        rows.append((label, times))
    return rows


def bench_training(epochs: int) -> dict[str, float]:
    out = {}
    for name in available_backends():
        env = dict(os.environ, VRUTWIN_BACKEND=name if name == "python" else "")
        res = subprocess.run([sys.executable, "-c", TRAIN_SNIPPET.format(epochs=epochs)],
                             capture_output=True, text=True, env=env, check=True)
        got, secs = res.stdout.split()
        out[got] = float(secs)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=5)
    args = ap.parse_args(argv)

    rows = bench_kernels(args.repeat)
    names = sorted({n for _, t in rows for n in t})
    print(f"{'kernel':<26}" + "".join(f"{n + ' (us)':>16}" for n in names) + f"{'speedup':>10}")
    for label, t in rows:
        speed = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{label:<26}" + "".join(f"{t[n] * 1e6:>16.1f}" for n in names) + f"{speed:>10.2f}")

    tr = bench_training(args.epochs)
    print(f"\npedestrian training, {args.epochs} epochs:")
    for name, secs in sorted(tr.items()):
        print(f"  {name:<8} {secs:8.2f} s")
    if "cython" in tr:
        print(f"  speedup  {tr['python'] / tr['cython']:8.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
