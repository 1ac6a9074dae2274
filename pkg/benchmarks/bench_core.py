"""Timing comparison of the compiled core against the numpy fallback.

Usage: python benchmarks/bench_core.py [--repeats N]

Times the three hot kernels (forward, loss+grads, SVGD direction) on sizes
matching the benchmark workload, plus one end-to-end evolved training run per
backend. The compiled path is loaded directly; the fallback is always
importable.
"""

import argparse
import time

import numpy as np

from drme import _core_py

try:
    from drme import _core_cy
except ImportError:
    _core_cy = None


def make_workload(rng, n=16, d=16, hidden=64, classes=10):
    weights = [np.ascontiguousarray(rng.normal(0, 0.3, size=(hidden, d))),
               np.ascontiguousarray(rng.normal(0, 0.3, size=(classes, hidden)))]
    biases = [np.zeros(hidden), np.zeros(classes)]
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    y = np.ascontiguousarray(rng.integers(0, classes, size=n), dtype=np.int64)
    G = np.ascontiguousarray(rng.normal(size=(n, d)))
    return weights, biases, X, y, G


def time_fn(fn, repeats):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats * 1e6  # us


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    weights, biases, X, y, G = make_workload(rng)
    backends = [("python", _core_py)]
    if _core_cy is not None:
        backends.append(("cython", _core_cy))

    rows = []
    for name, mod in backends:
        rows.append((name, "mlp_forward",
                     time_fn(lambda m=mod: m.mlp_forward(weights, biases, X), repeats)))
        rows.append((name, "mlp_loss_grads",
                     time_fn(lambda m=mod: m.mlp_loss_grads(weights, biases, X, y), repeats)))
        rows.append((name, "svgd_direction",
                     time_fn(lambda m=mod: m.svgd_direction(X, G, 1.0), repeats)))
    return rows


def bench_end_to_end():
    import os
    import subprocess
    import sys
    import tempfile

    script = (
        "import time, numpy as np\n"
        "from drme import BACKEND\n"
        "from drme.nnet import init_mlp\n"
        "from drme.stream import StreamSpec, make_synthetic_stream\n"
        "from drme.train import TrainConfig, run_continual\n"
        "from drme.evolution import EvolutionConfig\n"
        "spec = StreamSpec(tasks=3, classes_per_task=2, samples_per_task=200,\n"
        "                  batch_size=4, dim=16, spread=0.7, noise=1.0)\n"
        "stream = make_synthetic_stream(spec)\n"
        "model = init_mlp([16, 64, 6], seed=0)\n"
        "cfg = TrainConfig(method='ER_WGF_LD', replay_batch=12, lr=0.08,\n"
        "                  evolution=EvolutionConfig(method='LD'), seed=0)\n"
        "t0 = time.perf_counter()\n"
        "run_continual(stream, model, cfg)\n"
        "print(BACKEND, (time.perf_counter() - t0) * 1e3)\n"
    )
    out = []
    for force_python in (False, True):
        env = dict(os.environ)
        env.pop("DRME_PURE_PYTHON", None)
        if force_python:
            env["DRME_PURE_PYTHON"] = "1"
        with tempfile.NamedTemporaryFile("w", suffix=".py", delete=False) as f:
            f.write(script)
            path = f.name
        try:
            res = subprocess.run([sys.executable, path], env=env,
                                 capture_output=True, text=True, check=True)
            backend, ms = res.stdout.split()
            out.append((backend, float(ms)))
        finally:
            os.unlink(path)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    print(f"{'backend':8} {'kernel':16} {'us/call':>10}")
    for name, kernel, us in bench_kernels(args.repeats):
        print(f"{name:8} {kernel:16} {us:10.2f}")

    print("\nend-to-end evolved training run (ER_WGF_LD, 3 tasks):")
    for backend, ms in bench_end_to_end():
        print(f"{backend:8} {ms:10.1f} ms")


if __name__ == "__main__":
    main()
