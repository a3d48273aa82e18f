"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 50] [--train-steps 5]

Shapes follow a batch of 32 synthetic molecules (about 40 atoms after
padding) through a 3-head, d=64 attention layer. The last section times full
bond-transformer training steps under each backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from molmask.corruption import CorruptionPolicy, sample_corruption
from molmask.dataset import GeneratorConfig, generate_synthetic
from molmask.models import build_neural
from molmask.nn import Adam, kernels


def best_of(fn, repeat: int) -> float:
    fn()  # warm-up, includes numba compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(rng: np.random.Generator):
    B, H, n, d, C = 32, 3, 40, 64, 4
    scores = rng.normal(size=(B * H * n, n))
    mask = rng.random((B * H * n, n)) < 0.9
    mask[:, 0] = True
    rows = rng.normal(size=(B * n, d))
    E = rng.integers(0, C, size=(B, n, n))
    xq = rng.normal(size=(B, H, n, C))
    att = rng.random((B, H, n, n))
    g = rng.normal(size=(B * n, d))
    idx = rng.integers(0, 11, size=B * n)

    y = kernels.softmax(scores, mask)
    ln, inv = kernels.layer_norm(rows, 1e-5)
    return {
        "softmax": lambda: kernels.softmax(scores, mask),
        "softmax_backward": lambda: kernels.softmax_backward(y, scores),
        "layer_norm": lambda: kernels.layer_norm(rows, 1e-5),
        "layer_norm_backward": lambda: kernels.layer_norm_backward(ln, inv, rows),
        "class_gather": lambda: kernels.class_gather(xq, E),
        "class_scatter": lambda: kernels.class_scatter(att, E, C),
        "embedding_backward": lambda: kernels.embedding_backward(g, idx, 11),
    }


def train_step_time(steps: int) -> float:
    mols = list(generate_synthetic(GeneratorConfig(count=32 * steps, seed=1)))
    model = build_neural("bond-transformer", seed=0)
    opt = Adam(model.parameters(), lr=1e-3)
    rng = np.random.default_rng(0)
    batches = [
        [sample_corruption(m, CorruptionPolicy(1, 0.2), rng) for m in mols[i : i + 32]]
        for i in range(0, len(mols), 32)
    ]

    def run():
        for cms in batches:
            loss = model.loss(cms)
            loss.backward()
            opt.step()

    run()  # warm-up
    t0 = time.perf_counter()
    run()
    return (time.perf_counter() - t0) / len(batches)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--train-steps", type=int, default=5)
    args = ap.parse_args()

    backends = kernels.available_backends()
    results: dict[str, dict[str, float]] = {}
    for name in backends:
        kernels.set_backend(name)
        cases = kernel_cases(np.random.default_rng(0))
        results[name] = {k: best_of(fn, args.repeat) for k, fn in cases.items()}
        if args.train_steps:
            results[name]["train step (bond-transformer)"] = train_step_time(args.train_steps)

    header = f"{'kernel':32s}" + "".join(f"{b:>12s}" for b in backends)
    if "numba" in backends and "numpy" in backends:
        header += f"{'speedup':>10s}"
    print(header)
    for k in results[backends[0]]:
        line = f"{k:32s}" + "".join(f"{results[b][k] * 1e3:10.3f}ms" for b in backends)
        if "numba" in results and "numpy" in results:
            line += f"{results['numpy'][k] / results['numba'][k]:9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
