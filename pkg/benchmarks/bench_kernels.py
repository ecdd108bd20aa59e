"""Compiled vs numpy kernels.

    python benchmarks/bench_kernels.py [--repeat 20] [--no-step]

Times each hot kernel with both backends at training-sized shapes, then one
float32 training step of the N-body network (L=5, C=64, N=12, batch 32)
under each backend in a subprocess (the backend is fixed at import).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ponita import backend

STEP = r"""
import time, numpy as np
from ponita import backend
from ponita.autodiff import Tape, adam_step, AdamState
from ponita.graph import batch_graphs
from ponita.nbody import nbody_generate
from ponita.training import TrainConfig, batch_loss, build_model, featurize, task_grid, _targets
cfg = TrainConfig(f32=True)
model = build_model(cfg)
samples = nbody_generate(32, 0)
graph = batch_graphs(featurize(cfg, samples, task_grid(cfg)))
targets = _targets(cfg, samples, np.arange(32))
params = {k: v.astype(np.float32) for k, v in model.init(0).items()}
state = AdamState()
times = []
for _ in range(REPEAT):
    t0 = time.perf_counter()
    tape = Tape()
    tracked = {k: tape.variable(v) for k, v in params.items()}
    loss = batch_loss(cfg, model, tracked, graph, targets, tape)
    tape.backward(loss)
    params, state = adam_step(params, {k: t.grad for k, t in tracked.items()}, state, 1e-4)
    times.append(time.perf_counter() - t0)
print(backend.BACKEND, min(times))
"""


def cases(rng):
    E, P, N, C = 640, 160, 12, 64
    k = rng.standard_normal((E, N, C)).astype(np.float32)
    f = rng.standard_normal((P, N, C)).astype(np.float32)
    snd, rcv = rng.integers(0, P, E), np.sort(rng.integers(0, P, E))
    x = rng.standard_normal((E, N, 4 * C)).astype(np.float32)
    pts = rng.standard_normal((60, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return {
        "segment_sum [640,12,64] f32": lambda impl: backend.segment_sum(k, rcv, P, impl=impl),
        "edge_conv [640,12,64] f32": lambda impl: backend.edge_conv(k, f, snd, rcv, P, impl=impl),
        "gelu_pair [640,12,256] f32": lambda impl: backend.gelu_pair(x, impl=impl),
        "repulsion_energy_grad N=60": lambda impl: backend.repulsion_energy_grad(pts, impl=impl),
    }


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    impls = {"python": backend.get_impl("python")}
    if backend._native is not None:
        impls["cython"] = backend.get_impl("cython")
    print(f"{'kernel':32s} " + " ".join(f"{name:>12s}" for name in impls) + "   speedup")
    for label, fn in cases(rng).items():
        t = {name: min(timeit.repeat(lambda: fn(impl), number=1, repeat=repeat))
             for name, impl in impls.items()}
        speed = f"{t['python'] / t['cython']:8.1f}x" if "cython" in t else ""
        print(f"{label:32s} " + " ".join(f"{t[n] * 1e3:10.3f}ms" for n in impls) + "  " + speed)


def bench_step(repeat):
    out = {}
    for name, env in (("python", {"PONITA_PURE_PYTHON": "1"}), ("cython", {"PONITA_PURE_PYTHON": "0"})):
        code = STEP.replace("REPEAT", str(repeat))
        res = subprocess.run([sys.executable, "-c", code], env={**os.environ, **env},
                             capture_output=True, text=True, check=True)
        used, seconds = res.stdout.split()
        out[used] = float(seconds)
    print()
    for name, seconds in out.items():
        print(f"training step (f32, batch 32)    {name:>8s} {seconds * 1e3:9.1f}ms")
    if len(out) == 2:
        print(f"{'':32s} speedup {out['python'] / out['cython']:.2f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--no-step", action="store_true")
    args = ap.parse_args()
    print(f"active backend: {backend.BACKEND}\n")
    bench_kernels(args.repeat)
    if not args.no_step:
        bench_step(max(3, args.repeat // 5))


if __name__ == "__main__":
    main()
