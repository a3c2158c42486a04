"""Benchmark the compiled kernels against the pure NumPy fallback.

Times the per-bag loss/gradient kernel (the hot loop of training and
gradient checking) and the min-distance pooling kernel (the hot loop of
inference) on two workload sizes: the small synthetic regime used by the
test suite and a production-like regime (1024-d features, 300-d label
space, 81 labels, 20 subregions).

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from miembed import kernels


def make_workload(rng, num_instances, feature_dim, semantic_dim, vocab, num_pos):
    weight = rng.normal(size=(semantic_dim, feature_dim)) * 0.5
    feats = rng.normal(size=(num_instances, feature_dim))
    labels = rng.normal(size=(vocab, semantic_dim))
    labels /= np.linalg.norm(labels, axis=1, keepdims=True)
    pos = np.sort(rng.choice(vocab, size=num_pos, replace=False)).astype(np.intp)
    neg = np.array(sorted(set(range(vocab)) - set(pos.tolist())), dtype=np.intp)
    return weight, feats, labels, pos, neg


def time_fn(fn, min_seconds=0.4):
    fn()  # warm up
    calls = 0
    started = time.perf_counter()
    while time.perf_counter() - started < min_seconds:
        fn()
        calls += 1
    return (time.perf_counter() - started) / calls


def bench(name, num_instances, feature_dim, semantic_dim, vocab, num_pos):
    rng = np.random.default_rng(0)
    weight, feats, labels, pos, neg = make_workload(
        rng, num_instances, feature_dim, semantic_dim, vocab, num_pos
    )
    grad = np.zeros_like(weight)
    print(f"\n{name}: {num_instances} instances, {feature_dim}-d features, "
          f"{semantic_dim}-d space, {vocab} labels")
    print(f"  {'kernel':28s} {'backend':8s} {'per call':>12s} {'speedup':>8s}")
    for kernel_name, make_call in (
        (
            "ranking_loss_grad (warp)",
            lambda mod: lambda: mod.ranking_loss_grad(
                weight, feats, labels, pos, neg, 0.1, False, True, False, False, grad
            ),
        ),
        (
            "min_label_distances",
            lambda mod: lambda: mod.min_label_distances(weight, feats, labels),
        ),
    ):
        timings = {}
        for backend in kernels.available_backends():
            with kernels.use_backend(backend) as mod:
                timings[backend] = time_fn(make_call(mod))
        for backend, seconds in timings.items():
            speedup = ""
            if backend == "cython" and "python" in timings:
                speedup = f"{timings['python'] / seconds:7.1f}x"
            print(f"  {kernel_name:28s} {backend:8s} {seconds * 1e6:10.1f}us {speedup:>8s}")


def main():
    print(f"available backends: {', '.join(kernels.available_backends())}")
    if "cython" not in kernels.available_backends():
        print("compiled extension not built; benchmarking the fallback only")
    bench("test-suite regime", num_instances=6, feature_dim=32, semantic_dim=8,
          vocab=12, num_pos=3)
    bench("production-like regime", num_instances=20, feature_dim=1024,
          semantic_dim=300, vocab=81, num_pos=5)


if __name__ == "__main__":
    main()
