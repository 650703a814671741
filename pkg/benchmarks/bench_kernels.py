"""Benchmark the compiled convolution kernels against the numpy fallback.

Times the fused conv + ReLU + max-pool forward pass and the conv-weight
backward pass over a range of batch shapes, and a short end-to-end
training run with each backend. Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 20 --train-docs 400
"""

import argparse
import time

import numpy as np

from regcore.cnn import CnnConfig, available_backends
from regcore.cnn import model as cnn_model
from regcore.cnn.backends import get_backend
from regcore.embeddings import EmbeddingTable, EncodedDoc


SHAPES = [
    # batch, width, dim, filters, kernel
    (16, 64, 300, 100, 2),
    (32, 128, 300, 100, 2),
    (32, 512, 300, 100, 3),
    (64, 1000, 300, 100, 2),
]


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def bench_kernels(repeats):
    names = available_backends()
    print(f"backends: {', '.join(names)}")
    print(f"{'shape (B,P,d,F,k)':<26}{'pass':<10}" +
          "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    rng = np.random.default_rng(0)
    for shape in SHAPES:
        batch, width, dim, filters, kernel = shape
        emb = rng.normal(size=(batch, width, dim))
        lengths = rng.integers(1, width + 1, size=batch).astype(np.int64)
        w = rng.normal(size=(filters, kernel, dim))
        b = rng.normal(size=filters)

        times = {}
        for name in names:
            backend = get_backend(name)
            times[name] = timeit(
                lambda: backend.conv_pool_forward(emb, lengths, w, b), repeats
            )
        row = f"{str(shape):<26}{'forward':<10}"
        row += "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            row += f"{times[names[1]] / times[names[0]]:>9.2f}x"
        print(row)

        pooled, argmax = get_backend(names[0]).conv_pool_forward(emb, lengths, w, b)
        dpre = np.where(pooled > 0, rng.normal(size=pooled.shape), 0.0)
        for name in names:
            backend = get_backend(name)
            times[name] = timeit(
                lambda: backend.conv_pool_backward(emb, argmax, dpre, kernel), repeats
            )
        row = f"{'':<26}{'backward':<10}"
        row += "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            row += f"{times[names[1]] / times[names[0]]:>9.2f}x"
        print(row)


def bench_training(n_docs, epochs):
    rng = np.random.default_rng(1)
    dim, n_words = 300, 5000
    matrix = rng.normal(size=(n_words + 2, dim)).astype(np.float32)
    matrix[:2] = 0.0
    table = EmbeddingTable(
        language="xx", dim=dim,
        vocab={f"w{i}": i + 2 for i in range(n_words)}, matrix=matrix,
    )
    docs = []
    for _ in range(n_docs):
        length = int(rng.integers(20, 300))
        docs.append(EncodedDoc(
            indices=rng.integers(0, n_words + 2, size=length).astype(np.int32),
            length=length,
        ))
    targets = (rng.random((n_docs, 8)) < 0.3).astype(np.float64)
    data = cnn_model.EncodedDataset(docs=docs, targets=targets)
    config = CnnConfig(dim=dim, filters=100, kernel=2, max_epochs=epochs,
                       batch_size=32, patience=0, seed=7)

    print(f"\ntraining: {n_docs} docs, {epochs} epochs, dim {dim}, 100 filters")
    reference = None
    for name in available_backends():
        started = time.perf_counter()
        params, history = cnn_model.train(config, data, data, table, name)
        elapsed = time.perf_counter() - started
        print(f"  {name:>9}: {elapsed:6.2f}s  (final loss {history.train_loss[-1]:.4f})")
        if reference is None:
            reference = elapsed
        else:
            print(f"  speedup: {elapsed / reference:.2f}x"
                  if elapsed > reference else
                  f"  speedup: {reference / elapsed:.2f}x (fallback faster)")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=10,
                        help="timing repeats per shape (best is reported)")
    parser.add_argument("--train-docs", type=int, default=200)
    parser.add_argument("--train-epochs", type=int, default=3)
    parser.add_argument("--skip-training", action="store_true")
    args = parser.parse_args()

    bench_kernels(args.repeats)
    if not args.skip_training:
        bench_training(args.train_docs, args.train_epochs)


if __name__ == "__main__":
    main()
