"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--assets 40] [--repeat 3]

Both backends run the same inputs; the script also checks that their outputs
agree bit for bit.
"""

import argparse
import time

import numpy as np

from rps._backend import get_kernels
from rps.embedding import WalkConfig, generate_walks, train_embeddings
from rps.graph import build_rps_graph
from rps.market_data import compute_returns, pearson_correlation, synthetic_block_market


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--assets", type=int, default=40, help="universe size (two blocks)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    try:
        get_kernels("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run: pip install -e . --no-build-isolation")

    prices = synthetic_block_market(block_size=args.assets // 2, seed=0)
    graph = build_rps_graph(pearson_correlation(compute_returns(prices)))
    cases = {
        "walks (first order)": WalkConfig(seed=1),
        "walks (p=0.5, q=2)": WalkConfig(p=0.5, q=2.0, seed=1),
    }
    sgns_cfg = WalkConfig(epochs=1, seed=1)
    corpus = generate_walks(graph, sgns_cfg)

    print(f"{'kernel':<22}{'python s':>12}{'compiled s':>12}{'speedup':>10}  same")
    rows = []
    for label, cfg in cases.items():
        rows.append((label, lambda b, c=cfg: generate_walks(graph, c, backend=b).walks))
    rows.append(("sgns epoch", lambda b: train_embeddings(corpus, sgns_cfg, backend=b).vectors))
    for label, fn in rows:
        t_py, a = best_of(args.repeat, lambda: fn("python"))
        t_c, b = best_of(args.repeat, lambda: fn("compiled"))
        print(f"{label:<22}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>10.1f}  {np.array_equal(a, b)}")
    print(f"\n{args.assets} assets, {corpus.walks.shape[0]} walks of length {corpus.walks.shape[1] - 1}")


if __name__ == "__main__":
    main()
