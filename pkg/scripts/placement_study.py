"""Greedy sensor placement against random placements on the nine-node feeder.

    python3 scripts/placement_study.py --detector er --K 1 2 3 --trials 100
"""
import argparse
import json

import numpy as np

from hifdetect import bench, feedersim, picae, placement


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--snr-db", type=float, default=50.0)
    ap.add_argument("--window-size", type=int, default=64)
    ap.add_argument("--detector", default="picae", choices=bench.DETECTORS)
    ap.add_argument("--K", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--trials", type=int, default=100)
    args = ap.parse_args(argv)

    feeder = feedersim.nine_node_feeder()
    others = [n for n in feeder.nodes if n != feeder.source_node]
    cfg = feedersim.DatasetConfig(
        feeder=feeder.to_dict(),
        measured_nodes=list(feeder.nodes),
        hif_nodes=others,
        cap_nodes=others,
        load_nodes=others,
        snr_db=args.snr_db,
    )
    ds = feedersim.generate_dataset(cfg, args.seed)
    ds = feedersim.downsample_dataset(ds, ds.T // args.window_size)
    tcfg = picae.TrainConfig(seed=args.seed)
    fitted = {n: bench.fit_detector(args.detector, ds, n, tcfg) for n in feeder.nodes}
    for n in feeder.nodes:
        r = bench.fuse_and_score(fitted, ds, [n]).metrics
        print(json.dumps({"nodes": [n], "recall": r.recall, "f1": r.f1}), flush=True)

    D = placement.feeder_dissimilarity(feeder, ds.manifest["fs"], ds.T)
    rng = np.random.default_rng(args.seed)
    for K in args.K:
        chosen = placement.greedy_place(D, K)
        greedy = bench.fuse_and_score(fitted, ds, chosen.selected).metrics
        rand = [
            bench.fuse_and_score(fitted, ds, sorted(rng.choice(feeder.nodes, K, replace=False).tolist())).metrics.recall
            for _ in range(args.trials)
        ]
        print(json.dumps({
            "K": K,
            "greedy": list(chosen.selected),
            "greedy_recall": greedy.recall,
            "greedy_f1": greedy.f1,
            "random_recall_mean": float(np.mean(rand)),
            "random_recall_std": float(np.std(rand)),
        }), flush=True)


if __name__ == "__main__":
    main()
