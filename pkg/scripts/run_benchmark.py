"""Train every detector on the default benchmark and print its F1 row.

    python3 scripts/run_benchmark.py --snr-db 50 --seed 0 --detectors picae ae pca er
"""
import argparse
import json
import time

from hifdetect import bench, feedersim, picae


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--snr-db", type=float, default=50.0)
    ap.add_argument("--factor", type=int, default=1, help="downsampling factor applied to every window")
    ap.add_argument("--detectors", nargs="+", default=list(bench.DETECTORS))
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--lambda-r", type=float, default=None)
    ap.add_argument("--out", default=None, help="optional JSON lines file for the rows")
    args = ap.parse_args(argv)

    ds = feedersim.generate_dataset(feedersim.DatasetConfig(snr_db=args.snr_db), args.seed)
    ds = feedersim.downsample_dataset(ds, args.factor)
    cfg = picae.TrainConfig(seed=args.seed)
    if args.epochs is not None:
        cfg.k_max = args.epochs
    if args.lambda_r is not None:
        cfg.lambda_r = args.lambda_r
    rows = []
    for kind in args.detectors:
        t0 = time.time()
        res = bench.run_detector(kind, ds, cfg)
        row = {**res.row(), "snr_db": args.snr_db, "T": ds.T, "seconds": round(time.time() - t0, 1)}
        for node, det in res.detectors.items():
            if det.state is not None:
                row[f"xi_{node}"] = [round(det.state.xi1, 3), round(det.state.xi2, 3)]
            else:
                row[f"xi_{node}"] = det.calibration_error
        rows.append(row)
        print(json.dumps(row), flush=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.writelines(json.dumps(r) + "\n" for r in rows)


if __name__ == "__main__":
    main()
