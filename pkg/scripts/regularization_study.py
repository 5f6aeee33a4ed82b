"""Compare gamma bands of the CAE trained with and without the ellipse penalty.

    python3 scripts/regularization_study.py --snr-db 50 --lambdas 0 200

Prints, per penalty weight, the quantiles of log10(gamma) for each test
class on the measured node plus the fraction of (HIF, capacitor) pairs the
HIF scores below.
"""
import argparse
import json
from dataclasses import replace

import numpy as np

from hifdetect import bench, feedersim, picae


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--snr-db", type=float, default=50.0)
    ap.add_argument("--factor", type=int, default=1)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.0, 200.0])
    ap.add_argument("--epochs", type=int, default=None)
    args = ap.parse_args(argv)

    ds = feedersim.generate_dataset(feedersim.DatasetConfig(snr_db=args.snr_db), args.seed)
    ds = feedersim.downsample_dataset(ds, args.factor)
    base = picae.TrainConfig(seed=args.seed)
    if args.epochs:
        base = replace(base, k_max=args.epochs)
    for lam in args.lambdas:
        for node in ds.manifest["config"]["measured_nodes"]:
            fitted = bench.fit_detector("picae", ds, node, replace(base, lambda_r=lam))
            V, C, labels, _ = bench.arrays(ds, "test", node)
            g = bench.gammas(fitted, V, C)
            row = {"lambda_r": lam, "node": node}
            for label in feedersim.Label:
                sel = g[[y == label for y in labels]]
                if sel.size:
                    row[label.value] = [round(float(q), 3) for q in np.quantile(np.log10(sel), [0.05, 0.5, 0.95])]
            hif = g[[y == feedersim.Label.HIF for y in labels]]
            cap = g[[y == feedersim.Label.CAP for y in labels]]
            row["hif_below_cap"] = round(float(np.mean(hif[:, None] < cap[None, :])), 3)
            if fitted.state is not None:
                row["xi"] = [round(fitted.state.xi1, 3), round(fitted.state.xi2, 3)]
            print(json.dumps(row), flush=True)


if __name__ == "__main__":
    main()
