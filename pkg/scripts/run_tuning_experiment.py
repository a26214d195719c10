#!/usr/bin/env python3
"""Mesh/scale search experiment: coarse brute force on one label, refined
search over the rest, energy landscape CSV for plotting."""

import argparse
import time
from pathlib import Path

from splineseg import EnergyConfig, TuningProtocol, brute_force_search, refined_search
from splineseg.tuning import landscape_csv
from splineseg.volume import load_volume


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--labels", default="data/labels")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out", default="data/tuning_report.json")
    args = ap.parse_args()

    headers = sorted(Path(args.labels).glob("*.json"))
    labels = [load_volume(h) for h in headers]
    if not labels:
        raise SystemExit(f"no labels under {args.labels}; run make_phantoms.py first")
    proto = TuningProtocol(seed=args.seed)
    cfg = EnergyConfig()

    t0 = time.time()
    coarse = brute_force_search(labels[0], proto, cfg, workers=args.workers)
    print(f"coarse winner {coarse[1]} after {time.time() - t0:.0f}s")
    report = refined_search(labels[1:], coarse, proto, cfg, workers=args.workers)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    out.with_suffix(".csv").write_text(landscape_csv(list(report.coarse)))
    ch = report.chosen
    print(f"chosen [{ch.n_theta},{ch.n_phi}] scale {ch.scale}; "
          f"refined set {[(p.n_theta, p.n_phi) for p in report.refined_set]}")
    print(f"report -> {out}, landscape -> {out.with_suffix('.csv')}")


if __name__ == "__main__":
    main()
