#!/usr/bin/env python3
"""Generate the synthetic volume sets used by the experiments.

Writes a demo ball (image/prob/truth) and the five lobed training labels the
tuning experiment consumes.
"""

import argparse
from pathlib import Path

from splineseg import PhantomSpec, generate_phantom, save_volume

TUNING_SPECS = [
    PhantomSpec(shape="lobed-blob", radii=(12, 12, 15), lobe_amplitude=0.20,
                lobe_waves=(6, 5), lobe_ratio=0.7, blur_sigma=0.5, seed=21),
    PhantomSpec(shape="lobed-blob", radii=(13, 13, 14), lobe_amplitude=0.18,
                lobe_waves=(6, 5), lobe_ratio=0.7, blur_sigma=0.5, seed=22),
    PhantomSpec(shape="lobed-blob", radii=(12, 12, 15), lobe_amplitude=0.18,
                lobe_waves=(6, 11), lobe_ratio=1.6, blur_sigma=0.5, seed=23),
    PhantomSpec(shape="lobed-blob", radii=(13, 12, 14), lobe_amplitude=0.17,
                lobe_waves=(6, 11), lobe_ratio=1.6, blur_sigma=0.5, seed=24),
    PhantomSpec(shape="lobed-blob", radii=(11, 12, 16), lobe_amplitude=0.22,
                lobe_waves=(6, 5), lobe_ratio=0.7, blur_sigma=0.5, seed=25),
]

DEMO_SPEC = PhantomSpec(shape="sphere", radii=(10.0, 10.0, 10.0),
                        blur_sigma=1.0, noise_sigma=0.05, seed=11)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data", help="output directory")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    image, prob, truth = generate_phantom(DEMO_SPEC)
    save_volume(image, out / "demo_image.json")
    save_volume(prob, out / "demo_prob.json")
    save_volume(truth, out / "demo_truth.json")

    labels = out / "labels"
    labels.mkdir(exist_ok=True)
    for i, spec in enumerate(TUNING_SPECS):
        _, _, label = generate_phantom(spec)
        save_volume(label, labels / f"label{i}.json")
    print(f"wrote demo volumes and {len(TUNING_SPECS)} labels under {out}/")


if __name__ == "__main__":
    main()
