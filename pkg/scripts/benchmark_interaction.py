#!/usr/bin/env python3
"""Measure the interactive point-add round trip (engine only, no HTTP)."""

import argparse
import time

import numpy as np

from splineseg import (
    EnergyConfig,
    MeshParams,
    PhantomSpec,
    create_session,
    embed,
    generate_phantom,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = PhantomSpec(shape="sphere", radii=(10, 10, 10),
                       blur_sigma=1.0, noise_sigma=0.05, seed=11)
    image, prob, _ = generate_phantom(spec)
    sess = create_session(prob, MeshParams(12, 16, 0), EnergyConfig(), image=image)

    rng = np.random.default_rng(args.seed)
    times = []
    for _ in range(args.points):
        theta = rng.uniform(0, 2 * np.pi)
        phi = np.arccos(rng.uniform(-1, 1))
        sign = 1 if rng.integers(0, 2) else -1
        rho = 10.0 * (1 + sign * rng.uniform(0.08, 0.15))
        t0 = time.perf_counter()
        pt, res = sess.add_point(embed(sess.origin, rho, theta, phi))
        times.append(time.perf_counter() - t0)
        print(f"add {pt.id}: {times[-1] * 1e3:7.1f} ms  iters {res.iterations:3d}  "
              f"residual {sess.residual(pt):.2e} mm")
        sess.undo()
    print(f"median {np.median(times) * 1e3:.1f} ms, max {max(times) * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
