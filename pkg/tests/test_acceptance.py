"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured value next to its threshold."""

import json
import time
from dataclasses import replace

import numpy as np
import pytest

import splineseg as ss
from splineseg.cli import main as cli_main
from splineseg.session import UserPoint, create_session
from splineseg.tuning import (
    TuningProtocol,
    brute_force_search,
    interaction_response,
    refined_search,
    simulate_points,
)

from test_metrics import brute_force_dice, brute_force_hausdorff, random_mask


def _report(name: str, ok: bool, detail: str):
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def ball(ball_phantom):
    return ball_phantom


@pytest.fixture(scope="module")
def ball_session(ball):
    image, prob, _ = ball
    return create_session(prob, ss.MeshParams(12, 16, 0), ss.EnergyConfig(),
                          image=image)


def _perturbed(params, seed, radius=10.0, origin=(32, 32, 32), sigma=0.6):
    rng = np.random.default_rng(seed)
    s = ss.init_sphere(origin, radius, params)
    return s.with_coeffs(s.coeffs + rng.normal(0, sigma, s.coeffs.shape))


def test_interaction_gradient_exactness():
    """Closed-form point gradient vs finite differences, all coefficients."""
    params = ss.MeshParams(12, 16, 0)
    t0 = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(123)
    for trial in range(20):
        s = _perturbed(params, seed=trial)
        theta = rng.uniform(0, 2 * np.pi)
        phi = rng.uniform(0.05, np.pi - 0.05)
        rho = ss.evaluate(s, theta, phi) * rng.uniform(0.8, 1.2)
        pt = UserPoint("a", ss.embed(s.origin, rho, theta, phi), theta, phi, rho)
        g = ss.interaction_gradient(s, [pt]).reshape(-1)
        eps = 1e-6
        fd = np.zeros_like(g)
        flat = s.coeffs.reshape(-1)
        for i in range(flat.size):
            cp = flat.copy()
            cm = flat.copy()
            cp[i] += eps
            cm[i] -= eps
            shape = s.coeffs.shape
            fd[i] = (ss.interaction_energy(s.with_coeffs(cp.reshape(shape)), [pt])
                     - ss.interaction_energy(s.with_coeffs(cm.reshape(shape)), [pt])
                     ) / (2 * eps)
        denom = np.abs(fd).max()
        if denom > 0:
            worst = max(worst, np.abs(g - fd).max() / denom)
    elapsed = time.perf_counter() - t0
    _report("point-gradient-exactness", worst < 1e-6 and elapsed < 10.0,
            f"max rel err {worst:.2e} < 1e-6, {elapsed:.1f}s < 10s")


def test_yezzi_gradient_sanity(sharp_ball_phantom):
    _, prob, _ = sharp_ball_phantom
    params = ss.MeshParams(12, 16, 0)
    s = _perturbed(params, seed=7, sigma=0.5)
    nu = 10
    g = ss.yezzi_gradient(s, prob, nu).reshape(-1)
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in rng.choice(g.size, 5, replace=False):
        eps = 1e-5
        cp = s.coeffs.reshape(-1).copy()
        cm = cp.copy()
        cp[i] += eps
        cm[i] -= eps
        shape = s.coeffs.shape
        fd = (ss.yezzi_energy(s.with_coeffs(cp.reshape(shape)), prob, nu)
              - ss.yezzi_energy(s.with_coeffs(cm.reshape(shape)), prob, nu)) / (2 * eps)
        worst = max(worst, abs(g[i] - fd) / max(abs(fd), 1e-12))

    # +2 voxel inflated sphere descends monotonically for 10 iterations
    cfg = ss.EnergyConfig(alpha=0, eta=1, gamma=0, nu_prob=10, step=0.2, max_iters=1)
    cur = ss.init_sphere((32, 32, 32), 12.0, params)
    rng = np.random.default_rng(0)
    th = rng.uniform(0, 2 * np.pi, 400)
    ph = np.arccos(rng.uniform(-1, 1, 400))
    errors = [float(np.abs(ss.evaluate_many(cur, th, ph) - 10.0).mean())]
    for _ in range(10):
        cur = ss.evolve(cur, None, prob, [], cfg).surface
        errors.append(float(np.abs(ss.evaluate_many(cur, th, ph) - 10.0).mean()))
    monotone = all(a > b for a, b in zip(errors, errors[1:]))
    _report("yezzi-gradient-sanity", worst < 1e-3 and monotone,
            f"max FD rel err {worst:.2e} < 1e-3, radial error "
            f"{errors[0]:.2f}->{errors[-1]:.2f} mm monotone={monotone}")


def test_partition_of_unity_coarse_grid():
    rng = np.random.default_rng(42)
    th = rng.uniform(0, 2 * np.pi, 1000)
    ph = rng.uniform(0, np.pi, 1000)
    worst = 0.0
    combos = 0
    for scale in (0, 1):
        for nt in range(6, 25, 2):
            for npi in range(6, 25, 2):
                s = ss.init_sphere((0, 0, 0), 10.0, ss.MeshParams(nt, npi, scale))
                err = float(np.abs(ss.evaluate_many(s, th, ph) - 10.0).max())
                worst = max(worst, err)
                combos += 1
    _report("partition-of-unity", worst < 1e-9,
            f"max |psi - R| = {worst:.2e} < 1e-9 over {combos} mesh combos x 1000 angles")


def test_fit_quality(ball, lobed_phantom):
    params = ss.MeshParams(12, 16, 0)
    _, prob, truth = ball
    t0 = time.perf_counter()
    sess = create_session(prob, params, ss.EnergyConfig())
    t_ball = time.perf_counter() - t0
    d_ball = ss.dice(ss.rasterize(sess.surface, truth.dims, truth.spacing), truth)

    _, lprob, ltruth = lobed_phantom
    t0 = time.perf_counter()
    lsess = create_session(lprob, params, ss.EnergyConfig())
    t_lobed = time.perf_counter() - t0
    d_lobed = ss.dice(ss.rasterize(lsess.surface, ltruth.dims, ltruth.spacing), ltruth)
    ok = d_ball >= 0.95 and d_lobed >= 0.90 and t_ball < 30 and t_lobed < 30
    _report("fit-quality", ok,
            f"ball Dice {d_ball:.3f} >= 0.95 in {t_ball:.1f}s; "
            f"lobed Dice {d_lobed:.3f} >= 0.90 in {t_lobed:.1f}s (< 30s each)")


def test_interaction_contract(ball):
    image, prob, _ = ball
    params = ss.MeshParams(12, 16, 0)
    sess = create_session(prob, params, ss.EnergyConfig(), image=image)
    theta, phi = 0.9, 1.2
    rho_out = 1.15 * ss.evaluate(sess.surface, theta, phi)
    pt, _ = sess.add_point(ss.embed(sess.origin, rho_out, theta, phi))
    r1 = sess.residual(pt)
    ok1 = r1 <= 0.05 * rho_out
    sess.undo()

    anti = (np.mod(theta + np.pi, 2 * np.pi), np.pi - phi)
    rho_in = 0.85 * ss.evaluate(sess.surface, *anti)
    p1, _ = sess.add_point(ss.embed(sess.origin, rho_out, theta, phi))
    p2, _ = sess.add_point(ss.embed(sess.origin, rho_in, *anti))
    res = sess.residuals()
    ok2 = res[p1.id] <= 0.05 * p1.rho_u and res[p2.id] <= 0.05 * p2.rho_u

    s = _perturbed(params, seed=5)
    pts = [UserPoint("x", ss.embed(s.origin, 11.5, 0.3, 1.0), 0.3, 1.0, 11.5),
           UserPoint("y", ss.embed(s.origin, 8.6, 3.1, 2.1), 3.1, 2.1, 8.6)]
    trace = ss.evolve(s, None, None, pts,
                      ss.EnergyConfig(alpha=0, eta=0, gamma=1, max_iters=50)).trace
    ok3 = all(a >= b for a, b in zip(trace, trace[1:]))
    _report("interaction-contract", ok1 and ok2 and ok3,
            f"single residual {r1:.3f} <= {0.05 * rho_out:.3f} mm; antipodal "
            f"{res[p1.id]:.3f}/{res[p2.id]:.3f} mm; E_i trace non-increasing={ok3}")


def test_goldilocks_reproduction():
    spec = ss.PhantomSpec(shape="sphere", radii=(12, 12, 12), blur_sigma=0.5, seed=31)
    _, _, label = ss.generate_phantom(spec)
    prob = label.with_kind("probability")
    cfg = ss.EnergyConfig(nu_prob=20, max_iters=120)
    icfg = replace(cfg, alpha=0.0, eta=0.3, gamma=1.0, nu_prob=cfg.nu_img, max_iters=50)
    meshes = {m: ss.MeshParams(*m, 0) for m in ((6, 6), (12, 16), (24, 24))}
    fits = {}
    for key, params in meshes.items():
        sphere = ss.init_sphere(ss.center_of_mass(label),
                                ss.equivalent_radius(label), params)
        fits[key] = ss.evolve(sphere, None, prob, [],
                              replace(cfg, alpha=0.0, gamma=0.0, eta=1.0)).surface
    dr = {m: [] for m in meshes}
    dk = {m: [] for m in meshes}
    trials = 20
    for trial in range(trials):
        proto = TuningProtocol(seed=1000 + trial)
        for key in meshes:
            fit = fits[key]
            pts = simulate_points(fit, proto)
            cur = fit
            active = []
            dks, drs = [], []
            for pt in pts:
                active.append(pt)
                before = cur
                cur = ss.evolve(cur, None, prob, active, icfg).surface
                a, b = interaction_response(before, cur, pt, proto)
                dks.append(a)
                drs.append(b)
            dk[key].append(np.mean(dks))
            dr[key].append(np.mean(drs))
    dr66, dr1216 = np.median(dr[(6, 6)]), np.median(dr[(12, 16)])
    dk2424, dk1216 = np.median(dk[(24, 24)]), np.median(dk[(12, 16)])
    ok = dr66 > dr1216 and dk2424 > dk1216
    _report("goldilocks-ordering", ok,
            f"median dr_bg [6,6]={dr66:.4f} > [12,16]={dr1216:.4f}; "
            f"median dK_fg [24,24]={dk2424:.5f} > [12,16]={dk1216:.5f}; {trials} trials")


def test_tuner_pipeline(tmp_path):
    specs = [
        ss.PhantomSpec(shape="lobed-blob", radii=(12, 12, 15), lobe_amplitude=0.20,
                       lobe_waves=(6, 5), lobe_ratio=0.7, blur_sigma=0.5, seed=21),
        ss.PhantomSpec(shape="lobed-blob", radii=(13, 13, 14), lobe_amplitude=0.18,
                       lobe_waves=(6, 5), lobe_ratio=0.7, blur_sigma=0.5, seed=22),
        ss.PhantomSpec(shape="lobed-blob", radii=(12, 12, 15), lobe_amplitude=0.18,
                       lobe_waves=(6, 11), lobe_ratio=1.6, blur_sigma=0.5, seed=23),
        ss.PhantomSpec(shape="lobed-blob", radii=(13, 12, 14), lobe_amplitude=0.17,
                       lobe_waves=(6, 11), lobe_ratio=1.6, blur_sigma=0.5, seed=24),
        ss.PhantomSpec(shape="lobed-blob", radii=(11, 12, 16), lobe_amplitude=0.22,
                       lobe_waves=(6, 5), lobe_ratio=0.7, blur_sigma=0.5, seed=25),
    ]
    labels = [ss.generate_phantom(s)[2] for s in specs]
    proto = TuningProtocol(seed=0)
    cfg = ss.EnergyConfig(nu_prob=20, max_iters=120, samples=(48, 24))

    def run():
        coarse = brute_force_search(labels[0], proto, cfg, workers=2)
        return refined_search(labels[1:], coarse, proto, cfg, workers=2)

    report_a = run()
    report_b = run()
    ch = report_a.chosen
    in_bracket = (12 <= ch.n_theta <= 20 and 12 <= ch.n_phi <= 20 and ch.scale == 0)
    reproducible = report_a.to_json() == report_b.to_json()
    min_nk = min(p.n_knots for p in report_a.refined_set)
    minimal = ch.n_knots == min_nk and ch in report_a.refined_set
    _report("tuner-pipeline", in_bracket and reproducible and minimal,
            f"chosen [{ch.n_theta},{ch.n_phi}] s={ch.scale} in [12,20]^2 x s0; "
            f"byte-reproducible={reproducible}; minimal N_k={minimal} "
            f"(refined set {[(p.n_theta, p.n_phi) for p in report_a.refined_set]})")


def test_metric_oracles():
    worst_d = 0.0
    worst_h = 0.0
    pairs = 0
    for seed in range(50):
        a = random_mask(2 * seed, p=0.35)
        b = random_mask(2 * seed + 1, p=0.35)
        if not a.data.sum() or not b.data.sum():
            continue
        pairs += 1
        worst_d = max(worst_d, abs(ss.dice(a, b) - brute_force_dice(a, b)))
        worst_h = max(worst_h, abs(ss.hausdorff(a, b, "voxel")
                                   - brute_force_hausdorff(a, b)))
    _report("metric-oracles", worst_d == 0.0 and worst_h == 0.0,
            f"{pairs} pairs; max |dice err| = {worst_d} and max |hd err| = {worst_h} (exact)")


def test_anatomical_plausibility(ball, lobed_phantom, ball_session):
    masks = [ball_session.export().mask]
    image, prob, _ = ball
    sess = create_session(prob, ss.MeshParams(12, 16, 0), ss.EnergyConfig(), image=image)
    sess.add_point(ss.embed(sess.origin, 11.8, 0.4, 0.9))
    sess.add_point(ss.embed(sess.origin, 8.3, 3.6, 2.2))
    masks.append(sess.export().mask)
    _, lprob, _ = lobed_phantom
    lsess = create_session(lprob, ss.MeshParams(12, 16, 0), ss.EnergyConfig())
    masks.append(lsess.export().mask)
    stats = [ss.component_stats(m) for m in masks]
    ok = all(st["components"] == 1 and st["cavities"] == 0 for st in stats)
    _report("anatomical-plausibility", ok,
            f"{len(masks)} exported masks, components/cavities = "
            + ", ".join(f"{st['components']}/{st['cavities']}" for st in stats))


def test_realtime_budget(ball):
    image, prob, _ = ball
    sess = create_session(prob, ss.MeshParams(12, 16, 0), ss.EnergyConfig(),
                          image=image)
    # warm pass compiles the numba kernel and primes caches
    warm, _ = sess.add_point(ss.embed(sess.origin, 10.9, 2.8, 1.7))
    sess.undo()
    times = []
    for theta, phi, rel in ((1.0, 1.3, 1.10), (4.2, 1.9, 0.92), (2.6, 0.8, 1.08)):
        rho = rel * ss.evaluate(sess.surface, theta, phi)
        t0 = time.perf_counter()
        sess.add_point(ss.embed(sess.origin, rho, theta, phi))
        times.append(time.perf_counter() - t0)
        sess.undo()
    med = float(np.median(times))
    _report("realtime-budget", med <= 0.200,
            f"median point-add {med * 1e3:.0f} ms <= 200 ms "
            f"(all: {', '.join(f'{t * 1e3:.0f}' for t in times)} ms)")


def test_replay_determinism(tmp_path, ball):
    image, prob, _ = ball
    prob_path = ss.save_volume(prob, tmp_path / "prob.json")
    img_path = ss.save_volume(image, tmp_path / "img.json")
    sess = create_session(prob, ss.MeshParams(12, 16, 0), ss.EnergyConfig(),
                          image=image)
    clicks = [ss.embed(sess.origin, 11.4, 0.8, 1.1),
              ss.embed(sess.origin, 9.0, 2.4, 2.1),
              ss.embed(sess.origin, 10.7, 5.1, 0.7)]
    for c in clicks:
        sess.add_point(c)
    interactive = sess.export().mask
    (tmp_path / "clicks.json").write_text(
        json.dumps([[float(x) for x in c] for c in clicks]))
    rc = cli_main(["segment", "--prob", str(prob_path), "--image", str(img_path),
                   "--mesh", "12x16", "--out", str(tmp_path / "replay"),
                   "--points", str(tmp_path / "clicks.json")])
    replayed = ss.load_volume(tmp_path / "replay_mask.json")
    identical = (rc == 0 and
                 replayed.data.tobytes() == interactive.data.tobytes())
    _report("replay-determinism", identical,
            f"CLI replay mask bit-identical to interactive export = {identical}")
