"""Command-line entry points: segment, tune, phantom, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .energy import EnergyConfig
from .phantom import PhantomSpec, generate_phantom
from .session import SessionError, create_session
from .surface import MeshParams, to_obj
from .tuning import (
    TuningProtocol,
    brute_force_search,
    landscape_csv,
    refined_search,
)
from .volume import VolumeError, load_volume, save_volume

EXIT_BAD_ARGS = 2
EXIT_IO = 3
EXIT_EMPTY = 4


def _mesh_arg(text: str) -> tuple[int, int]:
    try:
        t, p = text.lower().split("x")
        return int(t), int(p)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"mesh must look like 12x16, got {text!r}") from e


def _range_arg(text: str) -> tuple[int, int, int]:
    try:
        lo, hi, step = (int(x) for x in text.split(":"))
        return lo, hi, step
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"range must look like 6:24:2, got {text!r}") from e


def _scales_arg(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"scales must look like 0,1, got {text!r}") from e


def _load_cfg(path: str | None) -> EnergyConfig:
    if path is None:
        return EnergyConfig()
    try:
        return EnergyConfig.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as e:
        raise SystemExit(f"splineseg: bad config {path}: {e}") from e


def _load_points(path: str) -> list[dict]:
    raw = json.loads(Path(path).read_text())
    if isinstance(raw, dict) and "ops" in raw:
        return list(raw["ops"])
    if isinstance(raw, dict) and "points" in raw:
        raw = raw["points"]
    return [{"op": "add", "xyz": [float(c) for c in xyz]} for xyz in raw]


def cmd_segment(args) -> int:
    cfg = _load_cfg(args.config)
    try:
        prob = load_volume(args.prob)
        image = load_volume(args.image) if args.image else None
    except VolumeError as e:
        print(f"splineseg: {e}", file=sys.stderr)
        return EXIT_IO
    params = MeshParams(args.mesh[0], args.mesh[1], args.scale)
    try:
        sess = create_session(prob, params, cfg, image=image)
        if args.points:
            sess.apply_ops(_load_points(args.points))
    except SessionError as e:
        print(f"splineseg: {e}", file=sys.stderr)
        return EXIT_EMPTY
    bundle = sess.export()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_volume(bundle.mask, out.with_name(out.name + "_mask.json"))
    out.with_name(out.name + "_mesh.obj").write_text(to_obj(bundle.mesh))
    out.with_name(out.name + "_surface.json").write_text(
        json.dumps(bundle.surface, sort_keys=True)
    )
    print(f"wrote {out.name}_mask.json/.raw, {out.name}_mesh.obj, {out.name}_surface.json")
    return 0


def cmd_tune(args) -> int:
    cfg = _load_cfg(args.config)
    label_dir = Path(args.labels)
    headers = sorted(label_dir.glob("*.json"))
    labels = []
    for h in headers:
        try:
            v = load_volume(h)
        except VolumeError:
            continue
        if v.kind == "mask":
            labels.append((h, v))
    if not labels:
        print(f"splineseg: no mask volumes found in {label_dir}", file=sys.stderr)
        return EXIT_IO
    if args.coarse_label:
        coarse_path = Path(args.coarse_label)
        coarse = next((v for h, v in labels if h == coarse_path), None)
        if coarse is None:
            try:
                coarse = load_volume(coarse_path)
            except VolumeError as e:
                print(f"splineseg: {e}", file=sys.stderr)
                return EXIT_IO
        rest = [v for h, v in labels if h != coarse_path]
    else:
        coarse = labels[0][1]
        rest = [v for _, v in labels[1:]]
    proto = TuningProtocol(seed=args.seed, theta_range=args.theta_range,
                           phi_range=args.phi_range, scales=args.scales)
    coarse_result = brute_force_search(coarse, proto, cfg, workers=args.workers)
    report = refined_search(rest, coarse_result, proto, cfg, workers=args.workers)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    if args.csv:
        Path(args.csv).write_text(landscape_csv(list(report.coarse)))
    ch = report.chosen
    print(f"chosen mesh [{ch.n_theta},{ch.n_phi}] scale {ch.scale} -> {out}")
    return 0


def cmd_phantom(args) -> int:
    from dataclasses import replace

    try:
        spec = PhantomSpec.from_json(args.spec)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        image, prob, truth = generate_phantom(spec)
    except (OSError, json.JSONDecodeError, VolumeError, TypeError) as e:
        print(f"splineseg: bad phantom spec: {e}", file=sys.stderr)
        return EXIT_IO
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_volume(image, out.with_name(out.name + "_image.json"))
    save_volume(prob, out.with_name(out.name + "_prob.json"))
    save_volume(truth, out.with_name(out.name + "_truth.json"))
    print(f"wrote {out.name}_image/_prob/_truth volume pairs")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    cfg = ServiceConfig(
        port=args.port,
        data_dir=Path(args.data_dir),
        max_sessions=args.max_sessions,
        cors=tuple(args.cors or ()),
        ui_dir=Path(args.ui) if args.ui else None,
    )
    app = create_app(cfg, energy_cfg=_load_cfg(args.config))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splineseg")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed")
    common.add_argument("--config", default=None, help="energy config JSON file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", parents=[common],
                       help="fit a surface to a probability volume")
    p.add_argument("--prob", required=True, help="probability volume header (.json)")
    p.add_argument("--image", default=None, help="optional image volume header")
    p.add_argument("--mesh", type=_mesh_arg, default=(12, 16), help="TxP knot counts")
    p.add_argument("--scale", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--points", default=None, help="recorded click sequence (JSON)")
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("tune", parents=[common],
                       help="search mesh/scale over training labels")
    p.add_argument("--labels", required=True, help="directory of mask volume pairs")
    p.add_argument("--coarse-label", default=None,
                   help="label for the coarse search (default: first)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", default=None, help="optional energy landscape CSV")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--theta-range", type=_range_arg, default=(6, 24, 2),
                   help="azimuth knot range lo:hi:step")
    p.add_argument("--phi-range", type=_range_arg, default=(6, 24, 2),
                   help="zenith knot range lo:hi:step")
    p.add_argument("--scales", type=_scales_arg, default=(0, 1), help="scales, e.g. 0,1")
    p.set_defaults(fn=cmd_tune, seed=0)

    p = sub.add_parser("phantom", parents=[common], help="generate a synthetic volume triple")
    p.add_argument("--spec", required=True, help="phantom spec JSON")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(fn=cmd_phantom)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", default=".", help="volume store directory")
    p.add_argument("--max-sessions", type=int, default=16)
    p.add_argument("--cors", action="append", default=None, help="CORS origin (repeatable)")
    p.add_argument("--ui", default=None, help="static frontend directory to mount at /ui")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
