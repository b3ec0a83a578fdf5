"""`uncmap` command-line entry point.

Precedence for every option is flag > config file > default. Config files
hold `key=value` lines (dashes and underscores are interchangeable in keys,
`#` starts a comment). The resolved configuration and seed go to stderr on
every run; primary outputs are byte-identical for identical inputs.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import selftest
from .gaussians import MapFormatError, load_map, save_map
from .geometry import InputError
from .io import read_camera, read_frames, write_ppm, write_rbuf
from .nav import PerceptionCache, PerceptionConfig, PolicyConfig, evaluate, gen_scene, run_episode
from .nav.scene import DIFFICULTIES
from .renderer import default_threads, render
from .sgm_builder import BuildConfig, OptimizationError, build
from .uncertainty import EstimationError, Priors, UncertaintyConfig, estimate_all
from .value_map import query_sphere

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _point(text: str) -> tuple[float, float, float]:
    vals = _floats(text)
    if len(vals) != 3:
        raise UsageError(f"expected x,y,z, got {text!r}")
    return tuple(vals)


@dataclass(frozen=True)
class Opt:
    name: str
    type: type | object
    default: object = None
    required: bool = False
    help: str = ""


COMMON = [
    Opt("config", str, None, help="key=value config file"),
    Opt("seed", int, 0, help="64-bit master seed"),
    Opt("threads", int, None, help="worker cap (default: UNCMAP_THREADS or all cores)"),
]

COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "build-map": ("build a Semantic Gaussian Map from a scene directory", [
        Opt("scene", str, required=True), Opt("out", str, required=True),
        Opt("tau-e", float, 0.015), Opt("tau-alpha", float, 0.005), Opt("iters", int, 500),
        Opt("stride", int, 2)]),
    "estimate": ("attach U^g, U^s, U^a to every primitive", [
        Opt("map", str, required=True), Opt("scene", str, required=True), Opt("out", str, required=True),
        Opt("csv", str, None, help="per-primitive CSV (default: <out>.csv)"),
        Opt("delta", float, 0.0025), Opt("eta", float, 0.1), Opt("epsilon", float, 0.0025),
        Opt("steps", int, 200), Opt("samples", int, 8), Opt("sigma-obs", float, 0.1)]),
    "render": ("render a map from a scene frame camera or a camera file", [
        Opt("map", str, required=True), Opt("out", str, required=True, help="output path prefix"),
        Opt("scene", str, None), Opt("frame", int, 0), Opt("camera", str, None),
        Opt("width", int, None), Opt("height", int, None)]),
    "query": ("aggregate a value-map sphere and print one CSV row", [
        Opt("map", str, required=True), Opt("center", _point, required=True), Opt("radius", float, 0.75)]),
    "navigate": ("run one episode and write its trace as JSON lines", [
        Opt("difficulty", str, "complex"), Opt("gamma", float, 1.0), Opt("out", str, None),
        Opt("max-steps", int, 15)]),
    "eval": ("success rate and SPL over seeded scenes for a gamma sweep", [
        Opt("episodes", int, 100), Opt("difficulty", str, "complex"),
        Opt("gamma-sweep", _floats, "1.0,0.8,0.6,0.4,0.2,0"), Opt("out", str, None),
        Opt("max-steps", int, 15)]),
    "selftest": ("run the closed-form example checks", []),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _key(name: str) -> str:
    return name.replace("-", "_")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uncmap", description="Semantic Gaussian maps with per-primitive uncertainty")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for cmd, (desc, opts) in COMMANDS.items():
        p = sub.add_parser(cmd, help=desc, description=desc)
        for o in COMMON + opts:
            # values stay strings here so that config-file values and flags share one conversion path
            p.add_argument(f"--{o.name}", dest=_key(o.name), default=argparse.SUPPRESS,
                           help=o.help + (" (required)" if o.required else f" (default: {o.default})"))
    return parser


def read_config(path) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[_key(k.strip())] = v.strip()
    return out


def _convert(o: Opt, value):
    if value is None:
        return None
    if o.type in (str, None):
        return str(value)
    try:
        return o.type(value)
    except UsageError:
        raise
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--{o.name}: cannot parse {value!r}") from exc


def resolve(cmd: str, flags: dict) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    opts = {_key(o.name): o for o in COMMON + COMMANDS[cmd][1]}
    cfg = {k: o.default for k, o in opts.items()}
    if flags.get("config"):
        for k, v in read_config(flags["config"]).items():
            if k not in opts or k == "config":
                raise UsageError(f"unknown config key {k!r} for {cmd}")
            cfg[k] = v
    cfg.update(flags)
    cfg = {k: _convert(opts[k], v) for k, v in cfg.items()}
    for k, o in opts.items():
        if o.required and cfg.get(k) is None:
            raise UsageError(f"missing required --{o.name}")
    if cfg["threads"] is None:
        cfg["threads"] = default_threads()
    if cfg["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    return cfg


def _report(cmd: str, cfg: dict, err) -> None:
    shown = " ".join(f"{k}={cfg[k]}" for k in sorted(cfg) if k not in ("seed", "config"))
    print(f"uncmap {cmd}: {shown}", file=err)
    print(f"seed={cfg['seed']}", file=err)


# -- commands ---------------------------------------------------------------


def cmd_build_map(cfg, out, err):
    frames = read_frames(cfg["scene"])
    bcfg = BuildConfig(n_iters=cfg["iters"], tau_e=cfg["tau_e"], tau_alpha=cfg["tau_alpha"],
                       stride=cfg["stride"], seed=cfg["seed"], threads=cfg["threads"])
    m = build(frames, bcfg)
    save_map(m, cfg["out"])
    print(f"wrote {len(m)} primitives to {cfg['out']}", file=err)


def cmd_estimate(cfg, out, err):
    m = load_map(cfg["map"])
    frames = read_frames(cfg["scene"])
    priors = Priors(cfg["delta"], cfg["eta"], cfg["epsilon"])
    ucfg = UncertaintyConfig(n_samples=cfg["samples"], steps=cfg["steps"], sigma_obs=cfg["sigma_obs"],
                             seed=cfg["seed"], threads=cfg["threads"])
    mu = estimate_all(m, frames, priors, ucfg)
    save_map(mu, cfg["out"])
    csv_path = cfg["csv"] or cfg["out"] + ".csv"
    rows = ["index,ug,us,ua"]
    rows += [f"{i},{float(a)!r},{float(b)!r},{float(c)!r}" for i, (a, b, c) in enumerate(mu.records[:, 17:20])]
    Path(csv_path).write_text("\n".join(rows) + "\n")
    print(f"wrote {cfg['out']} and {csv_path}", file=err)


def cmd_render(cfg, out, err):
    m = load_map(cfg["map"])
    if cfg["camera"]:
        if not (cfg["width"] and cfg["height"]):
            raise UsageError("--camera needs --width and --height")
        cam = read_camera(cfg["camera"], cfg["width"], cfg["height"])
    elif cfg["scene"]:
        frames = read_frames(cfg["scene"])
        if not 0 <= cfg["frame"] < len(frames):
            raise UsageError(f"--frame must be in [0, {len(frames)})")
        cam = frames[cfg["frame"]].cam
    else:
        raise UsageError("missing required --scene or --camera")
    buf = render(m, cam, threads=cfg["threads"])
    prefix = cfg["out"]
    write_ppm(prefix + ".ppm", buf.color)
    write_rbuf(prefix + ".depth.rbuf", buf.depth)
    write_rbuf(prefix + ".sem.rbuf", buf.sem)
    write_rbuf(prefix + ".acc.rbuf", buf.acc)
    print(f"wrote {prefix}.ppm and depth/sem/acc buffers", file=err)


def cmd_query(cfg, out, err):
    m = load_map(cfg["map"])
    if not cfg["radius"] > 0:
        raise UsageError("--radius must be positive")
    print(query_sphere(m, cfg["center"], cfg["radius"]).csv_row(), file=out)


def _difficulties(text: str) -> list[str]:
    vals = [d.strip() for d in text.split(",") if d.strip()]
    bad = [d for d in vals if d not in DIFFICULTIES]
    if bad or not vals:
        raise UsageError(f"--difficulty must be from {DIFFICULTIES}, got {text!r}")
    return vals


def cmd_navigate(cfg, out, err):
    diff = _difficulties(cfg["difficulty"])
    if len(diff) != 1:
        raise UsageError("navigate takes a single --difficulty")
    if not 0.0 <= cfg["gamma"] <= 1.0:
        raise UsageError("--gamma must lie in [0, 1]")
    scene = gen_scene(cfg["seed"], diff[0])
    cache = PerceptionCache(PerceptionConfig(threads=cfg["threads"]))
    ep = run_episode(scene, PolicyConfig(gamma=cfg["gamma"]), cache, cfg["max_steps"])
    lines = [json.dumps(s.to_dict(), sort_keys=True) for s in ep.steps]
    lines.append(json.dumps({"summary": ep.summary()}, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if cfg["out"]:
        Path(cfg["out"]).write_text(text)
    else:
        out.write(text)
    print(f"outcome={ep.outcome} path={ep.path}", file=err)


def cmd_eval(cfg, out, err):
    gammas = cfg["gamma_sweep"]
    if not gammas or any(not 0.0 <= g <= 1.0 for g in gammas):
        raise UsageError("--gamma-sweep values must lie in [0, 1]")
    if cfg["episodes"] < 1:
        raise UsageError("--episodes must be positive")
    cache = PerceptionCache(PerceptionConfig(threads=cfg["threads"]))
    rows = ["gamma,difficulty,SR,SPL"]
    for diff in _difficulties(cfg["difficulty"]):
        result, _ = evaluate(cfg["episodes"], diff, gammas, first_seed=cfg["seed"], max_steps=cfg["max_steps"],
                             cache=cache)
        for r in result:
            rows.append(f"{r.gamma!r},{r.difficulty},{r.sr!r},{r.spl!r}")
            print(f"gamma={r.gamma} {r.difficulty}: SR={r.sr:.3f} SPL={r.spl:.3f}", file=err)
    text = "\n".join(rows) + "\n"
    if cfg["out"]:
        Path(cfg["out"]).write_text(text)
    else:
        out.write(text)


def cmd_selftest(cfg, out, err):
    failures = selftest.run(lambda line: print(line, file=out))
    if failures:
        raise AssertionError(f"{failures} selftest check(s) failed")


HANDLERS = {
    "build-map": cmd_build_map, "estimate": cmd_estimate, "render": cmd_render, "query": cmd_query,
    "navigate": cmd_navigate, "eval": cmd_eval, "selftest": cmd_selftest,
}


def dispatch(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = make_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError("missing command")
        cmd = ns.command
        flags = {k: v for k, v in vars(ns).items() if k != "command"}
        cfg = resolve(cmd, flags)
        _report(cmd, cfg, err)
        os.environ["UNCMAP_THREADS"] = str(cfg["threads"])
        HANDLERS[cmd](cfg, out, err)
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        print(parser.format_usage(), file=err, end="")
        return EXIT_USAGE
    except (MapFormatError, InputError, OSError) as exc:
        print(f"data error: {exc}", file=err)
        return EXIT_DATA
    except (OptimizationError, EstimationError, FloatingPointError, np.linalg.LinAlgError, AssertionError) as exc:
        print(f"numerical failure: {exc}", file=err)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
