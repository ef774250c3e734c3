"""Batch command-line front end for enhancement and dehazing."""

import argparse
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import imagecore, report, solver
from .denoiser import IdentityDescent, NetworkDescent, load_weights

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

_IMAGE_EXTS = (".ppm", ".png")

# CLI spelling -> SolverConfig.prior_mode
_PRIOR_MODES = {"knowledge": "knowledge_only", "data": "data_only", "hybrid": "hybrid"}


class ConfigError(ValueError):
    pass


@dataclass
class JobSpec:
    mode: str
    inputs: list
    output_dir: str
    config: solver.SolverConfig
    weights_path: str | None
    emit_components: bool
    emit_trace: bool


def _parse_value(name, text, ftype):
    try:
        if ftype is bool:
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if ftype is int:
            return int(text)
        if ftype is float:
            return float(text)
        return text.strip()
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


def read_config_file(path):
    """Flat key=value file; every SolverConfig field is addressable."""
    ftypes = {f.name: f.type for f in fields(solver.SolverConfig)}
    # dataclass field types may be strings under postponed annotations
    pytypes = {"float": float, "int": int, "bool": bool, "str": str}
    overrides = {}
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in ftypes:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        ftype = ftypes[key]
        if isinstance(ftype, str):
            ftype = pytypes.get(ftype, str)
        overrides[key] = _parse_value(key, value, ftype)
    return overrides


def build_parser():
    p = argparse.ArgumentParser(
        prog="hpprop",
        description="Enhance underexposed images (or dehaze) via Retinex "
        "decomposition with hybrid-prior propagation.",
    )
    p.add_argument("--mode", choices=("enhance", "dehaze"), default="enhance")
    p.add_argument("--input", nargs="+", required=True,
                   help="image files and/or directories of .ppm/.png files")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--weights", default=None,
                   help="HPW1 weights file (falls back to $HPP_WEIGHTS)")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--mu-I", type=float, default=None)
    p.add_argument("--mu-R", type=float, default=None)
    p.add_argument("--lambda-I0", type=float, default=None)
    p.add_argument("--lambda-R0", type=float, default=None)
    p.add_argument("--lambda-growth", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--eps-div", type=float, default=None)
    p.add_argument("--prior-mode", choices=tuple(_PRIOR_MODES), default=None)
    p.add_argument("--no-illumination-adjust", action="store_true")
    p.add_argument("--emit-components", action="store_true",
                   help="also write the illumination and reflectance planes")
    p.add_argument("--emit-trace", action="store_true",
                   help="also write the per-stage trace (.tsv) and its figure (.png)")
    return p


_FLAG_FIELDS = {
    "gamma": "gamma",
    "t_max": "t_max",
    "mu_I": "mu_I",
    "mu_R": "mu_R",
    "lambda_I0": "lambda_I0",
    "lambda_R0": "lambda_R0",
    "lambda_growth": "lambda_growth",
    "theta": "theta",
    "eta": "eta",
    "eps_div": "eps_div",
}


def _expand_inputs(paths):
    inputs = []
    for path in paths:
        if os.path.isdir(path):
            names = sorted(os.listdir(path))
            found = [os.path.join(path, n) for n in names
                     if os.path.splitext(n)[1].lower() in _IMAGE_EXTS]
            if not found:
                raise ConfigError(f"no .ppm/.png images in directory {path}")
            inputs.extend(found)
        else:
            inputs.append(path)
    if not inputs:
        raise ConfigError("no inputs given")
    return inputs


def parse_config(argv):
    """Resolve flags over config file over defaults into a JobSpec."""
    args = build_parser().parse_args(argv)
    overrides = read_config_file(args.config) if args.config else {}
    for attr, field_name in _FLAG_FIELDS.items():
        value = getattr(args, attr)
        if value is not None:
            overrides[field_name] = value
    if args.prior_mode is not None:
        overrides["prior_mode"] = _PRIOR_MODES[args.prior_mode]
    elif "prior_mode" in overrides:
        if overrides["prior_mode"] not in solver.PRIOR_MODES:
            raise ConfigError(f"bad prior_mode {overrides['prior_mode']!r}")
    if args.no_illumination_adjust:
        overrides["adjust_illumination"] = False
    try:
        cfg = solver.SolverConfig(**overrides)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from e

    weights_path = args.weights or os.environ.get("HPP_WEIGHTS") or None
    if cfg.prior_mode in ("hybrid", "data_only") and not weights_path:
        raise ConfigError(
            f"prior_mode {cfg.prior_mode!r} requires --weights (or $HPP_WEIGHTS)"
        )
    inputs = _expand_inputs(args.input)
    out_dir = os.path.abspath(args.output_dir)
    for path in inputs:
        if os.path.abspath(path) == out_dir:
            raise ConfigError(f"output dir collides with input {path}")
    return JobSpec(
        mode=args.mode,
        inputs=inputs,
        output_dir=args.output_dir,
        config=cfg,
        weights_path=weights_path,
        emit_components=args.emit_components,
        emit_trace=args.emit_trace,
    )


def _plane_to_color(plane):
    return np.stack([plane] * 3, axis=-1)


def make_descent(spec):
    """Build the descent direction; raises ConfigError for bad weight files."""
    if spec.config.prior_mode == "knowledge_only":
        return IdentityDescent()
    try:
        return NetworkDescent(weights=load_weights(spec.weights_path))
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot load weights {spec.weights_path}: {e}") from e


def run_job(spec, out=sys.stdout):
    """Process every input; returns the exit code (0 ok, 1 partial failure)."""
    descent = make_descent(spec)
    os.makedirs(spec.output_dir, exist_ok=True)
    failures = 0
    for path in spec.inputs:
        stem, ext = os.path.splitext(os.path.basename(path))
        if ext.lower() not in _IMAGE_EXTS:
            ext = ".png"
        try:
            img = imagecore.load_image(path)
            if spec.mode == "dehaze":
                rep = solver.dehaze(img, spec.config, descent)
            else:
                rep = solver.enhance_color(img, spec.config, descent)
            dst = os.path.join(spec.output_dir, f"{stem}_enhanced{ext}")
            imagecore.save_image(rep.enhanced, dst)
            if spec.emit_components:
                imagecore.save_image(
                    _plane_to_color(rep.illumination),
                    os.path.join(spec.output_dir, f"{stem}_I{ext}"),
                )
                imagecore.save_image(
                    _plane_to_color(rep.reflectance),
                    os.path.join(spec.output_dir, f"{stem}_R{ext}"),
                )
            if spec.emit_trace:
                report.write_trace(
                    rep.trace, os.path.join(spec.output_dir, f"{stem}_trace.tsv")
                )
                report.plot_trace(
                    rep.trace,
                    os.path.join(spec.output_dir, f"{stem}_trace.png"),
                    title=stem,
                )
            final = rep.trace[-1]
            print(
                f"{path}\tok\twall_time={rep.wall_time:.3f}s"
                f"\tenergy={final.total:.6g}",
                file=out,
            )
        except Exception as e:
            failures += 1
            print(f"{path}\tfailed\t{e}", file=out)
    return EXIT_PARTIAL if failures else EXIT_OK


def main(argv=None):
    try:
        spec = parse_config(sys.argv[1:] if argv is None else argv)
        make_descent(spec)  # fail before touching any image
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run_job(spec)


if __name__ == "__main__":
    sys.exit(main())
