"""Batch command-line front end.

    shb simulate|ladder|blowup|shoot|rescale|figure --config run.json [--tol x] [--out dir]

Exit codes: 0 success, 2 configuration error, 3 integration or validation
failure, 4 no sign change of the shooting function, 5 no gap contraction.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import blowup, ladder, shooting, transforms
from .errors import (
    BracketingFailed,
    InsufficientRungs,
    NoCompleteRung,
    NoContraction,
    NonFiniteInput,
    ShbError,
    StepUnderflowAtStart,
    TrivialSolution,
)
from .integrator import BACKWARD, FORWARD, StopPolicy, Tolerance, energy_audit, integrate
from .model import Problem

log = logging.getLogger("shb")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATOR = 3
EXIT_BRACKET = 4
EXIT_CONTRACTION = 5

BOTH = "both"
FIGURE_IC = (0.8, 0.0, 0.0, 0.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: Problem = field(default_factory=lambda: Problem.prototype(1.5))
    ic: tuple = FIGURE_IC
    direction: str = FORWARD
    tol: Tolerance = field(default_factory=Tolerance)
    stop: StopPolicy = field(default_factory=StopPolicy)
    out: str = "out"
    scan: tuple = (1e-3, 1e3, 61)
    mu: Optional[float] = None

    _KEYS = ("problem", "ic", "direction", "span", "tol", "stop", "outputs", "scan", "mu")

    def to_dict(self):
        return {
            "problem": self.problem.to_dict(),
            "ic": list(self.ic),
            "direction": self.direction,
            "span": self.stop.s_max,
            "tol": {"rel": self.tol.rel, "abs": self.tol.abs},
            "stop": {
                "escape_threshold": self.stop.escape_threshold,
                "min_step": self.stop.min_step,
                "max_steps": self.stop.max_steps,
            },
            "outputs": {"dir": self.out},
            "scan": {"a_min": self.scan[0], "a_max": self.scan[1], "grid": self.scan[2]},
            "mu": self.mu,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            mu = d.get("mu")
            if mu is not None:
                mu = float(mu)
                prob = transforms.mu_to_problem(mu).problem
            else:
                prob = Problem.from_dict(d["problem"])
            ic = tuple(float(v) for v in d.get("ic", FIGURE_IC))
            if len(ic) != 4 or not all(math.isfinite(v) for v in ic):
                raise ConfigError("ic needs 4 finite numbers")
            direction = d.get("direction", FORWARD)
            if direction not in (FORWARD, BACKWARD, BOTH):
                raise ConfigError(f"direction must be forward, backward or both, got {direction!r}")
            t = d.get("tol", {})
            tol = Tolerance(float(t.get("rel", 1e-10)), float(t.get("abs", 1e-12)))
            s = d.get("stop", {})
            stop = StopPolicy(
                s_max=float(d.get("span", 100.0)),
                escape_threshold=float(s.get("escape_threshold", 1e8)),
                min_step=float(s.get("min_step", 1e-13)),
                max_steps=int(s.get("max_steps", 2_000_000)),
            )
            sc = d.get("scan", {})
            scan = (float(sc.get("a_min", 1e-3)), float(sc.get("a_max", 1e3)), int(sc.get("grid", 61)))
            out = str(d.get("outputs", {}).get("dir", "out"))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(prob, ic, direction, tol, stop, out, scan, mu)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d)


def _outdir(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False, default=_jsonable)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v)}")


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


def _directions(cfg):
    return (FORWARD, BACKWARD) if cfg.direction == BOTH else (cfg.direction,)


def cmd_simulate(cfg):
    out = _outdir(cfg)
    for d in _directions(cfg):
        traj = integrate(cfg.problem, cfg.ic, d, cfg.tol, cfg.stop)
        traj.to_csv(os.path.join(out, f"trajectory_{d}.csv"))
        audit = energy_audit(traj)
        _write_json(os.path.join(out, f"audit_{d}.json"), {
            "E0": audit.E0,
            "max_drift": audit.max_drift,
            "argmax_s": audit.argmax_s,
            "max_relative": audit.max_relative,
            "stop_reason": traj.stop_reason,
            "s_end": traj.s_end,
            "n_segments": traj.n_segments,
        })
    return EXIT_OK


def _report_dict(rep):
    return {
        "ordering_ok": bool(np.all(rep.ordering_ok)),
        "sign_pattern_ok": bool(np.all(rep.sign_pattern_ok)),
        "r_sign_ok": bool(np.all(rep.r_sign_ok)),
        "theta_ok": bool(np.all(rep.theta_ok)),
        "l3_ok": bool(np.all(rep.l3_ok)),
        "H_increasing": bool(np.all(rep.H_increasing)),
        "l1_first_index": rep.l1_first_index,
        "amp_exponent": rep.amp_exponent.slope,
        "gap_exponents": {k: v.slope for k, v in rep.gap_exponents.items()},
        "fit_rungs": rep.fit_rungs,
    }


def cmd_ladder(cfg):
    out = _outdir(cfg)
    for d in _directions(cfg):
        traj = integrate(cfg.problem, cfg.ic, d, cfg.tol, cfg.stop)
        try:
            lad = ladder.extract_ladder(traj)
        except (TrivialSolution, NoCompleteRung) as exc:
            log.warning("%s: %s", d, exc)
            continue
        lad.to_csv(os.path.join(out, f"ladder_{d}.csv"))
        try:
            summary = _report_dict(ladder.sequence_diagnostics(lad, cfg.problem))
        except InsufficientRungs as exc:
            summary = {"error": str(exc)}
        summary["n_extrema"] = len(lad.m)
        _write_json(os.path.join(out, f"ladder_{d}.json"), summary)
    return EXIT_OK


def cmd_blowup(cfg):
    out = _outdir(cfg)
    code = EXIT_OK
    for d in _directions(cfg):
        rep = blowup.detect_blowup(cfg.problem, cfg.ic, d, cfg.tol, cfg.stop)
        rep.to_json(os.path.join(out, f"blowup_{d}.json"))
        if rep.fit_error == NoContraction.__name__ and rep.verdict != blowup.BOUNDED:
            code = EXIT_CONTRACTION
    return code


def cmd_shoot(cfg):
    out = _outdir(cfg)
    tol = cfg.tol if cfg.tol != Tolerance() else shooting.SHOOT_TOL
    sol = shooting.find_periodic(cfg.problem, cfg.scan, tol)
    sol.orbit.to_csv(os.path.join(out, "periodic.csv"))
    sol.to_json(os.path.join(out, "periodic.json"))
    return EXIT_OK


def cmd_rescale(cfg):
    """Integrate the canonical form of a mu-form problem and pull it back.

    ``ic`` is read in the mu-form variables ``(U, U', U'', U''')`` at 0.
    """
    if cfg.mu is None:
        raise ConfigError("rescale needs 'mu' in the config")
    out = _outdir(cfg)
    form = transforms.mu_to_problem(cfg.mu)
    w0 = transforms.to_canonical_state(cfg.ic, cfg.mu)
    summary = {"mu": cfg.mu, "k": form.problem.k, "amplitude": form.amplitude, "abscissa": form.abscissa}
    for d in _directions(cfg):
        traj = integrate(form.problem, w0, d, cfg.tol, cfg.stop)
        U = transforms.pull_back(traj, cfg.mu)
        U.to_csv(os.path.join(out, f"mu_form_{d}.csv"))
        x = np.linspace(U.s_start, U.s_end, 1001)[1:-1]
        summary[f"max_residual_{d}"] = float(np.max(np.abs(transforms.mu_residual(U, cfg.mu, x))))
        summary[f"stop_reason_{d}"] = traj.stop_reason
    _write_json(os.path.join(out, "rescale.json"), summary)
    return EXIT_OK


# --- figure ---------------------------------------------------------------

SVG_W, SVG_H = 720, 420
MARGIN = 50
Y_CLIP = 4.0


def _sample(traj, n=1200, s_end=None):
    s_end = traj.s_end if s_end is None else s_end
    s = np.linspace(traj.s_start, s_end, n)
    return s, traj(s)[:, 0]


def _polylines(s, w, sx, sy):
    """Split a curve at the clip band so off-scale stretches are not drawn."""
    inside = np.abs(w) <= Y_CLIP
    pieces, cur = [], []
    for si, wi, ok in zip(s, w, inside):
        if ok:
            cur.append(f"{sx(si):.2f},{sy(wi):.2f}")
        elif cur:
            pieces.append(cur)
            cur = []
    if cur:
        pieces.append(cur)
    return [" ".join(p) for p in pieces if len(p) > 1]


def render_svg(curves, s_range, title):
    s0, s1 = s_range
    pw, ph = SVG_W - 2 * MARGIN, SVG_H - 2 * MARGIN

    def sx(s):
        return MARGIN + (s - s0) / (s1 - s0) * pw

    def sy(w):
        return MARGIN + (Y_CLIP - w) / (2 * Y_CLIP) * ph

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" '
        f'viewBox="0 0 {SVG_W} {SVG_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>',
        f'<text x="{SVG_W / 2:.0f}" y="20" text-anchor="middle">{title}</text>',
        f'<line x1="{MARGIN}" y1="{sy(0):.2f}" x2="{MARGIN + pw}" y2="{sy(0):.2f}" stroke="#888"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for tick in np.linspace(s0, s1, 5):
        lines.append(f'<text x="{sx(tick):.2f}" y="{MARGIN + ph + 16}" text-anchor="middle">{tick:g}</text>')
    for tick in (-Y_CLIP, 0.0, Y_CLIP):
        lines.append(f'<text x="{MARGIN - 6}" y="{sy(tick) + 4:.2f}" text-anchor="end">{tick:g}</text>')
    lines.append(f'<text x="{MARGIN + pw / 2:.0f}" y="{SVG_H - 8}" text-anchor="middle">s</text>')
    for i, (label, color, s, w) in enumerate(curves):
        for pts in _polylines(s, w, sx, sy):
            lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = MARGIN + 16 + 16 * i
        lines.append(f'<line x1="{MARGIN + pw - 110}" y1="{ly - 4}" x2="{MARGIN + pw - 90}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        lines.append(f'<text x="{MARGIN + pw - 84}" y="{ly}">{label}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_figure(cfg):
    """Solutions from the same data below (k=1.5) and above (k=3.5) the threshold."""
    out = _outdir(cfg)
    nl = cfg.problem.nl
    curves = []
    spans = []
    for k, color, s_max in ((1.5, "#c0392b", 40.0), (3.5, "#1f4e9c", 40.0)):
        prob = Problem(nl, k)
        traj = integrate(prob, cfg.ic, FORWARD, cfg.tol, replace(cfg.stop, s_max=s_max))
        traj.to_csv(os.path.join(out, f"figure_k{k:g}.csv"))
        s, w = _sample(traj)
        curves.append((f"k = {k:g}", color, s, w))
        spans.append(traj.s_end)
    svg = render_svg(curves, (0.0, max(spans)), "w(s) from (0.8, 0, 0, 0)" if cfg.ic == FIGURE_IC else "w(s)")
    with open(os.path.join(out, "figure.svg"), "w") as fh:
        fh.write(svg)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "ladder": cmd_ladder,
    "blowup": cmd_blowup,
    "shoot": cmd_shoot,
    "rescale": cmd_rescale,
    "figure": cmd_figure,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="shb", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON run configuration (optional for 'figure')")
    ap.add_argument("--tol", type=float, help="relative tolerance; absolute is set to tol/100")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            cfg = RunConfig.load(args.config)
        elif args.command == "figure":
            cfg = RunConfig(stop=StopPolicy(s_max=40.0))
        else:
            raise ConfigError(f"'{args.command}' needs --config")
        if args.tol is not None:
            cfg = replace(cfg, tol=Tolerance(args.tol, args.tol / 100))
        if args.out:
            cfg = replace(cfg, out=args.out)
    except (ConfigError, ShbError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BracketingFailed as exc:
        print(f"bracketing failed: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except NoContraction as exc:
        print(f"no contraction: {exc}", file=sys.stderr)
        return EXIT_CONTRACTION
    except (StepUnderflowAtStart, NonFiniteInput, ShbError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR


if __name__ == "__main__":
    sys.exit(main())
