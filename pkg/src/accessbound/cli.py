"""Command-line front end.

Every subcommand merges three layers of settings (built-in defaults, an
optional ``--config`` JSON file, then ``--param KEY=VALUE`` and dedicated
flags) and writes CSV/JSON/SVG files under ``--out``. Outputs carry the
config hash and seed and contain no timestamps, so identical settings give
byte-identical files.

Exit codes: 0 success, 1 invalid input or configuration, 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds, eo, geometry, support
from . import cellvolume as cv
from .plotting import line_chart_svg

OUT_ENV = "ACCESSBOUND_OUT"
DEFAULT_OUT = "accessbound_out"


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


# ---------------------------------------------------------------------------
# Settings and output helpers
# ---------------------------------------------------------------------------

TOY_MODEL = {"vocab_size": 16, "dim": 8, "layers": 1, "heads": 2, "head_dim": 4, "mlp_dim": 32,
             "norm": "linf", "embed_scale": 0.3, "weight_scale": 3.0, "unembed_scale": 3.0,
             "model_seed": 0}

DEFAULTS = {
    "bounds": {"model": None, "d": None, "vocab": None, "r": None, "theta": None,
               "epsilon": None, "significand_bits": 11, "m": 1, "q": None, "printed_cone": False},
    "support": {**TOY_MODEL, "model_file": None, "embeddings_csv": None,
                "lengths": [1, 2, 4, 8, 16, 32], "count": 10_000, "max_pairs": 10_000_000,
                "significand_bits": 11},
    "cellvol": {**TOY_MODEL, "model_file": None, "support_count": 10_000, "support_len": 16,
                "cell_samples": 1_000_000, "mc_samples": 100_000, "ns": list(range(1, 41)),
                "significand_bits": 11, "top": 10},
    "cram": {**TOY_MODEL, "model_file": None, "ms": [1, 2, 3, 4], "ns": list(range(1, 25)),
             "targets": 10, "lr": 0.05, "weight_decay": 0.01, "max_steps": 1500,
             "target_source": "random", "support_count": 10_000, "support_len": 16,
             "significand_bits": 11},
    "copy": {"symbols": 16, "dim": 16, "layers": 2, "heads": 4, "head_dim": 16, "mlp_dim": 64,
             "train_max_len": 12, "eval_max_len": 30, "batch": 16, "lr": 3e-3,
             "weight_decay": 0.0, "max_steps": 5000, "eval_every": 100, "eval_trials": 64,
             "save_model": False},
    "planecut": {**TOY_MODEL, "model_file": None, "anchor_tokens": None, "resolution": 64,
                 "margin": 0.5},
    "eo": {"p": [1, 2, 3], "D": [2, 3], "variant": ["coarse", "improved"], "max_l1": 30},
    "report": {},
}

STOCHASTIC = {"support", "cellvol", "cram", "copy", "planecut"}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    return data


def _settings(cmd: str, args) -> dict:
    cfg = dict(DEFAULTS[cmd])
    file_cfg = _load_config(args.config)
    # a config may hold one block per subcommand or a flat block
    if isinstance(file_cfg.get(cmd), dict):
        file_cfg = {**{k: v for k, v in file_cfg.items() if not isinstance(v, dict)}, **file_cfg[cmd]}
    seed = file_cfg.pop("seed", None)
    for k, v in file_cfg.items():
        if k not in cfg:
            raise ValidationError(f"unknown config field {k!r} for {cmd}")
        cfg[k] = v
    for item in args.param or []:
        if "=" not in item:
            raise ValidationError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        if k not in cfg:
            raise ValidationError(f"unknown parameter {k!r} for {cmd}")
        cfg[k] = _parse_value(v)
    for k in ("model", "model_file"):
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if args.seed is not None:
        seed = args.seed
    if cmd in STOCHASTIC and seed is None:
        raise ValidationError(f"missing required field 'seed' ({cmd} is stochastic; pass --seed)")
    if seed is not None:
        if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
    cfg["seed"] = seed
    return cfg


def config_hash(cmd: str, cfg: dict) -> str:
    blob = json.dumps({"cmd": cmd, **cfg}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Output:
    def __init__(self, cmd, cfg, out_dir, emit):
        self.cmd = cmd
        self.cfg = cfg
        self.dir = Path(out_dir)
        self.emit = emit
        self.hash = config_hash(cmd, cfg)
        self.written = []
        self.dir.mkdir(parents=True, exist_ok=True)

    def meta(self) -> dict:
        return {"command": self.cmd, "config_hash": self.hash, "seed": self.cfg.get("seed"),
                "config": self.cfg}

    def csv(self, name, body: str):
        if "csv" not in self.emit:
            return
        head = (f"# accessbound {self.cmd}\n# config_hash {self.hash}\n"
                f"# seed {self.cfg.get('seed')}\n")
        self._write(name, head + body)

    def json(self, name, payload: dict):
        if "json" not in self.emit:
            return
        data = {"meta": self.meta(), **payload}
        self._write(name, json.dumps(_clean(data), sort_keys=True, indent=2) + "\n")

    def svg(self, name, make):
        if "svg" not in self.emit:
            return
        try:
            text = make()
        except Exception as exc:  # plotting never changes the exit code
            print(f"warning: could not draw {name}: {exc}", file=sys.stderr)
            return
        head = f"<!-- accessbound {self.cmd} config_hash {self.hash} seed {self.cfg.get('seed')} -->\n"
        self._write(name, head + text)

    def _write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        self.written.append(str(path))


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _require(cfg, *names):
    for n in names:
        if cfg.get(n) is None:
            raise ValidationError(f"missing required field {n!r}")


def _precision(cfg):
    if cfg.get("epsilon") is not None:
        return bounds.UniformPrecision(float(cfg["epsilon"]))
    return bounds.FloatPrecision(int(cfg.get("significand_bits", 11)))


def _toy_model(cfg):
    from .toymodel import ToyTransformer, load_model

    if cfg.get("model_file"):
        p = Path(cfg["model_file"])
        if not p.is_file():
            raise ValidationError(f"model file not found: {p}")
        return load_model(p)
    return ToyTransformer.init_random(
        int(cfg["vocab_size"]), int(cfg["dim"]), int(cfg["layers"]), int(cfg["heads"]),
        int(cfg["head_dim"]), int(cfg["mlp_dim"]), norm=cfg["norm"], seed=int(cfg["model_seed"]),
        embed_scale=float(cfg["embed_scale"]), weight_scale=float(cfg["weight_scale"]),
        unembed_scale=float(cfg["unembed_scale"]))


def _fmt_log(lnx: float) -> str:
    if not math.isfinite(lnx):
        return "inf"
    return f"e^{lnx:.6g} = 2^{lnx / math.log(2):.6g} = 10^{lnx / math.log(10):.6g}"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_bounds(cfg, out: Output):
    prec = _precision(cfg)
    if cfg.get("model"):
        table = {r["name"].lower(): r for r in bounds.load_model_constants()["models"]}
        rec = table.get(str(cfg["model"]).lower())
        if rec is None:
            raise ValidationError(f"unknown model {cfg['model']!r}; known: "
                                  + ", ".join(r["name"] for r in table.values()))
        for k_cfg, k_rec in (("d", "d"), ("vocab", "vocab"), ("r", "r"), ("theta", "theta")):
            if cfg.get(k_cfg) is None:
                cfg[k_cfg] = rec[k_rec]
    _require(cfg, "d", "vocab", "r")
    d, V, r, m = int(cfg["d"]), int(cfg["vocab"]), float(cfg["r"]), int(cfg["m"])
    ball = bounds.ModelGeometry(d, V, geometry.Ball(d, r, "linf"), prec, m, cfg.get("q"))
    eps = ball.epsilon
    res = {"d": d, "vocab": V, "r": r, "epsilon": eps, "m": m,
           "log_count_finite": bounds.count_finite(ball),
           "threshold_finite": bounds.threshold_finite(ball),
           "slope_ball": bounds.slope_ball(ball).slope}
    lines = [f"d={d} |V|={V} r={r:g} eps={eps:.6g} m={m}",
             f"count_finite   {_fmt_log(res['log_count_finite'])}",
             f"threshold_n    {res['threshold_finite']:.6f}",
             f"C_ball         {res['slope_ball']:.6f}"]
    if cfg.get("theta") is not None:
        cone = bounds.ModelGeometry(d, V, geometry.Cone(d, r, float(cfg["theta"])), prec, m)
        res["theta"] = float(cfg["theta"])
        res["slope_cone"] = bounds.slope_cone(cone, printed=bool(cfg["printed_cone"])).slope
        res["slope_ratio_ball_over_cone"] = res["slope_ball"] / res["slope_cone"]
        lines.append(f"C_cone         {res['slope_cone']:.6f}")
    if cfg.get("q") is not None:
        res["q"] = float(cfg["q"])
        res["loglog_count_meanfield"] = bounds.count_meanfield(ball)
        res["log_threshold_meanfield"] = bounds.threshold_meanfield(ball)
        lines.append(f"meanfield ln ln count {res['loglog_count_meanfield']:.6f}")
        lines.append(f"meanfield ln n*       {res['log_threshold_meanfield']:.6f}")
    if cfg.get("model"):
        res["model"] = cfg["model"]
        lines.insert(0, f"model {cfg['model']}")
    print("\n".join(lines))
    out.json("bounds.json", {"bounds": res})
    rows = "quantity,value\n" + "".join(f"{k},{v}\n" for k, v in sorted(res.items())
                                          if isinstance(v, (int, float)))
    out.csv("bounds.csv", rows)


def _support_rows(cfg, model=None):
    prec = _precision(cfg)
    if cfg.get("embeddings_csv"):
        p = Path(cfg["embeddings_csv"])
        if not p.is_file():
            raise ValidationError(f"embeddings file not found: {p}")
        sample = support.load_embeddings_csv(p)
        _require(cfg, "vocab_size")
        return [(0, *row) for row in support.slopes_for_sample(sample, int(cfg["vocab_size"]), prec,
                                                              int(cfg["max_pairs"]), cfg["seed"])]
    rows = []
    for ell in cfg["lengths"]:
        sample = support.sample_embeddings(model, int(cfg["count"]), int(ell), cfg["seed"])
        for shape, params, sb in support.slopes_for_sample(sample, model.vocab_size, prec,
                                                           int(cfg["max_pairs"]), cfg["seed"]):
            rows.append((int(ell), shape, params, sb))
    return rows


def cmd_support(cfg, out: Output):
    model = None if cfg.get("embeddings_csv") else _toy_model(cfg)
    rows = _support_rows(cfg, model)
    out.csv("support.csv", support.curve_to_csv([(e, s, p, sb.slope) for e, s, p, sb in rows]))
    out.json("support.json", {"rows": [{"ell": e, "shape": s, "params": p, "slope": sb.slope,
                                        "log_packing": sb.log_packing} for e, s, p, sb in rows]})
    series = {}
    for e, s, _, sb in rows:
        series.setdefault(s, ([], []))
        series[s][0].append(e)
        series[s][1].append(sb.slope)
    out.svg("support.svg", lambda: line_chart_svg(series, "max prompt length", "slope bound",
                                                  "slope bound vs sampled length"))
    last = max(e for e, *_ in rows)
    for e, s, p, sb in rows:
        if e == last:
            print(f"ell={e:<4d} {s:<10s} slope={sb.slope:.4f}  {support.format_params(p)}")


def _toy_support(model, cfg):
    sample = support.sample_embeddings(model, int(cfg["support_count"]), int(cfg["support_len"]),
                                       cfg["seed"])
    return sample, support.slopes_for_sample(sample, model.vocab_size, _precision(cfg))


def cmd_cellvol(cfg, out: Output):
    model = _toy_model(cfg)
    sample, slopes = _toy_support(model, cfg)
    lo, hi = support.estimate_box(sample)
    D = cv.estimate_cells(model.params["F"], lo, hi, int(cfg["cell_samples"]), cfg["seed"])
    eps = bounds.machine_epsilon(_precision(cfg))
    log_packing = bounds.log_packing_ranges(hi - lo, eps)
    n_star = cv.inaccessibility_threshold(D, log_packing, samples=int(cfg["mc_samples"]),
                                          seed=cfg["seed"])
    n_dirac = cv.inaccessibility_threshold(cv.dirac(model.vocab_size), log_packing)
    meds = cv.median_curve(D, cfg["ns"], "mc", int(cfg["mc_samples"]), cfg["seed"])
    ranked = D.ranked_fractions()
    out.csv("cell_ranked.csv", "rank,fraction\n" + "".join(
        f"{i + 1},{v:.10g}\n" for i, v in enumerate(ranked)))
    out.csv("cell_medians.csv", "n,log_median,ci_low,ci_high,log10_median\n" + "".join(
        f"{n},{r.log_median:.10g},{r.ci_low:.10g},{r.ci_high:.10g},{r.log_median / math.log(10):.10g}\n"
        for n, r in meds))
    out.csv("cell_top.csv", "token,fraction\n" + "".join(
        f"{t},{f:.10g}\n" for t, f in D.top_cells(int(cfg["top"]))))
    out.json("cellvol.json", {
        "log_packing": log_packing, "threshold_n": n_star, "dirac_threshold_n": n_dirac,
        "zero_mass_tokens": D.zero_mass_tokens, "sample_count": D.sample_count,
        "top_cells": D.top_cells(int(cfg["top"])),
    })
    ns = [n for n, _ in meds]
    out.svg("cell_medians.svg", lambda: line_chart_svg(
        {"median": (ns, [r.log_median / math.log(10) for _, r in meds]),
         "-log10 P": (ns, [-log_packing / math.log(10)] * len(ns))},
        "sequence length n", "log10 volume fraction", "median cell volume of length-n sequences"))
    out.svg("cell_ranked.svg", lambda: line_chart_svg(
        {"fraction": (list(range(1, len(ranked) + 1)), [math.log10(v) for v in ranked])},
        "rank", "log10 fraction", "ranked cell volumes"))
    print(f"log packing {log_packing:.4f}; inaccessible-median threshold n={n_star} "
          f"(uniform cells: n={n_dirac}); zero-mass tokens {D.zero_mass_tokens}")


def cmd_cram(cfg, out: Output, jobs: int):
    from .experiments import CramConfig, OptimizerConfig, accessibility_grid, fit_grid

    model = _toy_model(cfg)
    ccfg = CramConfig(tuple(cfg["ms"]), tuple(cfg["ns"]), int(cfg["targets"]),
                      OptimizerConfig(lr=float(cfg["lr"]), weight_decay=float(cfg["weight_decay"]),
                                      max_steps=int(cfg["max_steps"])),
                      cfg["target_source"], int(cfg["seed"]))
    grid = accessibility_grid(model, ccfg, jobs=jobs)
    fit = fit_grid(grid)
    _, slopes = _toy_support(model, cfg)
    emp = fit.linear.slope if fit.linear else None
    theory = {shape: sb.slope for shape, _, sb in slopes}
    ratios = {s: (t / emp if emp and emp > 0 else None) for s, t in theory.items()}
    out.csv("cram_grid.csv", grid.to_csv())
    out.json("cram.json", {"fit": fit.to_dict(), "empirical_slope": emp,
                           "theoretical_slope": theory, "ratio": ratios,
                           "support": {s: p for s, p, _ in slopes},
                           "rates": grid.rates, "ms": grid.ms, "ns": grid.ns,
                           "trials": grid.trials})

    def curves():
        series, pts = {}, {}
        dense = np.linspace(min(grid.ns), max(grid.ns), 200)
        for j, m in enumerate(grid.ms):
            series[f"fit m={m}"] = (dense.tolist(), fit.sigmoids[m].predict(dense).tolist())
            pts[f"m={m}"] = (grid.ns, grid.rates[:, j].tolist())
        return line_chart_svg(series, "target length n", "success rate",
                              "accessibility vs target length", points=pts)

    out.svg("cram_curves.svg", curves)

    def n50_plot():
        ms = [m for m in grid.ms if math.isfinite(fit.n50[m])]
        series = {}
        if fit.linear:
            series["linear fit"] = (ms, [fit.linear.slope * m + fit.linear.intercept for m in ms])
        return line_chart_svg(series, "memory length m", "n50", "n50 vs m",
                              points={"n50": (ms, [fit.n50[m] for m in ms])})

    out.svg("cram_n50.svg", n50_plot)
    print(f"n50 per m: " + ", ".join(f"m={m}: {fit.n50[m]:.3f}" for m in grid.ms))
    if fit.linear:
        print(f"empirical slope {fit.linear.slope:.4f} (R^2 {fit.linear.r2:.4f})")
    for s in sorted(theory):
        r = ratios[s]
        print(f"theoretical {s:<10s} {theory[s]:.4f}  ratio {r:.3f}" if r else
              f"theoretical {s:<10s} {theory[s]:.4f}")


def cmd_copy(cfg, out: Output):
    from .experiments.copying import CopyConfig, copy_eval, run_copy

    fields = {k: cfg[k] for k in DEFAULTS["copy"] if k != "save_model"}
    ccfg = CopyConfig(**fields, seed=int(cfg["seed"]))
    model, log = run_copy(ccfg)
    lengths = list(range(1, ccfg.eval_max_len + 1))
    ev = copy_eval(model, lengths, ccfg.eval_trials, ccfg.seed + 1, ccfg.symbols)
    out.csv("copy_eval.csv", ev.to_csv())
    out.csv("copy_train.csv", "step,loss\n" + "".join(f"{i},{v:.10g}\n" for i, v in enumerate(log.losses)))
    out.json("copy.json", {"eval": ev.to_dict(), "train_steps": log.steps,
                           "stopped_early": log.stopped_early, "checks": log.checks})
    out.svg("copy_curve.svg", lambda: line_chart_svg(
        {"fit": (lengths, ev.fit.predict(lengths).tolist()),
         "trained max": ([ccfg.train_max_len] * 2, [0.0, 1.0])},
        "string length", "exact-match accuracy", "copy accuracy vs length",
        points={"accuracy": (lengths, ev.accuracy)}))
    if cfg.get("save_model"):
        from .toymodel import serialization

        path = out.dir / "copy_model.abtm"
        path.write_bytes(serialization.dumps(model))
        out.written.append(str(path))
    print(f"trained {log.steps} steps (early stop: {log.stopped_early}); "
          f"transition length {ev.fit.n50:.3f}, R^2 {ev.fit.r2:.4f}")


def cmd_planecut(cfg, out: Output):
    from .toymodel import plane_cut_map

    model = _toy_model(cfg)
    toks = cfg.get("anchor_tokens")
    if toks is None:
        rng = np.random.default_rng(cfg["seed"])
        toks = rng.choice(model.vocab_size, size=3, replace=False).tolist()
    if len(toks) != 3:
        raise ValidationError("anchor_tokens must list three tokens")
    # anchor at the final-layer embedding of each single-token prompt
    anchors = np.stack([model.last_hidden(model.embed([t]))[:, -1] for t in toks])
    pc = plane_cut_map(model, anchors, int(cfg["resolution"]), float(cfg["margin"]))
    out.csv("planecut.csv", pc.to_csv())
    out.csv("planecut_key.csv", pc.key_csv())
    out.json("planecut.json", {"anchor_tokens": toks, "anchor_pixels": pc.anchor_pixels,
                               "anchor_regions": pc.anchor_tokens, "key": pc.color_key()})
    out.svg("planecut.svg", pc.to_svg)
    print(f"plane cut {pc.grid.shape[0]}x{pc.grid.shape[1]} through tokens {toks}: "
          f"{len(pc.color_key())} regions")


def cmd_eo(cfg, out: Output):
    reports = []
    ps = cfg["p"] if isinstance(cfg["p"], list) else [cfg["p"]]
    Ds = cfg["D"] if isinstance(cfg["D"], list) else [cfg["D"]]
    vs = cfg["variant"] if isinstance(cfg["variant"], list) else [cfg["variant"]]
    for p in ps:
        for D in Ds:
            for v in vs:
                try:
                    rep = eo.verify_density(int(p), int(D), v, int(cfg["max_l1"])).to_dict()
                except ValueError as exc:
                    rep = {"p": p, "D": D, "variant": v, "skipped": str(exc)}
                reports.append(rep)
    text = json.dumps(_clean({"meta": out.meta(), "reports": reports}), sort_keys=True, indent=2)
    print(text)
    out.json("eo.json", {"reports": reports})
    return 0 if all(not r.get("violations") for r in reports) else 1


def cmd_report(cfg, out: Output):
    src = out.dir
    rows = []
    cram = src / "cram.json"
    if cram.is_file():
        data = json.loads(cram.read_text())
        emp = data.get("empirical_slope")
        for shape, t in sorted(data.get("theoretical_slope", {}).items()):
            ratio = t / emp if emp else None
            rows.append({"source": "toy", "shape": shape, "theoretical_slope": t,
                         "empirical_slope": emp, "ratio": ratio})
    bjson = src / "bounds.json"
    if bjson.is_file():
        b = json.loads(bjson.read_text())["bounds"]
        name = b.get("model", "geometry")
        rows.append({"source": name, "shape": "ball", "theoretical_slope": b["slope_ball"],
                     "empirical_slope": None, "ratio": None})
        if "slope_cone" in b:
            rows.append({"source": name, "shape": "cone", "theoretical_slope": b["slope_cone"],
                         "empirical_slope": None, "ratio": None})
    if not rows:
        raise ValidationError(f"no prior outputs (cram.json, bounds.json) found in {src}")
    body = "source,shape,theoretical_slope,empirical_slope,ratio\n" + "".join(
        f"{r['source']},{r['shape']},{_num(r['theoretical_slope'])},{_num(r['empirical_slope'])},"
        f"{_num(r['ratio'])}\n" for r in rows)
    out.csv("report.csv", body)
    out.json("report.json", {"rows": rows})
    print(f"{'source':<14s}{'shape':<11s}{'C_theory':>12s}{'C_emp':>10s}{'ratio':>9s}")
    for r in rows:
        print(f"{r['source']:<14s}{r['shape']:<11s}{_num(r['theoretical_slope']):>12s}"
              f"{_num(r['empirical_slope']):>10s}{_num(r['ratio']):>9s}")


def _num(v):
    return "" if v is None else f"{v:.4f}"


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with settings (flags take precedence)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--emit", default="csv,json,svg", help="comma list from csv,json,svg")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="override one setting (value parsed as JSON when possible)")
    p = _Parser(prog="accessbound", description="Accessibility bounds and toy-scale experiments.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    b = sub.add_parser("bounds", parents=[common], help="counts, thresholds and slopes")
    b.add_argument("--model", help="bundled reference model name, e.g. Pythia-160M")
    for name, helptext in (("support", "support estimates and slope stability curve"),
                           ("cellvol", "cell-volume distribution and median threshold"),
                           ("cram", "cramming accessibility grid and fits"),
                           ("planecut", "plane cut of next-token regions")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--model-file", dest="model_file", help="serialized toy model")
    sub.add_parser("copy", parents=[common], help="copy-task training and length generalization")
    sub.add_parser("eo", parents=[common], help="elementary-operation basis sizes and density check")
    sub.add_parser("report", parents=[common], help="merge prior outputs into a slope table")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        emit = {e.strip() for e in args.emit.split(",") if e.strip()}
        if not emit <= {"csv", "json", "svg"}:
            raise ValidationError(f"--emit accepts csv,json,svg; got {args.emit!r}")
        if args.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        cfg = _settings(args.command, args)
        out_dir = args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT
        out = Output(args.command, cfg, out_dir, emit)
        handler = {"bounds": cmd_bounds, "support": cmd_support, "cellvol": cmd_cellvol,
                   "copy": cmd_copy, "planecut": cmd_planecut, "eo": cmd_eo,
                   "report": cmd_report}
        if args.command == "cram":
            rc = cmd_cram(cfg, out, args.jobs)
        else:
            rc = handler[args.command](cfg, out)
        return int(rc or 0)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
