"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Criteria 8-10 are marked ``slow`` (about ten minutes in
total on one core).
"""

import json
import math
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

from accessbound import bounds as bd
from accessbound import cellvolume as cv
from accessbound import cli, eo
from accessbound import geometry as g
from accessbound.geometry import Ball
from accessbound.toymodel import ToyTransformer, softmax
from accessbound.toymodel.model import LAYER_PARAMS

from conftest import record
from test_bounds import dyadic_grid_count
from test_geometry import brute_packing_1d
from test_toymodel import fd_check


def _files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())
            if p.suffix in (".csv", ".json")}


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Output directories of the slow CLI runs, shared by criteria 8-10."""
    return {"root": tmp_path_factory.mktemp("acceptance")}


# -- 1 ---------------------------------------------------------------------


def test_c1_geometry_oracles():
    t0 = time.perf_counter()
    worst_closed = 0.0
    for delta in (0.2, 1.0, 2.0, 3.0):
        want = (2 * math.pi / 3) * (1 - math.cos(delta / 2))
        worst_closed = max(worst_closed, abs(math.exp(g.volume_cone(3, 1.0, delta)) / want - 1))
    worst_z = 0.0
    for d in (2, 3, 5):
        for delta in (0.5, 1.0, 2.0):
            p, se = g.monte_carlo_cone_fraction(d, delta, 10 ** 6, seed=d * 10 + int(delta * 2))
            worst_z = max(worst_z, abs(p - math.exp(g.cone_fraction(d, delta))) / se)
    elapsed = time.perf_counter() - t0
    ok = worst_closed < 1e-9 and worst_z < 3 and elapsed < 60
    record(1, ok, f"closed-form rel err {worst_closed:.1e}, worst MC |z| {worst_z:.2f}, {elapsed:.1f}s")
    assert ok


# -- 2 ---------------------------------------------------------------------


def test_c2_packing_sanity():
    rng = np.random.default_rng(2)
    pairs = [(1.0, 1.0)] + [tuple(rng.uniform(0.1, 3.0, 2)) for _ in range(19)]
    bad = []
    for r, eps in pairs:
        n = brute_packing_1d(r, eps, min(r, eps) / 500)
        pb = g.packing_bounds_ball(1, r, eps)
        if not (math.exp(pb.log_lower) <= n + 1e-9 and n <= math.exp(pb.log_upper) + 1e-9):
            bad.append((r, eps, n))
    first = brute_packing_1d(1.0, 1.0, 1e-3)
    pb = g.packing_bounds_ball(1, 1.0, 1.0)
    ok = not bad and first == 2 and math.exp(pb.log_lower) == 1.0 \
        and math.exp(pb.log_upper) == pytest.approx(3.0)
    record(2, ok, f"20 pairs sandwiched, r=eps=1: exact {first} in "
                  f"[{math.exp(pb.log_lower):.0f}, {math.exp(pb.log_upper):.0f}]")
    assert ok


# -- 3 ---------------------------------------------------------------------


def test_c3_bound_formulas():
    mpmath.mp.prec = 200
    errs = {}
    for name, d, V, r in (("Pythia-160M", 768, 50304, "63.62"), ("Qwen-0.5B", 896, 151936, "309.00")):
        oracle = d * mpmath.log(1 + 2 * mpmath.mpf(r) * 1024) / mpmath.log(V)
        got = bd.slope_ball(bd.model_geometry(name)).slope
        errs[name] = (got, float(abs(got / oracle - 1)))
    ok = all(e < 1e-6 for _, e in errs.values()) and abs(errs["Pythia-160M"][0] - 835.4) < 0.2
    record(3, ok, ", ".join(f"{k} C_ball {v:.4f} (rel err {e:.1e})" for k, (v, e) in errs.items()))
    assert ok


# -- 4 ---------------------------------------------------------------------


def test_c4_variable_precision():
    bad = [(a, b) for a in range(-3, 4) for b in range(a, 4)
           if bd.variable_precision_packing_interval(2.0 ** a, 2.0 ** b) != dyadic_grid_count(a, b)]
    ex = bd.variable_precision_packing_interval(1.0, 4.0)
    ok = not bad and ex == 8192
    record(4, ok, f"28 dyadic intervals enumerated, mismatches {len(bad)}, [1,4] -> {ex:.0f}")
    assert ok


# -- 5 ---------------------------------------------------------------------


def test_c5_toy_invariants():
    t0 = time.perf_counter()
    perm_res = dup_res = soft_res = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        m = ToyTransformer.init_random(7, 6, layers=2, heads=2, head_dim=3, mlp_dim=12, seed=seed)
        X = rng.normal(size=(6, 5))
        perm = np.append(rng.permutation(4), 4)
        perm_res = max(perm_res, float(np.abs(m.forward(X).final - m.forward(X[:, perm]).final).max()))
        a = m.forward(X).hidden[-1]
        b = m.forward(np.hstack([X, X])).hidden[-1]
        dup_res = max(dup_res, float(np.abs(b[:, :5] - a).max()), float(np.abs(b[:, 5:] - a).max()))
        tr = m.forward(X)
        soft_res = max(soft_res, abs(tr.probs.sum() - 1), float(np.abs(tr.attention.sum(-1) - 1).max()),
                       abs(softmax(rng.normal(0, 30, 50)).sum() - 1))
    grad_err = 0.0
    for cfg in range(10):
        rng = np.random.default_rng(500 + cfg)
        m = ToyTransformer.init_random(
            int(rng.integers(3, 8)), int(rng.integers(2, 6)), layers=int(rng.integers(1, 3)),
            heads=int(rng.integers(1, 3)), head_dim=int(rng.integers(2, 4)),
            mlp_dim=int(rng.integers(3, 9)), norm=["linf", "rms", "none"][cfg % 3], seed=cfg,
            unembed_scale=0.5)
        X = rng.normal(size=(m.dim, int(rng.integers(1, 4))))
        t = rng.integers(0, m.vocab_size, size=int(rng.integers(1, 5)))
        grad_err = max(grad_err, fd_check(m, X, t, list(LAYER_PARAMS) + ["E", "F"]))
    elapsed = time.perf_counter() - t0
    ok = perm_res < 1e-9 and dup_res < 1e-9 and grad_err <= 1e-5 and soft_res < 1e-12 and elapsed < 30
    record(5, ok, f"perm {perm_res:.1e}, dup {dup_res:.1e}, grad rel err {grad_err:.1e}, "
                  f"softmax {soft_res:.1e}, {elapsed:.1f}s")
    assert ok


# -- 6 ---------------------------------------------------------------------


def criterion6_outputs(seed=6):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(20):
        d, m = int(rng.integers(1, 1024)), int(rng.integers(1, 8))
        r, eps = float(rng.uniform(0.1, 400)), float(2.0 ** -rng.integers(4, 14))
        V = int(rng.integers(2, 300_000))
        geom = bd.ModelGeometry(d, V, Ball(d, r, "linf"), bd.UniformPrecision(eps), m)
        rows.append((cv.inaccessibility_threshold(cv.dirac(V), bd.count_finite(geom)),
                     math.ceil(bd.threshold_finite(geom))))
    two = cv.CellVolumeDistribution([0, 1], [math.log(0.5), math.log(0.25)], 0, 0)
    exact = cv.convolve_median(two, 2, "exact").log_median
    mc = cv.convolve_median(two, 2, "mc", samples=10 ** 5, seed=seed)
    return {"dirac": rows, "exact": exact, "mc": [mc.log_median, mc.ci_low, mc.ci_high]}


def test_c6_cell_volume():
    out = criterion6_outputs()
    mism = sum(a != b for a, b in out["dirac"])
    lo, hi = out["mc"][1], out["mc"][2]
    ok = mism == 0 and math.exp(out["exact"]) == pytest.approx(1 / 8) and lo <= out["exact"] <= hi
    record(6, ok, f"Dirac threshold mismatches {mism}/20, exact median {math.exp(out['exact']):.4f}, "
                  f"MC 99% CI [{math.exp(lo):.4f}, {math.exp(hi):.4f}]")
    assert ok


# -- 7 ---------------------------------------------------------------------


def test_c7_elementary_operations():
    t0 = time.perf_counter()
    checked, violations, skipped = 0, 0, []
    for p in (1, 2, 3):
        for D in (2, 3):
            for variant in ("coarse", "improved"):
                try:
                    rep = eo.verify_density(p, D, variant, max_l1=30)
                except ValueError:
                    skipped.append(f"{variant}({p},{D})")
                    continue
                checked += 1
                violations += len(rep.violations)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and checked >= 9 and elapsed < 120
    record(7, ok, f"{checked} cases, {violations} violations, undefined: {' '.join(skipped)}, "
                  f"{elapsed:.1f}s")
    assert ok


# -- 8 ---------------------------------------------------------------------


def _cram(out: Path) -> float:
    t0 = time.perf_counter()
    rc = cli.run(["cram", "--seed", "0", "--out", str(out), "--emit", "csv,json"])
    assert rc == 0
    return time.perf_counter() - t0


@pytest.mark.slow
def test_c8_cramming(runs):
    out = runs["root"] / "cram1"
    elapsed = _cram(out)
    runs["cram1"] = out
    data = json.loads((out / "cram.json").read_text())
    fit = data["fit"]
    n50 = [fit["n50"][str(m)] for m in (1, 2, 3, 4)]
    nondecr = all(v is not None for v in n50) and all(b >= a for a, b in zip(n50, n50[1:]))
    lin_r2 = fit["linear"]["r2"]
    ratio = data["ratio"]["ball"]
    ok = (fit["median_r2"] >= 0.8 and nondecr and lin_r2 >= 0.9 and ratio > 1
          and data["empirical_slope"] <= data["theoretical_slope"]["ball"] and elapsed < 1800)
    record(8, ok, f"median R2 {fit['median_r2']:.3f}, n50 {[round(v, 2) for v in n50]}, "
                  f"linear R2 {lin_r2:.3f}, C_emp {data['empirical_slope']:.3f}, "
                  f"C_ball {data['theoretical_slope']['ball']:.2f}, ratio {ratio:.1f}, {elapsed:.0f}s")
    assert ok


# -- 9 ---------------------------------------------------------------------

COPY_ARGS = ["copy", "--seed", "0", "--param", "max_steps=10000", "--emit", "csv,json"]


def _copy(out: Path) -> float:
    t0 = time.perf_counter()
    assert cli.run(COPY_ARGS + ["--out", str(out)]) == 0
    return time.perf_counter() - t0


@pytest.mark.slow
def test_c9_copying(runs):
    out = runs["root"] / "copy1"
    elapsed = _copy(out)
    runs["copy1"] = out
    ev = json.loads((out / "copy.json").read_text())["eval"]
    acc = dict(zip(ev["lengths"], ev["accuracy"]))
    trained = min(acc[n] for n in range(1, 13))
    beyond = max(acc[n] for n in acc if n > 24)
    r2 = ev["fit"]["r2"]
    ok = trained >= 0.9 and beyond <= 0.5 and r2 >= 0.85 and elapsed < 1800
    record(9, ok, f"min acc on lengths 1-12 {trained:.3f}, max acc beyond 24 {beyond:.3f}, "
                  f"sigmoid R2 {r2:.4f}, transition {ev['transition_length']:.2f}, {elapsed:.0f}s")
    assert ok


# -- 10 --------------------------------------------------------------------


@pytest.mark.slow
def test_c10_determinism(runs):
    same = {}
    a, b = criterion6_outputs(), criterion6_outputs()
    same["6"] = json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    cell = [runs["root"] / f"cell{i}" for i in (1, 2)]
    for d in cell:
        assert cli.run(["cellvol", "--seed", "6", "--param", "cell_samples=200000",
                        "--param", "mc_samples=20000", "--out", str(d), "--emit", "csv,json"]) == 0
    same["6-cli"] = _files(cell[0]) == _files(cell[1])
    if "cram1" not in runs:
        runs["cram1"] = runs["root"] / "cram1"
        _cram(runs["cram1"])
    _cram(runs["root"] / "cram2")
    same["8"] = _files(runs["cram1"]) == _files(runs["root"] / "cram2")
    if "copy1" not in runs:
        runs["copy1"] = runs["root"] / "copy1"
        _copy(runs["copy1"])
    _copy(runs["root"] / "copy2")
    same["9"] = _files(runs["copy1"]) == _files(runs["root"] / "copy2")
    ok = all(same.values())
    record(10, ok, "byte-identical reruns: " + ", ".join(f"{k} {'yes' if v else 'NO'}"
                                                       for k, v in same.items()))
    assert ok
