"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  The dichotomy criterion performs full transport sweeps including the
doubled-box insensitivity runs and takes several minutes; everything else is
fast.
"""

import json
import math
import time

import numpy as np
import pytest

from diracradial import (
    Channel,
    RadialGrid,
    WavePacket,
    agmon_check,
    assemble_channel_matrix,
    auto_grid,
    bargmann_bound,
    build_wavepacket,
    eigs_in_window,
    evolve,
    make_profile,
    moment,
    project_window,
    synthesize_density,
    tail_bound,
    turning_radius,
)
from diracradial.cli import main as cli_main

LANDAU = make_profile("constant_B", {"b": 1.0})
LINEAR = make_profile("linear", {"a": 1.0, "lam": 0.3})


def report(num, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, f"criterion {num} failed: {detail}"


def gaussian(center, width):
    return lambda r: np.exp(-((np.asarray(r) - center) ** 2) / (2.0 * width ** 2))


def test_criterion_1_landau_levels():
    t0 = time.monotonic()
    targets = np.array([0.0, math.sqrt(2.0), 2.0, math.sqrt(6.0), math.sqrt(8.0)])
    grid = RadialGrid(h=30.0 / 3000, n=3000)
    worst = 0.0
    for j in range(4):
        op = assemble_channel_matrix(LANDAU, Channel(j), grid)
        es = eigs_in_window(op, (-1e-6, 3.1))
        lowest = np.sort(es.energies[es.energies >= -1e-6])[:5]
        assert len(lowest) == 5
        worst = max(worst, float(np.max(np.abs(lowest - targets))))
    elapsed = time.monotonic() - t0
    report(1, worst < 1e-2 and elapsed <= 60.0,
           f"Landau levels max |error| = {worst:.2e} (tol 1e-2), runtime {elapsed:.1f}s <= 60s")


def test_criterion_2_hermiticity_unitarity():
    # exact symmetry of assembled matrices
    asym = 0.0
    for profile, j, n in ((LANDAU, 0, 400), (LINEAR, -3, 400), (LINEAR, 7, 500)):
        op = assemble_channel_matrix(profile, Channel(j), RadialGrid(h=0.05, n=n))
        M = op.matrix
        asym = max(asym, float(np.max(np.abs(M - M.T))))

    grid = RadialGrid(h=0.02, n=2000)
    ops = {j: assemble_channel_matrix(LINEAR, Channel(j), grid) for j in range(-4, 5)}
    eigsets = {j: eigs_in_window(ops[j], (-2.0, 2.0)) for j in ops}
    wp = build_wavepacket(gaussian(3.0, 1.0), {"kind": "geometric", "ratio": 0.5}, 2.0, 4, ops)
    p1 = project_window(wp, eigsets)
    p2 = project_window(p1, eigsets)
    idem = max(np.max(np.abs(p1.amps[j] - p2.amps[j])) for j in p1.js)
    n0 = p1.total_norm
    drift = max(abs(evolve(p1, eigsets, t).total_norm - n0)
                for t in (0.0, 1.0, 10.0, 50.0, 100.0, 200.0))
    ok = asym == 0.0 and drift <= 1e-10 and idem <= 1e-12
    report(2, ok, f"max asymmetry {asym:.1e} (exact), norm drift {drift:.2e} <= 1e-10 "
                  f"over t in [0,200], idempotence {idem:.2e} <= 1e-12")


def test_criterion_3_turning_radius_oracle():
    prof = make_profile("linear", {"a": 1.0})
    worst = 0.0
    for delta0 in (0.1, 0.5):
        for m in np.arange(0.5, 41.0, 1.0):
            got = turning_radius(prof, float(m), delta0)
            closed = math.sqrt(m / delta0)
            worst = max(worst, abs(got - closed) / closed)
    report(3, worst <= 1e-10, f"linear-family r_j vs closed form: max rel err {worst:.2e} <= 1e-10")


def test_criterion_4_bargmann_count_bound():
    t0 = time.monotonic()
    entries = [bargmann_bound(LINEAR, Channel(j), 2.0, 0.9) for j in range(5, 41, 5)]
    holds = all(e.N_numeric <= e.bound_raw for e in entries)
    ms = np.array([e.m for e in entries])
    ratios = np.array([e.ratio for e in entries])
    slope = float(np.polyfit(np.log(ms), np.log(ratios), 1)[0])
    elapsed = time.monotonic() - t0
    report(4, holds and slope <= 0.05 and elapsed <= 300.0,
           f"N <= integral bound on all 8 channels: {holds}; ratio log-log slope "
           f"{slope:.3f} <= 0.05; runtime {elapsed:.1f}s <= 300s")


def test_criterion_5_agmon_decay():
    js = list(range(2, 21))
    grid = auto_grid(LINEAR, js, delta0=0.1)
    log_ratios = []
    slopes_ok = True
    worst_slope = -math.inf
    for j in js:
        op = assemble_channel_matrix(LINEAR, Channel(j), grid)
        es = eigs_in_window(op, (-2.0, 2.0))
        rep = agmon_check(LINEAR, Channel(j), es, gamma=0.1, delta0=0.1)
        assert rep.reliable and rep.entries
        log_ratios.append(rep.max_log_ratio)
        for e in rep.entries:
            if not (math.isfinite(e.decay_slope) and e.decay_slope <= -0.1):
                slopes_ok = False
            worst_slope = max(worst_slope, e.decay_slope)
    trend = float(np.polyfit(np.log(js), np.array(log_ratios), 1)[0])
    report(5, trend <= 0.0 and slopes_ok,
           f"max-ratio trend slope {trend:.2f} <= 0 over j in 2..20; "
           f"all decay slopes <= -0.1 (worst {worst_slope:.3f})")


_PACKET = {
    "decay_model": {"kind": "geometric", "ratio": 0.5},
    "shape": {"kind": "gaussian", "center": 1.0, "width": 0.5},
    "J_max": 20,
    "energy_filter": {"inner": 1.2, "outer": 1.8},
}


def _run_localize(tmp_path, tag, cfg):
    p = tmp_path / f"{tag}.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / tag
    code = cli_main(["localize", "--config", str(p), "--out", str(out), "--jobs", "2"])
    assert code == 0
    return json.loads((out / "localize_summary.json").read_text())


@pytest.mark.slow
def test_criterion_6a_localized_boundedness(tmp_path):
    summary = _run_localize(tmp_path, "localized", {
        "profile": {"family": "linear", "params": {"a": 1.0, "lam": 0.3}},
        "grid": "auto",
        "window": [-2.0, 2.0],
        "kappa": 2.0,
        "times": {"t_min": 0.1, "t_max": 200.0, "per_decade": 16},
        "wavepacket": _PACKET,
        "grid_check": True,
    })
    ok = (summary["regime"] == "localized"
          and summary["fitted_exponent"] <= 0.3
          and summary["sup_proxy"]
          and summary["grid_check"]["max_rel_diff"] < 0.01)
    report("6a", ok,
           f"localized: exponent {summary['fitted_exponent']:.3f} <= 0.3, "
           f"running max stabilized ({summary['sup_proxy']}), "
           f"box-doubling diff {summary['grid_check']['max_rel_diff']:.2e} < 1%")


@pytest.mark.slow
def test_criterion_6b_delocalized_ballistic(tmp_path):
    # finer explicit grid and shortened horizon keep the ballistic front inside
    # the lattice-faithful region (see decisions ledger: band-edge constraint)
    summary = _run_localize(tmp_path, "delocalized", {
        "profile": {"family": "linear", "params": {"a": 0.3, "lam": 1.0}},
        "grid": {"R_max": 80.0, "n": 16000},
        "window": [-2.0, 2.0],
        "kappa": 2.0,
        "times": {"t_min": 0.1, "t_max": 60.0, "per_decade": 16},
        "wavepacket": _PACKET,
        "grid_check": True,
    })
    ok = (summary["regime"] == "delocalized"
          and summary["fitted_exponent"] >= 1.5
          and summary["grid_check"]["max_rel_diff"] < 0.01)
    report("6b", ok,
           f"delocalized: exponent {summary['fitted_exponent']:.3f} >= 1.5, "
           f"box-doubling diff {summary['grid_check']['max_rel_diff']:.2e} < 1%")


def test_criterion_7_decomposition_identity():
    grid = RadialGrid(h=0.02, n=1000)
    ops = {j: assemble_channel_matrix(LINEAR, Channel(j), grid) for j in range(-8, 9)}
    eigsets = {j: eigs_in_window(ops[j], (-2.0, 2.0)) for j in ops}
    wp = build_wavepacket(gaussian(3.0, 1.0), {"kind": "geometric", "ratio": 0.5}, 2.0, 8, ops)
    wp = project_window(wp, eigsets)
    field = synthesize_density(wp, 64)
    channelwise, _ = moment(wp, 2.0)
    quad2d = field.moment_2d(2.0)
    rel = abs(quad2d - channelwise) / channelwise
    report(7, rel <= 1e-6,
           f"channel moment {channelwise:.6e} vs 2D quadrature {quad2d:.6e}: "
           f"rel diff {rel:.2e} <= 1e-6")


def test_criterion_8_tail_bound():
    grid = RadialGrid(h=0.04, n=500)
    ops = {j: assemble_channel_matrix(LINEAR, Channel(j), grid) for j in range(-20, 21)}
    wp = build_wavepacket(gaussian(3.0, 1.0), {"kind": "geometric", "ratio": 0.5}, 2.0, 20, ops)
    got = tail_bound(wp, 0.5)
    x = 0.25
    S = sum(x ** abs(j) for j in range(-20, 21))
    direct = 0.0
    for k in range(21, 221):
        direct += (6.0 * (k + 0.5) / 0.5) ** 2 * x ** k
        direct += (6.0 * (k - 0.5) / 0.5) ** 2 * x ** k
    direct /= S
    rel = abs(got - direct) / direct
    totals = []
    for J in (5, 10, 15, 20):
        w = build_wavepacket(gaussian(3.0, 1.0), {"kind": "geometric", "ratio": 0.5}, 2.0, J, ops)
        m, _ = moment(w, 2.0)
        totals.append(m + tail_bound(w, 0.5))
    monotone = all(b <= a + 1e-12 for a, b in zip(totals[:-1], totals[1:]))
    report(8, rel <= 1e-10 and monotone,
           f"closed-form tail vs 200-term direct sum: rel diff {rel:.2e} <= 1e-10; "
           f"moment+tail monotone in J_max: {monotone}")
