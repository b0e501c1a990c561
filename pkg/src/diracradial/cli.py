"""Configuration-driven experiment runner.

Subcommands
-----------

* ``verify``    probe the field hypotheses and classify the regime
* ``spectrum``  windowed eigenvalues per channel plus the count-bound report
* ``agmon``     weighted-norm decay ratios per channel eigenfunction
* ``localize``  full pipeline: verify, solve, propagate, transport moments
* ``selftest``  manifest cross-checks and a determinism smoke test

All outputs are deterministic given the config (including the seed): CSV
bodies are byte-identical across runs, with timestamps confined to comment
lines that are excluded from the recorded body hashes.  Every output file
embeds the config hash in its header comments and is listed in
``manifest.json``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .fields import (
    FieldProfile,
    make_profile,
    smoothstep,
    turning_radius,
    vector_potential_from_B,
    verify_hypothesis,
)
from .operators import (
    Channel,
    RadialGrid,
    assemble_channel_matrix,
    auto_grid,
    m_of,
)
from .spectral import agmon_check, bargmann_bound, eigs_in_window
from .dynamics import (
    _model_coefficient,
    build_wavepacket,
    fit_time_average_exponent,
    tail_bound,
)

__all__ = ["RunConfig", "ConfigError", "main", "load_config", "config_hash"]

ENV_JOBS = "DIRACRADIAL_JOBS"

_DEFAULTS = {
    "channels": {"j_min": 0, "j_max": 3},
    "grid": "auto",
    "window": [-2.0, 2.0],
    "kappa": 2.0,
    "delta0": 0.1,
    "gamma": 0.1,
    "delta_eps": None,
    "hypothesis_probes": {"R_start": 1.0, "R_end": 1000.0, "n": 64},
    "times": {"t_min": 0.1, "t_max": 200.0, "per_decade": 64},
    "wavepacket": {
        "decay_model": {"kind": "geometric", "ratio": 0.5},
        "shape": {"kind": "gaussian", "center": 3.0, "width": 1.0},
        "J_max": 20,
        "energy_filter": None,
    },
    "grid_check": False,
    "expected_regime": None,
    "out_dir": "out",
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _reject_nonfinite(value):
    raise ConfigError(f"non-finite numeric literal {value!r} not allowed in configs")


def load_config(path) -> dict:
    """Parse a JSON run config with field diagnostics on failure."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text, parse_constant=_reject_nonfinite)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return raw


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply --override key=value pairs, with dotted paths into nested objects."""
    out = json.loads(json.dumps(cfg))  # deep copy
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, val = item.partition("=")
        try:
            parsed = json.loads(val, parse_constant=_reject_nonfinite)
        except json.JSONDecodeError:
            parsed = val
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object")
        node[parts[-1]] = parsed
    return out


def _merged(raw: dict) -> dict:
    cfg = json.loads(json.dumps(_DEFAULTS))
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            cfg[k].update(v)
        else:
            cfg[k] = v
    return cfg


@dataclass
class RunConfig:
    """Validated run configuration; ``data`` holds the canonical dictionary."""

    data: dict
    profile: FieldProfile = field(repr=False, default=None)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        cfg = _merged(raw)
        if "profile" not in cfg or not isinstance(cfg["profile"], dict):
            raise ConfigError("config field 'profile' (object) is required")
        prof = cfg["profile"]
        family = prof.get("family")
        params = prof.get("params", {})
        try:
            profile = make_profile(family, params)
        except Exception as exc:
            raise ConfigError(f"config field 'profile': {exc}") from None
        ch = cfg["channels"]
        if "list" in ch:
            js = [int(j) for j in ch["list"]]
        else:
            js = list(range(int(ch.get("j_min", 0)), int(ch.get("j_max", -1)) + 1))
        if not js:
            raise ConfigError("config field 'channels' selects an empty channel range")
        cfg["channels"] = {"list": js}
        lo, hi = cfg["window"]
        if not (float(lo) < float(hi)):
            raise ConfigError("config field 'window' must satisfy lo < hi")
        for name in ("kappa", "delta0", "gamma"):
            v = float(cfg[name])
            if name != "kappa" and not (0.0 < v < 1.0):
                raise ConfigError(f"config field '{name}' must lie in (0, 1)")
            if name == "kappa" and v < 0:
                raise ConfigError("config field 'kappa' must be nonnegative")
        if cfg["delta_eps"] is not None and not (0.0 < float(cfg["delta_eps"]) < 1.0):
            raise ConfigError("config field 'delta_eps' must lie in (0, 1)")
        t = cfg["times"]
        if not (0 < float(t["t_min"]) < float(t["t_max"])) or int(t["per_decade"]) < 1:
            raise ConfigError("config field 'times' must have 0 < t_min < t_max, per_decade >= 1")
        g = cfg["grid"]
        if g != "auto":
            if not (isinstance(g, dict) and float(g.get("R_max", 0)) > 0 and int(g.get("n", 0)) >= 4):
                raise ConfigError("config field 'grid' must be \"auto\" or {R_max>0, n>=4}")
        return cls(data=cfg, profile=profile)

    @property
    def channels(self):
        return [Channel(j) for j in self.data["channels"]["list"]]

    @property
    def window(self):
        lo, hi = self.data["window"]
        return (float(lo), float(hi))

    def make_grid(self) -> RadialGrid:
        g = self.data["grid"]
        if g == "auto":
            return auto_grid(
                self.profile, self.data["channels"]["list"], delta0=float(self.data["delta0"])
            )
        return RadialGrid(h=float(g["R_max"]) / int(g["n"]), n=int(g["n"]))

    def times(self) -> np.ndarray:
        t = self.data["times"]
        t0, t1 = float(t["t_min"]), float(t["t_max"])
        npts = max(8, int(math.ceil(int(t["per_decade"]) * math.log10(t1 / t0))) + 1)
        return np.geomspace(t0, t1, npts)

    def bargmann_eps(self, report) -> float:
        if self.data["delta_eps"] is not None:
            return float(self.data["delta_eps"])
        # default: eps close enough to 1 that eps A^2 - V^2/eps > 0 at infinity
        c1 = report.con1_limsup if math.isfinite(report.con1_limsup) else 0.0
        return max(0.9, (1.0 + c1 ** 2) / 2.0)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# ----------------------------------------------------------------------------
# deterministic output plumbing


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def _body_sha(lines) -> str:
    h = hashlib.sha256()
    for ln in lines:
        h.update(ln.encode())
        h.update(b"\n")
    return h.hexdigest()


class OutputWriter:
    """Single-writer sink for CSV/JSON artifacts with manifest bookkeeping."""

    def __init__(self, out_dir: Path, cfg_hash: str, command: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.cfg_hash = cfg_hash
        self.command = command
        self.outputs = []
        self.warnings = []
        self.timings = {}

    def warn(self, msg: str):
        self.warnings.append(msg)
        print(f"warning: {msg}", file=sys.stderr)

    def write_csv(self, name: str, columns, rows):
        comments = [
            f"# config_hash: {self.cfg_hash}",
            f"# command: {self.command}",
            f"# written_at: {time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())}",
        ]
        body = [",".join(columns)]
        body.extend(",".join(_fmt(c) for c in row) for row in rows)
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for ln in comments:
                f.write(ln + "\n")
            for ln in body:
                f.write(ln + "\n")
        self.outputs.append(
            {"path": name, "body_sha256": _body_sha(body), "bytes": path.stat().st_size}
        )
        return path

    def write_json(self, name: str, payload: dict):
        payload = dict(payload)
        payload["config_hash"] = self.cfg_hash
        text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text + "\n")
        self.outputs.append(
            {"path": name, "body_sha256": _body_sha([text]), "bytes": path.stat().st_size}
        )
        return path

    def finalize(self):
        manifest = {
            "config_hash": self.cfg_hash,
            "artifact_version": __version__,
            "command": self.command,
            "outputs": self.outputs,
            "timings": self.timings,
            "warnings": self.warnings,
        }
        path = self.out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def _default_jobs(arg_jobs: Optional[int]) -> int:
    if arg_jobs:
        return max(1, arg_jobs)
    env = os.environ.get(ENV_JOBS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


# ----------------------------------------------------------------------------
# commands


def cmd_verify(cfg: RunConfig, writer: OutputWriter) -> int:
    hp = cfg.data["hypothesis_probes"]
    t0 = time.perf_counter()
    report = verify_hypothesis(
        cfg.profile, float(hp["R_start"]), float(hp["R_end"]), int(hp["n"])
    )
    writer.timings["verify_s"] = time.perf_counter() - t0
    absV = np.abs(cfg.profile.V(report.probe_radii))
    rows = [
        (float(r), float(a), float(v))
        for r, a, v in zip(report.probe_radii, report.con0_witness, absV)
    ]
    writer.write_csv("hypothesis.csv", ["r", "abs_A", "abs_V"], rows)
    writer.write_json("hypothesis.json", {
        "regime": report.regime,
        "con0_pass": report.con0_pass,
        "con1_limsup": report.con1_limsup,
        "con2_sup_tail": report.con2_sup_tail,
        "va_limsup": report.va_limsup,
        "v_unbounded": report.v_unbounded,
        "margin": report.margin,
        "n_probes": len(report.probe_radii),
        "skipped_probes": list(map(float, report.skipped_probes)),
        "profile": cfg.profile.label,
    })
    if report.skipped_probes.size:
        writer.warn(f"{report.skipped_probes.size} probe(s) skipped where A vanishes")
    expected = cfg.data.get("expected_regime")
    print(f"regime: {report.regime}")
    if report.regime == "indeterminate":
        return 2
    if expected and report.regime != expected:
        print(f"expected regime {expected!r}, classified {report.regime!r}", file=sys.stderr)
        return 2
    return 0


def _solve_channel(profile, j, grid, window):
    op = assemble_channel_matrix(profile, Channel(j), grid)
    return eigs_in_window(op, window)


def cmd_spectrum(cfg: RunConfig, writer: OutputWriter, jobs: int) -> int:
    grid = cfg.make_grid()
    window = cfg.window
    js = cfg.data["channels"]["list"]
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        eigsets = dict(zip(js, ex.map(
            lambda j: _solve_channel(cfg.profile, j, grid, window), js
        )))
    writer.timings["eigensolve_s"] = time.perf_counter() - t0

    rows = []
    for j in sorted(js):
        es = eigsets[j]
        for k in range(es.N):
            rows.append((j, m_of(j), k, float(es.energies[k]), float(es.residuals[k])))
    writer.write_csv("eigenvalues.csv", ["j", "m", "k", "E", "residual"], rows)

    hp = cfg.data["hypothesis_probes"]
    report = verify_hypothesis(cfg.profile, float(hp["R_start"]), float(hp["R_end"]), int(hp["n"]))
    eps = cfg.bargmann_eps(report)
    E = max(abs(window[0]), abs(window[1]))
    brows = []
    t0 = time.perf_counter()
    for j in sorted(js):
        if abs(m_of(j)) <= 1.0:
            continue
        try:
            entry = bargmann_bound(cfg.profile, Channel(j), E, eps, grid=grid)
        except Exception as exc:
            writer.warn(f"count bound skipped on channel j={j}: {exc}")
            continue
        brows.append((
            entry.j, entry.m, entry.N_numeric, entry.integral, entry.bound_raw,
            entry.bound_majorant, entry.ratio, entry.R_j, entry.C, entry.delta,
            entry.eps, entry.D_measure, entry.ball_radius,
        ))
    writer.timings["bargmann_s"] = time.perf_counter() - t0
    writer.write_csv(
        "bargmann.csv",
        ["j", "m", "N", "integral", "bound_raw", "bound_majorant", "ratio",
         "R_j", "C", "delta", "eps", "D_measure", "ball_radius"],
        brows,
    )
    writer.write_json("spectrum_summary.json", {
        "grid": {"R_max": grid.R_max, "n": grid.n, "h": grid.h},
        "window": list(window),
        "channels": list(map(int, sorted(js))),
        "counts": {str(j): int(eigsets[j].N) for j in sorted(js)},
        "bargmann_eps": eps,
    })
    return 0


def cmd_agmon(cfg: RunConfig, writer: OutputWriter, jobs: int) -> int:
    grid = cfg.make_grid()
    window = cfg.window
    js = cfg.data["channels"]["list"]
    gamma = float(cfg.data["gamma"])
    delta0 = float(cfg.data["delta0"])

    def one(j):
        es = _solve_channel(cfg.profile, j, grid, window)
        try:
            rep = agmon_check(cfg.profile, Channel(j), es, gamma, delta0)
            return j, rep, None
        except ValueError as exc:
            return j, None, str(exc)

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        results = dict((j, (rep, err)) for j, rep, err in ex.map(one, js))
    writer.timings["agmon_s"] = time.perf_counter() - t0

    rows = []
    summary = {}
    for j in sorted(js):
        rep, err = results[j]
        if rep is None:
            rows.append((j, None, None, gamma, None, None, None, None, None,
                         None, False, False))
            writer.warn(f"channel j={j} flagged unreliable: {err}")
            continue
        if not rep.reliable:
            writer.warn(
                f"channel j={j}: R_max < 6 r_j (r_j={rep.r_j:.3g}); rows flagged"
            )
        for e in rep.entries:
            rows.append((
                j, e.k, e.E, gamma, e.lhs, e.rhs_scale, e.ratio, e.log_ratio,
                e.decay_slope, rep.r_j, rep.reliable, e.tail_reconstructed,
            ))
        if rep.entries:
            summary[j] = rep.max_log_ratio
    writer.write_csv(
        "agmon.csv",
        ["j", "k", "E", "gamma", "lhs", "rhs_scale", "ratio", "log_ratio",
         "decay_slope", "r_j", "reliable", "tail_reconstructed"],
        rows,
    )
    trend = math.nan
    pos = [(j, v) for j, v in summary.items() if j >= 1 and math.isfinite(v)]
    if len(pos) >= 3:
        xs = np.log([j for j, _ in pos])
        ys = np.array([v for _, v in pos])
        trend = float(np.polyfit(xs, ys, 1)[0])
    writer.write_json("agmon_summary.json", {
        "gamma": gamma,
        "delta0": delta0,
        "max_log_ratio_by_channel": {str(j): summary[j] for j in sorted(summary)},
        "trend_slope_log_ratio_vs_log_j": trend,
        "grid": {"R_max": grid.R_max, "n": grid.n, "h": grid.h},
    })
    return 0


def _shape_fn(spec: dict):
    kind = spec.get("kind", "gaussian")
    if kind == "gaussian":
        c = float(spec.get("center", 3.0))
        w = float(spec.get("width", 1.0))
        if w <= 0:
            raise ConfigError("gaussian shape needs width > 0")
        return lambda r: np.exp(-((np.asarray(r) - c) ** 2) / (2.0 * w * w))
    if kind == "ring":
        c = float(spec.get("center", 3.0))
        w = float(spec.get("width", 1.0))
        return lambda r: np.asarray(r) * np.exp(-((np.asarray(r) - c) ** 2) / (2.0 * w * w))
    raise ConfigError(f"unknown wavepacket shape {kind!r}")


def _filter_fn(spec, window):
    if spec is None:
        return None
    inner = float(spec["inner"])
    outer = float(spec["outer"])
    cap = min(abs(window[0]), abs(window[1]))
    if not (0.0 < inner < outer <= cap):
        raise ConfigError(
            f"energy_filter needs 0 < inner < outer <= min|window| = {cap}"
        )

    def g(E):
        x = 1.0 + (np.abs(E) - inner) / (outer - inner)
        return 1.0 - smoothstep(x)

    return g


def _moment_run(cfg: RunConfig, grid: RadialGrid, js, times, jobs: int):
    """One full moment sweep on a given grid; returns (ops, rows dict, nstates)."""
    window = cfg.window
    kappa = float(cfg.data["kappa"])
    wp_spec = cfg.data["wavepacket"]
    shape = _shape_fn(wp_spec["shape"])
    efilter = _filter_fn(wp_spec.get("energy_filter"), window)

    def one(j):
        op = assemble_channel_matrix(cfg.profile, Channel(j), grid)
        es = eigs_in_window(op, window)
        phi = np.asarray(shape(op.node_r), dtype=float)
        c_model = _model_coeff_from_spec(wp_spec["decay_model"], j, kappa)
        phi = c_model * phi
        if es.N == 0:
            return j, op, np.zeros(len(times)), 0.0, 0
        c = es.vectors.T @ phi
        if efilter is not None:
            c = c * efilter(es.energies)
        wgt = op.grid.h * op.node_r ** kappa
        row = np.empty(len(times))
        block = 64
        for s in range(0, len(times), block):
            tt = times[s:s + block]
            Phi = es.vectors @ (c[:, None] * np.exp(-1j * np.outer(es.energies, tt)))
            row[s:s + block] = wgt @ (np.abs(Phi) ** 2)
        pnorm = op.grid.h * float(np.sum(c ** 2))
        return j, op, row, pnorm, es.N

    with ThreadPoolExecutor(max_workers=jobs) as ex:
        results = list(ex.map(one, js))
    ops = {j: op for j, op, *_ in results}
    rows = {j: row for j, _, row, _, _ in results}
    pnorms = {j: p for j, _, _, p, _ in results}
    nstates = {j: n for j, _, _, _, n in results}
    # normalize by the packet norm so moments refer to a unit initial state
    total_norm = sum(
        ops[j].grid.h * float(np.sum(np.abs(
            _model_coeff_from_spec(wp_spec["decay_model"], j, kappa)
            * np.asarray(shape(ops[j].node_r), dtype=float)) ** 2))
        for j in js
    )
    for j in js:
        rows[j] = rows[j] / total_norm
        pnorms[j] = pnorms[j] / total_norm
    return ops, rows, pnorms, nstates


def _model_coeff_from_spec(model: dict, j: int, kappa: float) -> float:
    return _model_coefficient(model, j, kappa)


def cmd_localize(cfg: RunConfig, writer: OutputWriter, jobs: int) -> int:
    hp = cfg.data["hypothesis_probes"]
    report = verify_hypothesis(cfg.profile, float(hp["R_start"]), float(hp["R_end"]), int(hp["n"]))
    window = cfg.window
    kappa = float(cfg.data["kappa"])
    delta0 = float(cfg.data["delta0"])
    wp_spec = cfg.data["wavepacket"]
    J_max = int(wp_spec["J_max"])
    js = list(range(-J_max, J_max + 1))
    grid = cfg.make_grid()
    times = cfg.times()

    t0 = time.perf_counter()
    ops, rows, pnorms, nstates = _moment_run(cfg, grid, js, times, jobs)
    writer.timings["moment_run_s"] = time.perf_counter() - t0

    total = np.zeros(len(times))
    for j in sorted(rows):
        total += rows[j]
    exponent = fit_time_average_exponent(times, total)

    # boundedness proxy: the running max has stabilized, i.e. maxima seen in
    # the last decade do not exceed the earlier-horizon max by more than 10%
    lastdec = times >= times[-1] / 10.0
    early = ~lastdec
    sup_overall = float(total.max())
    sup_last = float(total[lastdec].max()) if lastdec.any() else math.nan
    sup_early = float(total[early].max()) if early.any() else math.nan
    sup_proxy = bool(early.any() and sup_last <= 1.1 * sup_early)

    # uniform-in-time bound on the discarded channels (model tail)
    wp = build_wavepacket(
        _shape_fn(wp_spec["shape"]), wp_spec["decay_model"], kappa, J_max, ops
    )
    tail = tail_bound(wp, delta0)

    # lattice-fidelity diagnostic: radius where the window momentum hits the band
    k_band = 2.0 / grid.h
    r_bragg = _bragg_radius(cfg.profile, window, k_band, grid.R_max)
    horizon_r = times[-1] + 10.0
    if r_bragg is not None and r_bragg < min(grid.R_max, horizon_r):
        writer.warn(
            f"lattice band edge reachable at r~{r_bragg:.0f} inside the box/horizon; "
            f"moment growth beyond that radius is not faithful (refine h)"
        )

    check = None
    if cfg.data.get("grid_check"):
        grid2 = RadialGrid(h=grid.h, n=2 * grid.n)
        t0 = time.perf_counter()
        _, rows2, _, _ = _moment_run(cfg, grid2, js, times, jobs)
        writer.timings["grid_check_s"] = time.perf_counter() - t0
        total2 = np.zeros(len(times))
        for j in sorted(rows2):
            total2 += rows2[j]
        rel = np.abs(total2 - total) / np.maximum(total, 1e-300)
        check = {
            "R_max_doubled": grid2.R_max,
            "max_rel_diff": float(rel.max()),
            "end_rel_diff": float(rel[-1]),
        }

    cols = ["t", "M_total"] + [f"M_{j}" for j in sorted(rows)]
    out_rows = []
    for i, t in enumerate(times):
        out_rows.append([float(t), float(total[i])] + [float(rows[j][i]) for j in sorted(rows)])
    writer.write_csv("moments.csv", cols, out_rows)
    writer.write_json("localize_summary.json", {
        "regime": report.regime,
        "kappa": kappa,
        "window": list(window),
        "J_max": J_max,
        "tail_bound": tail,
        "fitted_exponent": exponent,
        "sup_proxy": sup_proxy,
        "sup_overall": sup_overall,
        "sup_early_horizon": sup_early,
        "sup_last_decade": sup_last,
        "projected_norm": float(sum(pnorms.values())),
        "kappa_moment": wp.kappa_moment,
        "states_in_window": {str(j): int(nstates[j]) for j in sorted(nstates)},
        "grid": {"R_max": grid.R_max, "n": grid.n, "h": grid.h},
        "bragg_radius_estimate": r_bragg,
        "grid_check": check,
        "times": {"t_min": float(times[0]), "t_max": float(times[-1]), "count": len(times)},
    })
    print(f"regime={report.regime} exponent={exponent:.3f} sup_proxy={sup_proxy} tail={tail:.3g}")
    return 0


def _bragg_radius(profile, window, k_band, R_max) -> Optional[float]:
    """Smallest radius where the local window momentum reaches half the band edge."""
    rs = np.linspace(1e-3, R_max, 2048)
    Emax = max(abs(window[0]), abs(window[1]))
    k_loc = np.sqrt(np.maximum((Emax + np.abs(profile.V(rs))) ** 2, 0.0))
    hit = np.nonzero(k_loc >= 0.5 * k_band)[0]
    return float(rs[hit[0]]) if len(hit) else None


def cmd_selftest(cfg: Optional[RunConfig], writer: Optional[OutputWriter],
                 out_dir: Optional[Path], jobs: int) -> int:
    checks = []

    def check(name, ok, detail=""):
        checks.append((name, ok))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))

    if out_dir is not None and (Path(out_dir) / "manifest.json").exists():
        man = json.loads((Path(out_dir) / "manifest.json").read_text())
        cfg_hash = man.get("config_hash", "")
        for entry in man.get("outputs", []):
            p = Path(out_dir) / entry["path"]
            if not p.exists():
                check(f"output {entry['path']} exists", False)
                continue
            text = p.read_text(encoding="utf-8").splitlines()
            body = [ln for ln in text if not ln.startswith("#")]
            if entry["path"].endswith(".json"):
                ok_hash = _body_sha(["\n".join(body)]) == entry["body_sha256"] or \
                    _body_sha(body) == entry["body_sha256"]
                has_hash = cfg_hash in "\n".join(body)
            else:
                ok_hash = _body_sha(body) == entry["body_sha256"]
                has_hash = any(cfg_hash in ln for ln in text if ln.startswith("#"))
            check(f"output {entry['path']} body hash", ok_hash)
            check(f"output {entry['path']} carries config hash", has_hash)
        return 0 if all(ok for _, ok in checks) else 1

    # built-in smoke tests: determinism of the verify command + seeded identities
    base = {
        "profile": {"family": "linear", "params": {"a": 1.0, "lam": 0.3}},
        "channels": {"j_min": 0, "j_max": 2},
        "seed": 0,
    }
    cfgs = RunConfig.from_dict(base)
    h = config_hash(cfgs.data)
    bodies = []
    for tag in ("a", "b"):
        with tempfile.TemporaryDirectory() as td:
            w = OutputWriter(Path(td), h, "verify")
            cmd_verify(cfgs, w)
            w.finalize()
            man = json.loads((Path(td) / "manifest.json").read_text())
            bodies.append(tuple(o["body_sha256"] for o in man["outputs"]))
    check("determinism: identical config -> identical CSV bodies", bodies[0] == bodies[1])

    rng = np.random.default_rng(int(base["seed"]))
    prof = make_profile("constant_B", {"b": 2.0})
    radii = rng.uniform(0.1, 20.0, 16)
    err = max(
        abs(vector_potential_from_B(prof.B, r) - float(prof.A(np.array([r]))[0]))
        / max(abs(float(prof.A(np.array([r]))[0])), 1e-30)
        for r in radii
    )
    check("gauge identity A = (1/r) int B s ds", err < 1e-8, f"max rel err {err:.2e}")

    rj = turning_radius(prof, 5.5, 0.1)
    outside = rng.uniform(rj, 10 * rj, 32)
    ok31 = bool(np.all(5.5 <= 0.1 * outside * np.abs(prof.A(outside)) + 1e-9))
    check("outside bound |m| <= delta0 r |A| for r >= r_j", ok31)

    return 0 if all(ok for _, ok in checks) else 1


# ----------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="diracradial",
        description="Spectral and transport verification runs for radial Dirac fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("verify", "spectrum", "localize", "agmon", "selftest"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON run config")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=None,
                       help=f"worker count (default: ${ENV_JOBS} or CPU count)")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config field (dotted path)")
    args = parser.parse_args(argv)
    jobs = _default_jobs(args.jobs)

    try:
        if args.command == "selftest":
            if args.config is None:
                return cmd_selftest(None, None, args.out, jobs)
            raw = apply_overrides(load_config(args.config), args.override)
            cfg = RunConfig.from_dict(raw)
            return cmd_selftest(cfg, None, args.out, jobs)

        if args.config is None:
            print("error: --config is required", file=sys.stderr)
            return 1
        raw = apply_overrides(load_config(args.config), args.override)
        cfg = RunConfig.from_dict(raw)
        out_dir = args.out or Path(cfg.data.get("out_dir", "out"))
        h = config_hash(cfg.data)
        writer = OutputWriter(out_dir, h, args.command)
        t0 = time.perf_counter()
        if args.command == "verify":
            code = cmd_verify(cfg, writer)
        elif args.command == "spectrum":
            code = cmd_spectrum(cfg, writer, jobs)
        elif args.command == "agmon":
            code = cmd_agmon(cfg, writer, jobs)
        elif args.command == "localize":
            code = cmd_localize(cfg, writer, jobs)
        else:  # pragma: no cover
            raise AssertionError(args.command)
        writer.timings["total_s"] = time.perf_counter() - t0
        writer.finalize()
        return code
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
