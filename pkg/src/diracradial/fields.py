"""Radial field profiles and the analytic machinery built on them.

A profile is a pair of radial functions (A, V): A is the angular component of
the rotational-gauge vector potential, V the scalar potential.  Profiles may
also carry the generating magnetic field B, related to A by
A(r) = (1/r) * int_0^r B(s) s ds.

This module provides

* concrete profile families (linear, power, constant_B, tabulated, composite),
* finite-probe verification of the confinement/deconfinement conditions
  (|A| unbounded, limsup |V/A| < 1 versus limsup |A/V| < 1),
* the integrated weight rho(r) = int_0^r |A(s)| ds used in decay estimates,
* turning radii r_j solving |m| = delta0 * r * |A(r)| (largest root), and
* the smooth cutoff functions built from them.

Everything here is pure and immutable after construction; instances can be
shared freely across worker threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

__all__ = [
    "FieldProfile",
    "HypothesisReport",
    "CutoffSet",
    "ProfileError",
    "Con0ViolationError",
    "FAMILIES",
    "make_profile",
    "make_callable_profile",
    "vector_potential_from_B",
    "verify_hypothesis",
    "agmon_weight",
    "agmon_weight_grid",
    "turning_radius",
    "make_cutoffs",
    "smoothstep",
]

FAMILIES = ("linear", "power", "constant_B", "tabulated", "composite")

#: parameter names, in positional order, for each closed-form family
_FAMILY_PARAMS = {
    "linear": ("a", "lam"),
    "power": ("a", "p", "lam", "q"),
    "constant_B": ("b", "lam"),
    "composite": ("a1", "a2", "p", "v1", "v2", "q"),
}

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-10, limit=200)


class ProfileError(ValueError):
    """Invalid profile family or parameters."""


class Con0ViolationError(RuntimeError):
    """Raised when a turning radius cannot be bracketed up to the scan ceiling,
    i.e. the profile violates the |A| -> infinity condition on the probed range."""


RadialFn = Callable[[np.ndarray], np.ndarray]


def _vectorize(f: Callable) -> RadialFn:
    def wrapped(r):
        r = np.asarray(r, dtype=float)
        out = np.asarray(f(r), dtype=float)
        return np.broadcast_to(out, r.shape).copy() if out.shape != r.shape else out

    return wrapped


@dataclass(frozen=True)
class FieldProfile:
    """Evaluable radial fields (A, V), optional B, and the derivative A'.

    ``rho_exact``, when set, is a closed form for int_0^r |A| and is used as a
    fast path by :func:`agmon_weight`; families for which |A| has no simple
    antiderivative leave it unset and fall back to quadrature.
    """

    family: str
    params: dict
    A: RadialFn
    V: RadialFn
    dA: RadialFn
    B: Optional[RadialFn] = None
    rho_exact: Optional[RadialFn] = None
    label: str = ""

    def __post_init__(self):
        if not self.label:
            ptxt = ",".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
            object.__setattr__(self, "label", f"{self.family}({ptxt})")

    def describe(self) -> str:
        return self.label


@dataclass(frozen=True)
class HypothesisReport:
    """Finite-probe witnesses for the field hypotheses.

    The asymptotic conditions are only checkable on a finite probe grid, so
    this is evidence, not proof: ``con0_witness`` holds |A| at the probes and
    the limsups are maxima over the outer half of the (geometric) grid.
    """

    regime: str  # "localized" | "delocalized" | "indeterminate"
    con0_pass: bool
    con0_witness: np.ndarray
    con1_limsup: float
    con2_sup_tail: float
    va_limsup: float
    v_unbounded: bool
    probe_radii: np.ndarray
    skipped_probes: np.ndarray
    margin: float


@dataclass(frozen=True)
class CutoffSet:
    """Turning radius and the smooth cutoffs anchored at it.

    f(r) vanishes below 3 r_j and is 1 above 6 r_j; f_c = 1 - f; the tighter
    cutoff f_tilde vanishes below r_j and is 1 above 2 r_j.
    """

    delta0: float
    m: float
    r_j: float
    f_j: RadialFn
    f_j_c: RadialFn
    f_tilde_j: RadialFn
    theta: RadialFn = field(repr=False, default=None)


def smoothstep(x):
    """C^2 step: 0 for x <= 1, 1 for x >= 2, quintic 6t^5-15t^4+10t^3 between."""
    x = np.asarray(x, dtype=float)
    t = np.clip(x - 1.0, 0.0, 1.0)
    return t * t * t * (10.0 + t * (6.0 * t - 15.0))


def _coerce_params(family: str, params) -> dict:
    names = _FAMILY_PARAMS[family]
    if isinstance(params, dict):
        unknown = set(params) - set(names)
        if unknown:
            raise ProfileError(f"unknown parameters {sorted(unknown)} for family '{family}'")
        return dict(params)
    params = list(params)
    if len(params) > len(names):
        raise ProfileError(
            f"family '{family}' takes at most {len(names)} parameters {names}, got {len(params)}"
        )
    return dict(zip(names, params))


def make_profile(family: str, params) -> FieldProfile:
    """Construct a closed-form or tabulated field profile.

    Families and their parameters (positional list or name/value mapping):

    * ``linear``: A = a r, V = lam r
    * ``power``: A = a r^p, V = lam r^q (q defaults to p)
    * ``constant_B``: B = b, hence A = b r / 2; V = lam r
    * ``composite``: A = a1 r + a2 r^p, V = v1 r + v2 r^q
    * ``tabulated``: mapping with node array ``r`` plus ``A`` (or ``B``) and
      optionally ``V`` sample arrays; monotone cubic (PCHIP) interpolation.
    """
    if family not in FAMILIES:
        raise ProfileError(f"unknown family '{family}'; expected one of {FAMILIES}")
    if family == "tabulated":
        return _make_tabulated(params)
    p = _coerce_params(family, params)

    if family == "linear":
        a = float(p.get("a", 1.0))
        lam = float(p.get("lam", 0.0))
        return FieldProfile(
            family, {"a": a, "lam": lam},
            A=_vectorize(lambda r: a * r),
            V=_vectorize(lambda r: lam * r),
            dA=_vectorize(lambda r: a * np.ones_like(r)),
            rho_exact=_vectorize(lambda r: 0.5 * abs(a) * r * r),
        )

    if family == "power":
        a = float(p.get("a", 1.0))
        pw = float(p.get("p", 1.0))
        lam = float(p.get("lam", 0.0))
        q = float(p.get("q", pw))
        if pw <= 0:
            raise ProfileError("power family needs exponent p > 0 for |A| to be unbounded")
        return FieldProfile(
            family, {"a": a, "p": pw, "lam": lam, "q": q},
            A=_vectorize(lambda r: a * r ** pw),
            V=_vectorize(lambda r: lam * r ** q),
            dA=_vectorize(lambda r: a * pw * r ** (pw - 1.0)),
            rho_exact=_vectorize(lambda r: abs(a) * r ** (pw + 1.0) / (pw + 1.0)),
        )

    if family == "constant_B":
        b = float(p.get("b", 1.0))
        lam = float(p.get("lam", 0.0))
        return FieldProfile(
            family, {"b": b, "lam": lam},
            A=_vectorize(lambda r: 0.5 * b * r),
            V=_vectorize(lambda r: lam * r),
            dA=_vectorize(lambda r: 0.5 * b * np.ones_like(r)),
            B=_vectorize(lambda r: b * np.ones_like(r)),
            rho_exact=_vectorize(lambda r: 0.25 * abs(b) * r * r),
        )

    # composite: sum of a linear and a power term in each field
    a1 = float(p.get("a1", 0.0))
    a2 = float(p.get("a2", 0.0))
    pw = float(p.get("p", 2.0))
    v1 = float(p.get("v1", 0.0))
    v2 = float(p.get("v2", 0.0))
    q = float(p.get("q", pw))
    if pw <= 0 or q <= 0:
        raise ProfileError("composite family needs positive exponents")
    rho = None
    if a1 * a2 >= 0:  # |A| = |a1| r + |a2| r^p, integrable in closed form
        rho = _vectorize(
            lambda r: 0.5 * abs(a1) * r * r + abs(a2) * r ** (pw + 1.0) / (pw + 1.0)
        )
    return FieldProfile(
        "composite", {"a1": a1, "a2": a2, "p": pw, "v1": v1, "v2": v2, "q": q},
        A=_vectorize(lambda r: a1 * r + a2 * r ** pw),
        V=_vectorize(lambda r: v1 * r + v2 * r ** q),
        dA=_vectorize(lambda r: a1 + a2 * pw * r ** (pw - 1.0)),
        rho_exact=rho,
    )


def _make_tabulated(params) -> FieldProfile:
    if not isinstance(params, dict):
        raise ProfileError("tabulated family needs a mapping with 'r' and 'A' or 'B' arrays")
    try:
        r = np.asarray(params["r"], dtype=float)
    except KeyError:
        raise ProfileError("tabulated profile misses node array 'r'") from None
    if r.ndim != 1 or len(r) < 4 or np.any(np.diff(r) <= 0):
        raise ProfileError("tabulated nodes must be a strictly increasing 1-d array, >= 4 entries")
    vvals = np.asarray(params.get("V", np.zeros_like(r)), dtype=float)
    if "A" in params:
        avals = np.asarray(params["A"], dtype=float)
        bfn = None
    elif "B" in params:
        bvals = np.asarray(params["B"], dtype=float)
        bip = PchipInterpolator(r, bvals, extrapolate=True)
        avals = np.array([vector_potential_from_B(bip, ri) for ri in r])
        bfn = _vectorize(bip)
    else:
        raise ProfileError("tabulated profile needs 'A' or 'B' samples")
    if not (np.all(np.isfinite(avals)) and np.all(np.isfinite(vvals))):
        raise ProfileError("tabulated samples must be finite")
    aip = PchipInterpolator(r, avals, extrapolate=True)
    vip = PchipInterpolator(r, vvals, extrapolate=True)
    dip = aip.derivative()
    return FieldProfile(
        "tabulated",
        {"r_min": float(r[0]), "r_max": float(r[-1]), "n": len(r)},
        A=_vectorize(aip),
        V=_vectorize(vip),
        dA=_vectorize(dip),
        B=bfn,
        label=f"tabulated(n={len(r)},[{r[0]:g},{r[-1]:g}])",
    )


def make_callable_profile(A, V=None, dA=None, B=None, label="custom") -> FieldProfile:
    """Wrap arbitrary callables as a profile (in-process use; not a config family).

    When ``dA`` is omitted it is replaced by a centered difference with a
    relative step of 1e-6.
    """
    Av = _vectorize(A)
    Vv = _vectorize(V) if V is not None else _vectorize(lambda r: np.zeros_like(r))
    if dA is None:
        def dA_num(r):
            r = np.asarray(r, dtype=float)
            hstep = 1e-6 * np.maximum(np.abs(r), 1.0)
            return (Av(r + hstep) - Av(r - hstep)) / (2.0 * hstep)
        dAv = dA_num
    else:
        dAv = _vectorize(dA)
    return FieldProfile("composite", {}, A=Av, V=Vv, dA=dAv,
                        B=_vectorize(B) if B is not None else None, label=label)


def vector_potential_from_B(B, r: float) -> float:
    """Rotational-gauge vector potential A(r) = (1/r) int_0^r B(s) s ds."""
    r = float(r)
    if r <= 0:
        raise ValueError("r must be positive")

    def integrand(s):
        val = float(np.asarray(B(np.array([s])))[0]) if callable(B) else float(B)
        return s * val

    # probe for non-finite B before handing to the adaptive rule
    probes = np.linspace(r * 1e-6, r, 65)
    vals = np.asarray(B(probes), dtype=float) if callable(B) else np.full(65, float(B))
    if not np.all(np.isfinite(vals)):
        raise ValueError("B is not finite on the integration interval")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err = quad(integrand, 0.0, r, **_QUAD_OPTS)
    if not math.isfinite(val) or err > 1e-6 * (abs(val) + 1.0):
        raise ValueError("quadrature of B did not converge (non-integrable field?)")
    return val / r


def agmon_weight(profile: FieldProfile, r: float) -> float:
    """Integrated weight rho(r) = int_0^r |A(s)| ds (nondecreasing in r)."""
    r = float(r)
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0.0:
        return 0.0
    if profile.rho_exact is not None:
        return float(profile.rho_exact(np.array([r]))[0])
    val, _err = quad(lambda s: abs(float(profile.A(np.array([s]))[0])), 0.0, r, **_QUAD_OPTS)
    return val


def agmon_weight_grid(profile: FieldProfile, rs: np.ndarray) -> np.ndarray:
    """Vectorized rho on an increasing grid of radii.

    Uses the family closed form when available; otherwise composite Simpson on
    a 4x-refined grid (O(h^4) per panel), with the initial segment [0, rs[0]]
    done adaptively.
    """
    rs = np.asarray(rs, dtype=float)
    if np.any(np.diff(rs) <= 0):
        raise ValueError("grid radii must be strictly increasing")
    if profile.rho_exact is not None:
        return profile.rho_exact(rs)
    refine = 8
    steps = np.arange(refine) / refine
    fine = (rs[:-1, None] + np.diff(rs)[:, None] * steps[None, :]).ravel()
    fine = np.append(fine, rs[-1])
    absA = np.abs(profile.A(fine))
    cum = cumulative_simpson(absA, x=fine, initial=0.0)
    rho0 = agmon_weight(profile, rs[0])
    return rho0 + cum[::refine]


def verify_hypothesis(
    profile: FieldProfile,
    R_start: float,
    R_end: float,
    n_probes: int = 64,
    margin: float = 0.05,
    con2_tol: float = 0.25,
    growth_factor: float = 1.5,
) -> HypothesisReport:
    """Probe the asymptotic field conditions on a geometric grid and classify.

    Classification is localized when |A| grows across the probes, the tail
    maximum of |V/A| stays below 1 - margin and the tail maximum of |A'/A^2|
    is below ``con2_tol``; delocalized when |V| grows and the tail maximum of
    |A/V| stays below 1 - margin.  Everything else is indeterminate.  Probes
    where A vanishes are skipped and reported.
    """
    if not (0 < R_start < R_end):
        raise ValueError("need 0 < R_start < R_end")
    if n_probes < 8:
        raise ValueError("need at least 8 probes")
    probes = np.geomspace(R_start, R_end, n_probes)
    absA = np.abs(profile.A(probes))
    absV = np.abs(profile.V(probes))
    absdA = np.abs(profile.dA(probes))
    floor = 1e-300
    ok = absA > floor
    skipped = probes[~ok]

    tail = np.arange(n_probes) >= n_probes // 2
    tl_ok = tail & ok

    def _grows(vals, valid):
        vv = vals[valid]
        if len(vv) < 4 or vv[0] <= floor:
            return False
        tail_vals = vals[tail & valid]
        if len(tail_vals) < 2:
            return False
        nondecreasing = np.all(np.diff(tail_vals) >= -1e-9 * np.maximum(tail_vals[:-1], 1.0))
        return bool(nondecreasing and vv[-1] >= growth_factor * vv[0])

    con0_pass = _grows(absA, ok)
    con1 = float(np.max(absV[tl_ok] / absA[tl_ok])) if tl_ok.any() else math.inf
    con2 = float(np.max(absdA[tl_ok] / absA[tl_ok] ** 2)) if tl_ok.any() else math.inf
    okV = absV > floor
    tl_okV = tail & okV
    va = float(np.max(absA[tl_okV] / absV[tl_okV])) if tl_okV.any() else math.inf
    v_unbounded = _grows(absV, okV)

    if con0_pass and con1 < 1.0 - margin and con2 < con2_tol:
        regime = "localized"
    elif v_unbounded and va < 1.0 - margin:
        regime = "delocalized"
    else:
        regime = "indeterminate"

    return HypothesisReport(
        regime=regime,
        con0_pass=con0_pass,
        con0_witness=absA,
        con1_limsup=con1,
        con2_sup_tail=con2,
        va_limsup=va,
        v_unbounded=v_unbounded,
        probe_radii=probes,
        skipped_probes=skipped,
        margin=margin,
    )


def turning_radius(
    profile: FieldProfile,
    m: float,
    delta0: float,
    R_ceiling: float = 1e6,
    n_scan: int = 2048,
) -> float:
    """Largest r with |m| = delta0 * r * |A(r)| (supremum semantics).

    The sign of g(r) = delta0 r |A(r)| - |m| is scanned on a geometric grid up
    to ``R_ceiling``; the last crossing is polished by Brent root finding to
    machine-level relative tolerance.
    """
    if not (0.0 < delta0 < 1.0):
        raise ValueError("delta0 must lie in (0, 1)")
    am = abs(float(m))
    if am == 0.0:
        raise ValueError("m must be a nonzero half-integer")
    grid = np.geomspace(1e-12, R_ceiling, n_scan)
    g = delta0 * grid * np.abs(profile.A(grid)) - am
    if not np.all(np.isfinite(g)):
        raise ProfileError("profile not finite on the turning-radius scan grid")
    if g[-1] <= 0.0:
        raise Con0ViolationError(
            f"profile violates con0 on probed range: delta0*r*|A(r)| <= |m|={am} up to r={R_ceiling:g}"
        )
    crossings = np.nonzero((g[:-1] <= 0.0) & (g[1:] > 0.0))[0]
    if len(crossings) == 0:
        raise Con0ViolationError(
            f"no turning radius: delta0*r*|A(r)| already exceeds |m|={am} at r={grid[0]:g}"
        )
    i = crossings[-1]
    fn = lambda r: delta0 * r * abs(float(profile.A(np.array([r]))[0])) - am
    return brentq(fn, grid[i], grid[i + 1], xtol=1e-300 + 1e-15 * grid[i + 1], rtol=8.9e-16)


def make_cutoffs(profile: FieldProfile, m: float, delta0: float) -> CutoffSet:
    """Smooth cutoffs anchored at the turning radius of channel mass ``m``."""
    r_j = turning_radius(profile, m, delta0)

    def f_j(r):
        return smoothstep(np.asarray(r, dtype=float) / (3.0 * r_j))

    def f_j_c(r):
        return 1.0 - f_j(r)

    def f_tilde_j(r):
        return smoothstep(np.asarray(r, dtype=float) / r_j)

    return CutoffSet(
        delta0=float(delta0), m=float(m), r_j=float(r_j),
        f_j=f_j, f_j_c=f_j_c, f_tilde_j=f_tilde_j, theta=smoothstep,
    )
