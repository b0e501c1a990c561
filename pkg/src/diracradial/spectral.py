"""Windowed eigenpairs, eigenvalue-count bounds, and decay verification.

Three verification tools live here, all operating on the tridiagonal channel
matrices from :mod:`.operators`:

* windowed eigensolves with residual certificates, plus an independent
  Sturm-sequence count of eigenvalues in a symmetric window;
* the explicit count bound for the number of eigenvalues in [-E, E]: the
  squared operator is bounded below by a half-line Schroedinger operator with
  effective potential W^<, and the weighted integral int r |W^<| dr divided by
  |m| - 1/2 bounds the count (together with its coarser closed-form majorant);
* the weighted-norm decay estimate || A e^{gamma rho} f~ psi || <= C/r_j *
  e^{gamma rho(2 r_j)} for window eigenfunctions, evaluated in log space.

Eigenvector tails need care: LAPACK eigenvectors of these matrices track the
exponential decay only down to an amplitude floor (empirically ~1e-45) and
are noise below it, while the weight e^{gamma rho} grows by hundreds of
orders of magnitude across the box.  We therefore reconstruct tail amplitudes
by the stable inward three-term recurrence (renormalized, tracked in log
space), matched to the eigenvector where it is reliable, and use the
reconstruction both for the weighted norms and for decay-slope fits.  The
reconstruction is restricted to radii where the lattice still resolves the
local field, |A_m(r)| h / 2 <= 0.9; beyond that the true contributions are
negligible for the parameters of interest and are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal
from scipy.special import logsumexp

from .fields import (
    FieldProfile,
    agmon_weight,
    agmon_weight_grid,
    smoothstep,
    turning_radius,
)
from .operators import Channel, ChannelOperator, RadialGrid, assemble_channel_matrix

__all__ = [
    "EigenSet",
    "BargmannEntry",
    "AgmonEntry",
    "AgmonReport",
    "BoxScalingRow",
    "EigenSolveError",
    "eigs_in_window",
    "count_in_window",
    "sturm_count_below",
    "bargmann_bound",
    "agmon_check",
    "box_scaling_diagnostic",
]

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-9, limit=200)

#: lattice-fidelity bound: bonds with |A_m| h/2 beyond this are not trusted
_BOND_FIDELITY = 0.9

#: relative amplitude below which LAPACK eigenvector entries are replaced by
#: the recurrence envelope
_AMP_SWITCH = 1e-10


class EigenSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenSet:
    """Eigenpairs of one channel inside an energy window, with certificates."""

    channel: Channel
    window: tuple
    energies: np.ndarray          # (k,), ascending
    vectors: np.ndarray           # (dim, k), orthonormal columns
    residuals: np.ndarray         # (k,), ||M psi - E psi||_2
    op: ChannelOperator

    @property
    def N(self) -> int:
        return len(self.energies)


def eigs_in_window(op: ChannelOperator, window, tol: Optional[float] = None) -> EigenSet:
    """All eigenpairs with E in the (half-open) window (E_lo, E_hi].

    Eigenvalues come out ascending with orthonormal eigenvectors; each pair
    carries the residual ||M psi - E psi||.  Residuals above ``tol`` (default
    1e-9 * ||M||_max * dim) raise :class:`EigenSolveError`.  An empty window
    yields an empty set.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("window must satisfy E_lo < E_hi")
    if tol is None:
        tol = 1e-9 * op.norm_max * op.dim
    try:
        w, vecs = eigh_tridiagonal(
            op.diag, op.offdiag, select="v", select_range=(lo, hi), check_finite=False
        )
    except Exception as exc:  # LAPACK convergence failure
        raise EigenSolveError(f"eigensolver failed on channel j={op.channel.j}: {exc}") from exc
    if len(w) == 0:
        return EigenSet(op.channel, (lo, hi), np.empty(0), np.empty((op.dim, 0)),
                        np.empty(0), op)
    res = np.array([np.linalg.norm(op.matvec(vecs[:, k]) - w[k] * vecs[:, k])
                    for k in range(len(w))])
    if np.any(res > tol):
        raise EigenSolveError(
            f"residuals exceed tolerance on channel j={op.channel.j}: "
            f"max {res.max():.3e} > {tol:.3e}"
        )
    return EigenSet(op.channel, (lo, hi), w, vecs, res, op)


def sturm_count_below(diag: np.ndarray, offdiag: np.ndarray, x: float) -> int:
    """Number of eigenvalues strictly below x (Sturm sequence / LDL^T inertia)."""
    count = 0
    q = diag[0] - x
    if q < 0:
        count += 1
    for i in range(1, len(diag)):
        if q == 0.0:
            q = 1e-300
        q = (diag[i] - x) - offdiag[i - 1] ** 2 / q
        if q < 0:
            count += 1
    return count


def count_in_window(op: ChannelOperator, E: float) -> int:
    """N_{[-E, E]} by Sturm-sequence inertia (independent of the eigensolver).

    Uses the same half-open convention (-E, E] as the windowed eigensolver so
    the two counts agree even when an eigenvalue sits exactly on an endpoint.
    """
    E = float(E)
    if E <= 0:
        raise ValueError("window half-width E must be positive")
    hi = sturm_count_below(op.diag, op.offdiag, np.nextafter(E, np.inf))
    lo = sturm_count_below(op.diag, op.offdiag, np.nextafter(-E, np.inf))
    return hi - lo


# ----------------------------------------------------------------------------
# eigenvector tail reconstruction


def _fidelity_seed_index(op: ChannelOperator) -> int:
    """Last chain index whose outward bonds still resolve the field.

    Bonds are unreliable where |A_m| h/2 exceeds the fidelity threshold.  Near
    the origin that always happens (centrifugal -m/r), but those bonds sit
    below any region of interest; only a trailing unreliable region (strong
    far field under-resolved by h) caps the seed.
    """
    sign = np.where(op.node_comp[:-1] == 0, -1.0, 1.0)
    Am = 2.0 * (op.offdiag - sign / op.grid.h)
    good = np.abs(Am) * op.grid.h / 2.0 <= _BOND_FIDELITY
    idx = np.nonzero(good)[0]
    if len(idx) == 0:
        return 1
    return min(int(idx.max()) + 1, op.dim - 1)


def tail_log_envelope(op: ChannelOperator, E: float, i_seed: Optional[int] = None) -> np.ndarray:
    """Log-amplitude envelope of the outward-decaying solution at energy E.

    Runs the three-term recurrence inward from ``i_seed`` (default: the wall,
    capped at the lattice-fidelity radius), renormalizing to avoid overflow
    and recording log|x_i|.  Inward recursion is stable for the solution that
    decays outward, which is the eigenfunction branch in the classically
    forbidden region; entries beyond the seed are -inf.
    """
    d, e = op.diag, op.offdiag
    N = op.dim
    if i_seed is None:
        i_seed = _fidelity_seed_index(op)
    i_seed = min(int(i_seed), N - 1)
    log_env = np.full(N, -np.inf)
    x_hi = 0.0
    x_md = 1.0
    scale = 0.0
    log_env[i_seed] = 0.0
    for k in range(i_seed, 0, -1):
        e_up = e[k] if k < N - 1 else 0.0
        x_lo = ((E - d[k]) * x_md - e_up * x_hi) / e[k - 1]
        a = abs(x_lo)
        if a > 1e100:
            x_lo /= a
            x_md /= a
            scale += math.log(a)
            a = 1.0
        log_env[k - 1] = (math.log(a) if a > 0.0 else -math.inf) + scale
        x_hi, x_md = x_md, x_lo
    return log_env


def _hybrid_log_amplitude(op: ChannelOperator, E: float, psi: np.ndarray):
    """Per-node log|psi| with noise-floor tails replaced by the matched envelope.

    Returns (log_amp, reconstructed_flag).  When the eigenvector has no clean
    decaying stretch to match against (extended states), the raw amplitudes
    are returned unmodified and the flag is False.
    """
    amp = np.abs(psi)
    mx = amp.max()
    with np.errstate(divide="ignore"):
        log_raw = np.log(amp)
    above = np.nonzero(amp >= _AMP_SWITCH * mx)[0]
    i_switch = int(above.max())
    if i_switch >= op.dim - 2:
        return log_raw, False
    i_seed = _fidelity_seed_index(op)
    env = tail_log_envelope(op, E, i_seed=i_seed)
    ipk = int(np.argmax(amp))
    match = (np.arange(op.dim) > ipk) & (amp > 1e-12 * mx) & (amp < 1e-2 * mx) & np.isfinite(env)
    if match.sum() < 5:
        return log_raw, False
    offset = float(np.median(log_raw[match] - env[match]))
    # reconstruct only when the envelope demonstrably tracks this vector's
    # decay (true eigenfunction tails match to ~1e-6; arbitrary vectors don't)
    spread = float(np.max(np.abs(log_raw[match] - env[match] - offset)))
    if spread > 0.1:
        return log_raw, False
    out = log_raw.copy()
    tail = np.arange(op.dim) > i_switch
    out[tail] = env[tail] + offset
    out[tail & ~np.isfinite(env)] = -np.inf
    return out, True


# ----------------------------------------------------------------------------
# count bound


@dataclass(frozen=True)
class BargmannEntry:
    """Per-channel count bound report: raw integral bound and closed-form majorant."""

    j: int
    m: float
    E: float
    eps: float
    delta: float
    R_j: float
    ball_radius: float
    C: float
    D_measure: float
    integral: float
    bound_raw: float
    bound_majorant: float
    N_numeric: Optional[int]
    ratio: Optional[float]


def _positivity_ball(profile: FieldProfile, eps: float, delta: float, R_hi: float):
    """Radius beyond which delta A^2 - |A'| and eps A^2 - V^2/eps stay positive
    (scanned), and the sup of V^2/eps + |A'| over the failure ball."""
    grid = np.geomspace(1e-6, R_hi, 4096)
    A2 = profile.A(grid) ** 2
    dA = np.abs(profile.dA(grid))
    V2 = profile.V(grid) ** 2
    fail = (delta * A2 - dA <= 0) | (eps * A2 - V2 / eps <= 0)
    if not fail.any():
        return 0.0, 0.0
    R_B = float(grid[np.nonzero(fail)[0].max()])
    fine = np.geomspace(1e-6, R_B, 4096)
    C = float(np.max(profile.V(fine) ** 2 / eps + np.abs(profile.dA(fine))))
    return R_B, C


def bargmann_bound(
    profile: FieldProfile,
    ch: Channel,
    E: float,
    eps: float,
    grid: Optional[RadialGrid] = None,
    delta0_grid: float = 0.1,
) -> BargmannEntry:
    """Count bound for N_{[-E,E]} of one channel (raw integral + majorant).

    With delta = (1 - eps)/2 the squared channel operator dominates a scalar
    half-line Schroedinger operator whose negative part W^< is supported on
    (0, R_j], R_j the turning radius at threshold delta/4.  The bound is
    (1/(|m| - 1/2)) int_0^inf r |W^<(r)| dr, evaluated by adaptive quadrature
    split at the sign changes of W^<; the majorant replaces the integral by
    its closed-form over-estimate.  When ``grid`` is given (or an automatic
    one can be built) the numerical count is attached for comparison.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    m = ch.m
    am = abs(m)
    if am <= 1.0:
        raise ValueError("count bound requires |m| > 1")
    E = float(E)
    if E <= 0:
        raise ValueError("window half-width E must be positive")
    delta = (1.0 - eps) / 2.0
    R_j = turning_radius(profile, m, delta / 4.0)
    ball_R, C = _positivity_ball(profile, eps, delta, max(100.0, 2.0 * R_j))
    const = C + E ** 2 / (1.0 - eps)

    def indicator_D(r):
        return am >= (delta / 4.0) * r * np.abs(profile.A(np.asarray(r, dtype=float)))

    def W_less(r):
        r = np.asarray(r, dtype=float)
        absA = np.abs(profile.A(r))
        main = (delta * absA ** 2 - 2.0 * am * absA / r) * indicator_D(r)
        return main - const

    scan = np.geomspace(max(1e-8, R_j * 1e-8), R_j, 4097)
    Wvals = W_less(scan)
    flips = np.nonzero(np.sign(Wvals[:-1]) != np.sign(Wvals[1:]))[0]
    pieces = np.concatenate([[scan[0]], scan[flips], [R_j]])
    pieces = np.unique(pieces)
    integral = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        val, err = quad(lambda r: r * abs(float(W_less(r))), a, b, **_QUAD_OPTS)
        if not math.isfinite(val):
            raise EigenSolveError(f"count-bound quadrature failed on [{a:g},{b:g}]")
        integral += val
    # leading piece (0, scan[0]]: W^< = -const there in all practical profiles
    integral += const * scan[0] ** 2 / 2.0

    inD = indicator_D(scan).astype(float)
    D_measure = float(np.trapezoid(inD, scan))
    bound_raw = integral / (am - 0.5)

    sup01 = float(np.max(np.abs(profile.A(np.linspace(1e-9, 1.0, 2001)))))
    majorant = (const * R_j ** 2 / 2.0 + 2.0 * am * sup01
                + (8.0 * m ** 2 / delta) * max(math.log(R_j), 0.0)) / (am - 0.5)

    N_numeric = None
    ratio = None
    if grid is None:
        from .operators import auto_grid
        grid = auto_grid(profile, [ch.j], delta0=delta0_grid)
    op = assemble_channel_matrix(profile, ch, grid)
    N_numeric = count_in_window(op, E)
    ratio = N_numeric / (am * math.log(am))

    return BargmannEntry(
        j=ch.j, m=m, E=E, eps=eps, delta=delta, R_j=R_j, ball_radius=ball_R,
        C=C, D_measure=D_measure, integral=integral, bound_raw=bound_raw,
        bound_majorant=majorant, N_numeric=N_numeric, ratio=ratio,
    )


# ----------------------------------------------------------------------------
# weighted-norm decay check


@dataclass(frozen=True)
class AgmonEntry:
    k: int
    E: float
    lhs: float
    log_lhs: float
    rhs_scale: float
    log_rhs_scale: float
    ratio: float
    log_ratio: float
    decay_slope: float
    tail_reconstructed: bool


@dataclass(frozen=True)
class AgmonReport:
    channel: Channel
    gamma: float
    delta0: float
    r_j: float
    rho_2rj: float
    reliable: bool             # box extends to >= 6 r_j
    entries: tuple

    @property
    def max_ratio(self) -> float:
        return max((e.ratio for e in self.entries), default=math.nan)

    @property
    def max_log_ratio(self) -> float:
        return max((e.log_ratio for e in self.entries), default=math.nan)


def agmon_check(
    profile: FieldProfile,
    ch: Channel,
    eig_set: EigenSet,
    gamma: float,
    delta0: float,
) -> AgmonReport:
    """Weighted-norm decay report for the window eigenfunctions of one channel.

    For each eigenpair the discrete weighted norm
    lhs = (h sum_i |A(r_i) e^{gamma rho(r_i)} f~(r_i) psi_i|^2)^{1/2}
    is evaluated in log space with tail amplitudes reconstructed by the inward
    recurrence, and compared against rhs_scale = e^{gamma rho(2 r_j)} / r_j.
    The decay slope is the least-squares slope of log|psi| against rho on
    [2 r_j, 4 r_j] (clipped to the lattice-fidelity radius).
    """
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must lie in [0, 1)")
    op = eig_set.op
    if op.channel.j != ch.j:
        raise ValueError("eigenset/channel mismatch")
    r_j = turning_radius(profile, ch.m, delta0)
    R_max = op.grid.R_max
    if R_max < 2.0 * r_j:
        raise ValueError(
            f"grid too small relative to r_j: R_max={R_max:g} < 2 r_j={2 * r_j:g} (j={ch.j})"
        )
    reliable = R_max >= 6.0 * r_j

    r = op.node_r
    h = op.grid.h
    rho = agmon_weight_grid(profile, r)
    rho2 = agmon_weight(profile, 2.0 * r_j)
    ftil = smoothstep(r / r_j)
    absA = np.abs(profile.A(r))
    with np.errstate(divide="ignore"):
        log_w = np.log(absA * ftil) + gamma * rho
    log_rhs = gamma * rho2 - math.log(r_j)
    rhs_scale = math.exp(log_rhs) if log_rhs < 709 else math.inf

    i_seed = _fidelity_seed_index(op)
    r_fid = r[i_seed]
    fit_lo, fit_hi = 2.0 * r_j, min(4.0 * r_j, r_fid)

    entries = []
    for k in range(eig_set.N):
        E = float(eig_set.energies[k])
        psi = eig_set.vectors[:, k]
        log_amp, reconstructed = _hybrid_log_amplitude(op, E, psi)
        terms = 2.0 * (log_w + log_amp)
        finite = np.isfinite(terms)
        if finite.any():
            log_lhs = 0.5 * (logsumexp(terms[finite]) + math.log(h))
        else:
            log_lhs = -math.inf
        lhs = math.exp(log_lhs) if log_lhs < 709 else math.inf
        log_ratio = log_lhs - log_rhs
        ratio = math.exp(log_ratio) if log_ratio < 709 else math.inf

        slope = math.nan
        if reconstructed:
            env = tail_log_envelope(op, E, i_seed=i_seed)
            ipk = int(np.argmax(np.abs(psi)))
            match = ((np.arange(op.dim) > ipk)
                     & (np.abs(psi) > 1e-12 * np.abs(psi).max())
                     & (np.abs(psi) < 1e-2 * np.abs(psi).max())
                     & np.isfinite(env))
            offset = float(np.median(np.log(np.abs(psi[match])) - env[match]))
            sel = (r >= fit_lo) & (r <= fit_hi) & np.isfinite(env)
            if sel.sum() >= 8:
                slope = float(np.polyfit(rho[sel], env[sel] + offset, 1)[0])
        entries.append(AgmonEntry(
            k=k, E=E, lhs=lhs, log_lhs=log_lhs, rhs_scale=rhs_scale,
            log_rhs_scale=log_rhs, ratio=ratio, log_ratio=log_ratio,
            decay_slope=slope, tail_reconstructed=reconstructed,
        ))
    return AgmonReport(
        channel=ch, gamma=float(gamma), delta0=float(delta0), r_j=r_j,
        rho_2rj=rho2, reliable=reliable, entries=tuple(entries),
    )


# ----------------------------------------------------------------------------
# box-size diagnostics


@dataclass(frozen=True)
class BoxScalingRow:
    R_max: float
    n: int
    energies: np.ndarray


def box_scaling_diagnostic(
    profile: FieldProfile,
    ch: Channel,
    window,
    R_list: Sequence[float],
    h_target: float = 0.02,
):
    """Window eigenvalues versus box size, with matched-drift and count metrics.

    Localized-regime profiles show stabilizing eigenvalues (drift of matched
    levels shrinking as R grows); delocalized-regime profiles show the count
    growing proportionally to R (box discretization of continuous spectrum).
    Returns (rows, drifts, counts).
    """
    R_list = list(R_list)
    if len(R_list) < 3:
        raise ValueError("need at least 3 box sizes")
    if any(b <= a for a, b in zip(R_list[:-1], R_list[1:])):
        raise ValueError("R_list must be strictly increasing")
    lo, hi = float(window[0]), float(window[1])
    rows = []
    for R in R_list:
        n = int(np.ceil(R / h_target))
        grid = RadialGrid(h=R / n, n=n)
        op = assemble_channel_matrix(profile, ch, grid)
        evs = eigvalsh_tridiagonal(
            op.diag, op.offdiag, select="v", select_range=(lo, hi), check_finite=False
        )
        rows.append(BoxScalingRow(R_max=grid.R_max, n=n, energies=np.sort(evs)))
    drifts = []
    for a, b in zip(rows[:-1], rows[1:]):
        if len(a.energies) == 0 or len(b.energies) == 0:
            drifts.append(math.nan)
            continue
        drift = max(float(np.min(np.abs(b.energies - e))) for e in a.energies)
        drifts.append(drift)
    counts = [len(row.energies) for row in rows]
    return rows, drifts, counts
