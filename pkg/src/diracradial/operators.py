"""Half-line discretization of the channel Hamiltonians.

The full 2D Dirac operator restricts, on the angular-momentum channel j with
half-integer mass m = j + 1/2, to the half-line block operator

    h = [[ V,  -d/dr + A_m ],
         [ d/dr + A_m,  V ]],     A_m(r) = A(r) - m / r,

acting on two-component spinors (u, v).  We discretize on a staggered grid:
the two components live on radial nodes interleaved with spacing h/2, so the
first-derivative couplings are two-point centered differences and no spurious
doubled branch appears.  A_m couplings are evaluated at the midpoint of each
coupled node pair, which keeps the matrix exactly symmetric and the scheme
O(h^2).  The result is a real symmetric tridiagonal matrix.

Boundary placement matters.  A Dirichlet truncation of a first-order system
admits spurious zero-energy edge states unless the component killed at each
end is chosen by the local sign of the effective mass:

* at the origin the component with the singular indicial behavior r^{-|m|}
  must carry the ghost node (v for m > 0, u for m < 0), which excludes the
  non-normalizable solution family;
* at the wall the component whose zero-energy solution grows outward
  (v when A_m(R_max) > 0, u when it is negative) must be killed, which
  excludes a wall-bound edge mode.

The chain therefore starts and ends on a component determined by the channel
and the profile; its length is 2n or 2n-1 depending on those choices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import FieldProfile, turning_radius

__all__ = [
    "Channel",
    "RadialGrid",
    "ChannelOperator",
    "SquaredMagneticOperator",
    "AssemblyError",
    "m_of",
    "assemble_channel_matrix",
    "assemble_squared_magnetic",
    "auto_grid",
]

U, V_COMP = 0, 1  # spinor component tags on the staggered chain


class AssemblyError(ValueError):
    """Grid or profile unusable for matrix assembly."""


def m_of(j: int) -> float:
    """Half-integer channel mass m = j + 1/2 (exact in binary floating point)."""
    return j + 0.5


@dataclass(frozen=True)
class Channel:
    j: int

    @property
    def m(self) -> float:
        return m_of(self.j)


@dataclass(frozen=True)
class RadialGrid:
    """Staggered half-line lattice: u-nodes at (i-1/2)h, v-nodes at ih, i=1..n."""

    h: float
    n: int

    def __post_init__(self):
        if self.h <= 0:
            raise AssemblyError("grid spacing must be positive")
        if self.n < 1:
            raise AssemblyError("grid needs at least one node")

    @property
    def R_max(self) -> float:
        return self.n * self.h

    @property
    def u_nodes(self) -> np.ndarray:
        return (np.arange(1, self.n + 1) - 0.5) * self.h

    @property
    def v_nodes(self) -> np.ndarray:
        return np.arange(1, self.n + 1) * self.h


@dataclass(frozen=True)
class ChannelOperator:
    """Discretized channel Hamiltonian: symmetric tridiagonal + chain metadata.

    ``node_r`` are the radii of the interleaved chain nodes and ``node_comp``
    tags each node with its spinor component (0 = u, 1 = v).  ``diag`` holds V
    at the nodes; ``offdiag`` holds the +-1/h derivative couplings corrected by
    A_m at the pair midpoints.
    """

    channel: Channel
    grid: RadialGrid
    profile_label: str
    node_r: np.ndarray
    node_comp: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.diag)

    @property
    def norm_max(self) -> float:
        off = np.max(np.abs(self.offdiag)) if len(self.offdiag) else 0.0
        return max(np.max(np.abs(self.diag)), off)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        return y

    @property
    def matrix(self) -> np.ndarray:
        """Dense symmetric matrix (intended for small grids / tests / export)."""
        M = np.diag(self.diag)
        idx = np.arange(self.dim - 1)
        M[idx, idx + 1] = self.offdiag
        M[idx + 1, idx] = self.offdiag
        return M

    def write_dense_text(self, path) -> None:
        """Debug export: one row per line, whitespace-separated."""
        np.savetxt(path, self.matrix, fmt="%.17g")

    def component_values(self, x: np.ndarray, comp: int) -> np.ndarray:
        return x[self.node_comp == comp]

    def component_radii(self, comp: int) -> np.ndarray:
        return self.node_r[self.node_comp == comp]


@dataclass(frozen=True)
class SquaredMagneticOperator:
    """Spin blocks of the squared magnetic operator: -d^2/dr^2 + A_m^2 -+ A_m'.

    The spin-up block lives on the channel chain's u-nodes, the spin-down
    block on its v-nodes, both with the standard 3-point Laplacian and
    Dirichlet ends.
    """

    channel: Channel
    grid: RadialGrid
    up_r: np.ndarray
    up_diag: np.ndarray
    up_offdiag: np.ndarray
    down_r: np.ndarray
    down_diag: np.ndarray
    down_offdiag: np.ndarray


def _chain_layout(profile: FieldProfile, m: float, grid: RadialGrid):
    """Node radii and component tags for the channel chain (see module docstring)."""
    n, h = grid.n, grid.h
    R = grid.R_max
    A_wall = float(profile.A(np.array([R]))[0])
    Am_wall = A_wall - m / R
    kill_comp = V_COMP if (Am_wall > 0 or (Am_wall == 0 and A_wall >= 0)) else U
    first_comp = U if m > 0 else V_COMP  # the other component gets the origin ghost

    k = np.arange(1, 2 * n + 1)
    r = k * (h / 2.0)
    comp = np.where(k % 2 == 1, first_comp, 1 - first_comp).astype(np.int8)
    if comp[-1] == kill_comp:
        # the ghost just beyond the last node must be the killed component
        r = r[:-1]
        comp = comp[:-1]
    return r, comp


def assemble_channel_matrix(
    profile: FieldProfile, ch: Channel, grid: RadialGrid
) -> ChannelOperator:
    """Assemble the symmetric tridiagonal channel matrix on the staggered chain.

    Derivative couplings are +-1/h between interleaved neighbors (sign set by
    which component sits lower); A_m = A - m/r enters each coupling evaluated
    at the midpoint of the coupled pair; V sits on the diagonal at each node.
    """
    if grid.n < 2:
        raise AssemblyError("need n >= 2 grid nodes per component (matrix dim >= 4)")
    m = ch.m
    r, comp = _chain_layout(profile, m, grid)
    mids = 0.5 * (r[:-1] + r[1:])
    Am = profile.A(mids) - m / mids
    diag = profile.V(r).astype(float)
    if not (np.all(np.isfinite(Am)) and np.all(np.isfinite(diag))):
        raise AssemblyError(f"profile not finite on grid (channel j={ch.j})")
    sign = np.where(comp[:-1] == U, -1.0, 1.0)
    offdiag = sign / grid.h + 0.5 * Am
    return ChannelOperator(
        channel=ch,
        grid=grid,
        profile_label=profile.label,
        node_r=r,
        node_comp=comp,
        diag=diag,
        offdiag=offdiag,
    )


def assemble_squared_magnetic(
    profile: FieldProfile, ch: Channel, grid: RadialGrid
) -> SquaredMagneticOperator:
    """Assemble the two scalar tridiagonal spin blocks of the squared operator."""
    if grid.n < 2:
        raise AssemblyError("need n >= 2 grid nodes per component (matrix dim >= 4)")
    m = ch.m
    h = grid.h
    chain_r, chain_comp = _chain_layout(profile, m, grid)

    def block(rs: np.ndarray, sgn: float):
        Am = profile.A(rs) - m / rs
        dAm = profile.dA(rs) + m / rs ** 2
        pot = Am ** 2 + sgn * dAm
        if not np.all(np.isfinite(pot)):
            raise AssemblyError(f"profile not finite on grid (channel j={ch.j})")
        d = 2.0 / h ** 2 + pot
        e = np.full(len(rs) - 1, -1.0 / h ** 2)
        return d, e

    up_r = chain_r[chain_comp == U]
    dn_r = chain_r[chain_comp == V_COMP]
    up_d, up_e = block(up_r, -1.0)
    dn_d, dn_e = block(dn_r, +1.0)
    return SquaredMagneticOperator(
        channel=ch, grid=grid,
        up_r=up_r, up_diag=up_d, up_offdiag=up_e,
        down_r=dn_r, down_diag=dn_d, down_offdiag=dn_e,
    )


def auto_grid(
    profile: FieldProfile,
    js,
    delta0: float = 0.1,
    R_floor: float = 40.0,
    h_target: float = 0.02,
    n_cap: int = 8000,
    r_factor: float = 8.0,
) -> RadialGrid:
    """Default grid rule: R_max = max(R_floor, r_factor * max_j r_j), n capped.

    The box must contain the supports of the channel cutoffs (which live on
    [3 r_j, 6 r_j]) with margin; resolution defaults to h_target but degrades
    gracefully under the node cap for very large boxes.
    """
    rj_max = max(turning_radius(profile, m_of(j), delta0) for j in js)
    R = max(R_floor, r_factor * rj_max)
    n = min(n_cap, int(np.ceil(R / h_target)))
    return RadialGrid(h=R / n, n=n)
