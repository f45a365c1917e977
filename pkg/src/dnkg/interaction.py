"""Soliton-pair interaction integrals and the scalar force law g(r).

The two ingredients used downstream are

    <f(Q), Q(. + z)>  =  int Q^p(y) Q(y + z) dy        (pair integral)
    H(z)              =  int grad(Q^p)(y) Q(y + z) dy  (force integral)

H is parallel to z with H(z) = c1 (z/|z|) g(|z|); g is tabulated on a
window of separations and continued by its asymptote g0 * q(r) beyond it.
All integrals reduce to one- or two-dimensional quadratures: in d >= 2 the
integrand is radially smooth, so a polar grid around the first soliton with
panelised Gauss-Legendre nodes converges fast.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from .errors import (
    ConfigurationTooClose,
    DegenerateConfiguration,
    InvalidParams,
    QuadratureError,
)
from .groundstate import eval_dq, eval_q, soliton_energy, sphere_area

__all__ = [
    "InteractionKernel",
    "AnalyticKernel",
    "q_star",
    "pair_interaction",
    "force_vector",
    "build_kernel",
    "force_g",
    "energy_expansion",
    "save_g_table",
]


def q_star(gs, centers):
    """Interaction strength: sum of q over ordered pairs of distinct centers."""
    z = np.atleast_2d(np.asarray(centers, dtype=float))
    n = z.shape[0]
    if n < 2:
        return 0.0
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    iu = np.triu_indices(n, k=1)
    pair_d = dist[iu]
    if np.any(pair_d < 1e-12):
        raise DegenerateConfiguration("two centers coincide")
    return float(2.0 * np.sum(eval_q(gs, pair_d)))


def _gl_nodes(edges, n):
    """Concatenated Gauss-Legendre nodes/weights over consecutive panels."""
    x, w = leggauss(n)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * (x + 1.0) + a)
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _pair_quad_1d(gs, r, n):
    p = gs.params.p
    y, w = _gl_nodes([-r - 35.0, -r, -0.5 * r, 0.0, 35.0], n)
    vals = eval_q(gs, np.abs(y)) ** p * eval_q(gs, np.abs(y + r))
    return float(np.sum(w * vals))


def _pair_quad_nd(gs, r, n, deriv=False):
    """Polar quadrature of int K(y) q(|y + r e1|) dy for d >= 2.

    With deriv=False, K = q^p; with deriv=True, K = p q^(p-1) q' cos(theta),
    which gives the first component of the force integral H.
    """
    d, p = gs.params.d, gs.params.p
    s, ws = _gl_nodes([1e-9, 0.5 * r, 1.5 * r, r + 35.0], n)
    t, wt = _gl_nodes([0.0, math.pi], n)
    ct = np.cos(t)
    dist = np.sqrt(s[:, None] ** 2 + r * r + 2.0 * r * s[:, None] * ct[None, :])
    qfar = eval_q(gs, dist)
    ang = np.sin(t) ** (d - 2) * wt
    if deriv:
        radial = p * eval_q(gs, s) ** (p - 1) * eval_dq(gs, s) * s ** (d - 1) * ws
        inner = qfar * (ct * ang)[None, :]
    else:
        radial = eval_q(gs, s) ** p * s ** (d - 1) * ws
        inner = qfar * ang[None, :]
    return sphere_area(d - 1) * float(np.sum(radial * inner.sum(axis=1)))


def pair_interaction(gs, z, n_nodes=120):
    """<f(Q), Q(. + z)> by direct quadrature, with a self-check against
    the tail prediction c1 g0 q(|z|).

    Raises QuadratureError when the two-resolution error estimate exceeds
    1e-5 relative, or when the value strays absurdly far from the tail law
    (which signals a broken kernel rather than physics).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    r = float(np.linalg.norm(z))
    if r < 2.0:
        raise InvalidParams("pair separation must be at least 2")
    if gs.params.d == 1:
        val = _pair_quad_1d(gs, r, n_nodes)
        chk = _pair_quad_1d(gs, r, int(0.7 * n_nodes))
    else:
        val = _pair_quad_nd(gs, r, n_nodes)
        chk = _pair_quad_nd(gs, r, int(0.7 * n_nodes))
    if abs(val - chk) > 1e-5 * abs(val):
        raise QuadratureError(
            f"pair integral at |z|={r:.3g} unstable: {val:.6e} vs {chk:.6e}"
        )
    tail = gs.c1 * gs.g0 * eval_q(gs, r)
    if not 0.2 < val / tail < 5.0:
        raise QuadratureError(
            f"pair integral {val:.3e} far from tail prediction {tail:.3e}"
        )
    return val


def force_vector(gs, z, n_nodes=120):
    """Full force integral H(z) = int grad(Q^p)(y) Q(y + z) dy, d <= 2.

    Computed without assuming radial alignment, for diagnostics; the
    production path uses the aligned scalar g via build_kernel.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    d, p = gs.params.d, gs.params.p
    if d == 1:
        r = float(z[0])
        y, w = _gl_nodes([-abs(r) - 35.0, -abs(r), 0.0, 35.0], n_nodes)
        integ = (
            p
            * eval_q(gs, np.abs(y)) ** (p - 1)
            * eval_dq(gs, np.abs(y))
            * np.sign(y)
            * eval_q(gs, np.abs(y + r))
        )
        return np.array([np.sum(w * integ)])
    if d != 2:
        raise InvalidParams("force_vector supports d = 1 and d = 2 only")
    r = float(np.linalg.norm(z))
    s, ws = _gl_nodes([1e-9, 0.5 * r, 1.5 * r, r + 35.0], n_nodes)
    t, wt = _gl_nodes([0.0, 2.0 * math.pi], n_nodes)
    ct, st = np.cos(t), np.sin(t)
    yx = s[:, None] * ct[None, :]
    yy = s[:, None] * st[None, :]
    dist = np.sqrt((yx + z[0]) ** 2 + (yy + z[1]) ** 2)
    radial = p * eval_q(gs, s) ** (p - 1) * eval_dq(gs, s) * s * ws
    qfar = eval_q(gs, dist)
    hx = np.sum(radial[:, None] * ct[None, :] * wt[None, :] * qfar)
    hy = np.sum(radial[:, None] * st[None, :] * wt[None, :] * qfar)
    return np.array([hx, hy])


@dataclass
class InteractionKernel:
    """Tabulated force law g with the g0 q(r) continuation past the table."""

    gs: object
    r_table: np.ndarray
    g_table: np.ndarray
    g0: float
    c1: float
    r_lo: float
    r_hi: float
    tail_match: float = 1.0
    asym_constant: float = 0.0
    _spline: CubicSpline = field(default=None, repr=False)

    def __post_init__(self):
        if self._spline is None:
            self._spline = CubicSpline(self.r_table, self.g_table)
        # scale the q-tail to meet the table value at r_hi (relative gap
        # is O(1/r_hi); keeps the force law continuous for the integrators)
        self.tail_match = float(
            self._spline(self.r_hi) / (self.g0 * eval_q(self.gs, self.r_hi))
        )
        gq = self.g0 * eval_q(self.gs, self.r_table)
        self.asym_constant = float(
            np.max(np.abs(self.g_table - gq) * self.r_table / gq)
        )

    @property
    def floor(self):
        """Lowest separation the table can evaluate (event localisation pad)."""
        return float(self.r_table[0])

    def g(self, r):
        return force_g(self, r)

    def __call__(self, r):
        return force_g(self, r)


@dataclass
class AnalyticKernel:
    """Closed-form force law for model studies (e.g. g0 kappa e^-r).

    Mirrors the InteractionKernel evaluation surface so the reduced
    integrators can run on exact kernels with no tabulation error.
    """

    fn: object  # r -> g(r), vectorised
    g0: float
    kappa: float
    r_lo: float = 0.0
    r_hi: float = math.inf
    gs: object = None

    @property
    def floor(self):
        return self.r_lo

    def g(self, r):
        return self.fn(np.asarray(r, dtype=float))

    def __call__(self, r):
        return self.g(r)


def build_kernel(gs, r_lo=2.0, r_hi=25.0, dr=0.05, n_nodes=90):
    """Tabulate g(r) = H1(r e1)/c1 on [r_lo, r_hi] and spline it.

    The table is padded slightly below r_lo so that event localisation in
    the reduced integrators can evaluate the force marginally past the
    collision floor.
    """
    d, p = gs.params.d, gs.params.p
    pad = max(0.1, r_lo - 0.75)
    rs = np.arange(pad, r_hi + dr / 2, dr)
    vals = np.empty_like(rs)
    if d == 1:
        for i, r in enumerate(rs):
            y, w = _gl_nodes([-r - 35.0, -r, 0.0, 35.0], n_nodes)
            integ = (
                p
                * eval_q(gs, np.abs(y)) ** (p - 1)
                * eval_dq(gs, np.abs(y))
                * np.sign(y)
                * eval_q(gs, np.abs(y + r))
            )
            vals[i] = np.sum(w * integ)
    else:
        for i, r in enumerate(rs):
            vals[i] = _pair_quad_nd(gs, r, n_nodes, deriv=True)
    g = vals / gs.c1
    kern = InteractionKernel(
        gs=gs,
        r_table=rs,
        g_table=g,
        g0=gs.g0,
        c1=gs.c1,
        r_lo=float(r_lo),
        r_hi=float(r_hi),
    )
    if np.any(g[rs >= r_lo] <= 0):
        raise QuadratureError("force law g is not positive on the table range")
    return kern


def force_g(kernel, r):
    """Evaluate the force law; g0 q(r) (scale-matched) beyond the table."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if np.any(r < kernel.r_table[0]):
        raise InvalidParams(
            f"force law requested at r={r.min():.3g} below the tabulated range"
        )
    out = np.empty_like(r)
    inside = r <= kernel.r_hi
    out[inside] = kernel._spline(r[inside])
    if np.any(~inside):
        out[~inside] = (
            kernel.tail_match * kernel.g0 * eval_q(kernel.gs, r[~inside])
        )
    return float(out[0]) if scalar else out


def energy_expansion(gs, centers, signs):
    """Two-term energy prediction for a well-separated signed sum of solitons.

    |Omega| E(Q,0) - c1 g0 * sum over ordered pairs of sigma sigma' q(dist).
    """
    z = np.atleast_2d(np.asarray(centers, dtype=float))
    sig = np.asarray(signs, dtype=float)
    qs = q_star(gs, z)
    if qs > 0.1:
        raise ConfigurationTooClose(f"q_star = {qs:.3g} > 0.1, expansion invalid")
    n = z.shape[0]
    e0 = soliton_energy(gs)
    if n == 1:
        return e0
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    iu = np.triu_indices(n, k=1)
    pair_term = np.sum(sig[iu[0]] * sig[iu[1]] * eval_q(gs, dist[iu]))
    return n * e0 - gs.c1 * gs.g0 * 2.0 * float(pair_term)


def save_g_table(kernel, path):
    """CSV export of the force-law table: r, g, g0*q(r)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "g", "g0_q"])
        for r, g in zip(kernel.r_table, kernel.g_table):
            writer.writerow([repr(float(r)), repr(float(g)), repr(float(kernel.g0 * eval_q(kernel.gs, r)))])
