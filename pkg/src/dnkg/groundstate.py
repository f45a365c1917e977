"""Radial ground-state profile of -ΔQ + Q - |Q|^(p-1) Q = 0 and its constants.

The profile q(r) solves

    q'' + (d-1)/r q' - q + q^p = 0,   q'(0) = 0,   q(r) -> 0,

and decays like kappa * r^(-(d-1)/2) * exp(-r).  We locate q(0) by
overshoot/undershoot bisection (too large an amplitude crosses zero, too
small turns back up towards the q = 1 equilibrium), then polish the whole
profile with a collocation solve in w = ln q, which keeps *relative*
accuracy uniform down to the far tail.  Beyond the grid the far field is the
exact solution of the linearised equation, A * r^(1-d/2) * K_{d/2-1}(r).

Derived constants:

    c1 = ||d_{x1} Q||_L2^2           (one Cartesian derivative, d-dim integral)
    g0 = (1/c1) * int Q^p e^{-x1} dx  (tail-interaction amplitude)
    kappa = lim q(r) r^((d-1)/2) e^r
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_bvp, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import gamma as gamma_fn
from scipy.special import ive, kve

from .errors import FitUnstable, InvalidParams, NoConvergence
from .params import ModelParams

__all__ = [
    "GroundState",
    "solve_ground_state",
    "eval_q",
    "eval_dq",
    "eval_dq_over_r",
    "compute_constants",
    "sphere_area",
    "soliton_energy",
    "save_profile",
    "load_profile",
]

_R_SERIES = 1e-4  # left endpoint stepping off the (d-1)/r singularity


def sphere_area(n):
    """Surface measure of the unit sphere in R^n (n >= 1); 2 for n = 1."""
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def _series_coeffs(a, d, p):
    # q(r) = a + c2 r^2 + c4 r^4 + O(r^6) near r = 0
    c2 = a * (1.0 - a ** (p - 1.0)) / (2.0 * d)
    c4 = (1.0 - p * a ** (p - 1.0)) * c2 / (4.0 * (d + 2.0))
    return c2, c4


def _tail_logderiv(r, d):
    # d/dr log( r^(1-d/2) K_nu(r) ), nu = d/2 - 1, via scaled Bessel functions
    nu = d / 2.0 - 1.0
    kratio = -(kve(nu - 1.0, r) + kve(nu + 1.0, r)) / (2.0 * kve(nu, r))
    return (1.0 - d / 2.0) / r + kratio


def _tail_shape(r, d):
    # r^(1-d/2) K_nu(r) * e^r, stable for large r
    nu = d / 2.0 - 1.0
    return r ** (1.0 - d / 2.0) * kve(nu, r)


@dataclass
class GroundState:
    """Tabulated radial ground state with spline evaluation and tail data."""

    params: ModelParams
    r_grid: np.ndarray
    q_values: np.ndarray
    dq_values: np.ndarray
    kappa: float
    c1: float
    g0: float
    q0: float = 0.0
    tail_amplitude: float = 0.0
    kappa_fit_spread: float = 0.0
    tail_fit_constant: float = 0.0
    _q_spline: CubicHermiteSpline = field(default=None, repr=False)
    _dq_spline: CubicHermiteSpline = field(default=None, repr=False)

    @property
    def r_max(self):
        return float(self.r_grid[-1])

    def __post_init__(self):
        if self._q_spline is None:
            self._build_splines()

    def _build_splines(self):
        d, p = self.params.d, self.params.p
        r, q, dq = self.r_grid, self.q_values, self.dq_values
        # second derivative from the ODE itself (exact at the nodes)
        ddq = np.empty_like(q)
        ddq[0] = (q[0] - q[0] ** p) / d
        ddq[1:] = q[1:] - q[1:] ** p - (d - 1) / r[1:] * dq[1:]
        self._q_spline = CubicHermiteSpline(r, q, dq)
        self._dq_spline = CubicHermiteSpline(r, dq, ddq)


def eval_q(gs, r):
    """Ground-state profile q(|x|), total on r >= 0 (tail formula past the grid)."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.empty_like(r)
    inside = r <= gs.r_max
    if np.any(inside):
        out[inside] = gs._q_spline(r[inside])
    if np.any(~inside):
        rr = r[~inside]
        out[~inside] = gs.tail_amplitude * _tail_shape(rr, gs.params.d) * np.exp(-rr)
    return float(out[0]) if scalar else out


def eval_dq(gs, r):
    """Radial derivative q'(r), with the Bessel-tail derivative past the grid."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    out = np.empty_like(r)
    inside = r <= gs.r_max
    if np.any(inside):
        out[inside] = gs._dq_spline(r[inside])
    if np.any(~inside):
        rr = r[~inside]
        q_t = gs.tail_amplitude * _tail_shape(rr, gs.params.d) * np.exp(-rr)
        out[~inside] = q_t * _tail_logderiv(rr, gs.params.d)
    return float(out[0]) if scalar else out


def eval_dq_over_r(gs, r):
    """q'(r)/r extended continuously through r = 0 (needed for grad Q on grids)."""
    r = np.asarray(r, dtype=float)
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    c2, c4 = _series_coeffs(gs.q0, gs.params.d, gs.params.p)
    small = r < 1e-3
    out = np.empty_like(r)
    out[small] = 2.0 * c2 + 4.0 * c4 * r[small] ** 2
    rs = r[~small]
    out[~small] = eval_dq(gs, rs) / rs
    return float(out[0]) if scalar else out


def _shoot_once(a, d, p, r_max, rtol=1e-12, dense=False):
    """Integrate outward from the series start; classify the trajectory.

    Returns (kind, sol) with kind in {'high', 'low', 'decay'}: 'high' means
    q crossed zero (amplitude too large), 'low' means q' turned non-negative
    while q > 0 (heading back to the q = 1 equilibrium).
    """
    r0 = max(_R_SERIES, 1e-6)
    c2, c4 = _series_coeffs(a, d, p)
    y0 = [a + c2 * r0**2 + c4 * r0**4, 2 * c2 * r0 + 4 * c4 * r0**3]

    def rhs(r, y):
        q, dq = y
        return [dq, q - np.sign(q) * np.abs(q) ** p - (d - 1) / r * dq]

    def ev_zero(r, y):
        return y[0]

    ev_zero.terminal = True
    ev_zero.direction = -1

    def ev_turn(r, y):
        return y[1]

    ev_turn.terminal = True
    ev_turn.direction = 1

    sol = solve_ivp(
        rhs,
        (r0, r_max),
        y0,
        rtol=rtol,
        atol=1e-14,
        events=(ev_zero, ev_turn),
        dense_output=dense,
        method="RK45",
    )
    if sol.t_events[0].size:
        return "high", sol
    if sol.t_events[1].size:
        return "low", sol
    # no event: either a genuinely decaying shot or a monotone rise towards
    # the q = 1 equilibrium (possible for small amplitudes, where q' never
    # changes sign)
    if sol.y[0, -1] < 1e-6 and sol.y[1, -1] < 0:
        return "decay", sol
    return "low", sol


def _bisect_amplitude(d, p, r_max, lo=1.0, hi=10.0, hi_cap=1e4, rtol=1e-10):
    """Overshoot/undershoot bisection for q(0); expands the bracket if needed."""
    kind_lo, _ = _shoot_once(lo, d, p, r_max, rtol=rtol)
    while kind_lo == "high" and lo > 1e-4:
        lo *= 0.5
        kind_lo, _ = _shoot_once(lo, d, p, r_max, rtol=rtol)
    if kind_lo == "high":
        raise NoConvergence("could not find a lower bracket for q(0)")
    kind_hi, _ = _shoot_once(hi, d, p, r_max, rtol=rtol)
    while kind_hi != "high":
        hi *= 2.0
        if hi > hi_cap:
            raise NoConvergence(f"no zero-crossing amplitude found below {hi_cap}")
        kind_hi, _ = _shoot_once(hi, d, p, r_max, rtol=rtol)

    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        kind, _ = _shoot_once(mid, d, p, r_max, rtol=rtol)
        if kind == "high":
            hi = mid
        elif kind == "low":
            lo = mid
        else:  # decayed all the way within tolerance: as converged as it gets
            lo = hi = mid
            break
    return 0.5 * (lo + hi)


def _polish_profile(a, d, p, r_max, tol):
    """Collocation solve in w = ln q for uniform relative accuracy.

    Left boundary enforces the regular series slope, right boundary the
    log-derivative of the exact linear far field r^(1-d/2) K_{d/2-1}(r).
    """
    kind, sol = _shoot_once(a, d, p, r_max, dense=True)
    r_stop = sol.t[-1]
    # keep the shot only while it is clean: stop well before the unstable
    # mode amplifies round-off (relative error ~ eps * e^{2r})
    r_clean = min(r_stop - 0.5 if kind != "decay" else r_stop, 15.0, r_max - 1.0)
    mesh_lo = np.linspace(_R_SERIES, r_clean, 600)
    q_lo = sol.sol(mesh_lo)[0]
    dq_lo = sol.sol(mesh_lo)[1]
    if np.any(q_lo <= 0):
        raise NoConvergence("shooting trajectory lost positivity before handoff")
    w_lo = np.log(q_lo)
    s_lo = dq_lo / q_lo

    mesh_hi = np.linspace(r_clean, r_max, 400)[1:]
    ld_hi = _tail_logderiv(mesh_hi, d)
    # tail guess: the exact linear far field, continued from w(r_clean)
    w_hi = (
        w_lo[-1]
        + (np.log(_tail_shape(mesh_hi, d)) - mesh_hi)
        - (math.log(_tail_shape(r_clean, d)) - r_clean)
    )

    mesh = np.concatenate([mesh_lo, mesh_hi])
    y_guess = np.vstack(
        [np.concatenate([w_lo, w_hi]), np.concatenate([s_lo, ld_hi])]
    )

    def rhs(r, y):
        w, s = y
        return np.vstack([s, -s * s - (d - 1) / r * s + 1.0 - np.exp((p - 1) * w)])

    def bc(ya, yb):
        res_a = ya[1] - _R_SERIES * (1.0 - math.exp((p - 1) * ya[0])) / d
        res_b = yb[1] - _tail_logderiv(r_max, d)
        return np.array([res_a, res_b])

    # 1e-10 is the practical floor for the collocation residual estimator;
    # below that the mesh refinement chases round-off
    bvp = solve_bvp(rhs, bc, mesh, y_guess, tol=max(tol / 10, 1e-10), max_nodes=100000)
    if not bvp.success:
        raise NoConvergence(f"profile collocation failed: {bvp.message}")
    return bvp


def solve_ground_state(params, r_max=40.0, tol=1e-8, grid_step=0.01):
    """Solve the radial ground-state ODE by bisection shooting plus polish.

    Parameters
    ----------
    params : ModelParams
    r_max : float
        Tabulation radius, at least 20 (e^-40 is below double round-off).
    tol : float
        Requested sup-norm profile accuracy, in (0, 1e-4].

    Returns
    -------
    GroundState with tabulated q, q', the tail amplitude, and the constants
    kappa, c1, g0.
    """
    if not isinstance(params, ModelParams):
        params = ModelParams(*params)
    if r_max < 20:
        raise InvalidParams("r_max must be at least 20")
    if not 0 < tol <= 1e-4:
        raise InvalidParams("tol must lie in (0, 1e-4]")
    d, p = params.d, params.p

    a = _bisect_amplitude(d, p, r_max)
    bvp = _polish_profile(a, d, p, r_max, tol)

    n = int(round(r_max / grid_step)) + 1
    r_grid = np.linspace(0.0, r_max, n)
    wsol = bvp.sol(r_grid[1:])
    q = np.empty(n)
    dq = np.empty(n)
    q[1:] = np.exp(wsol[0])
    dq[1:] = wsol[1] * q[1:]
    # series back to the origin
    a0 = float(np.exp(bvp.sol(_R_SERIES)[0]))
    c2, _ = _series_coeffs(a0, d, p)
    a0 = a0 - c2 * _R_SERIES**2
    q[0] = a0
    dq[0] = 0.0

    gs = GroundState(
        params=params,
        r_grid=r_grid,
        q_values=q,
        dq_values=dq,
        kappa=0.0,
        c1=0.0,
        g0=0.0,
        q0=a0,
    )
    nu = d / 2.0 - 1.0
    r_b = r_grid[-1]
    gs.tail_amplitude = q[-1] / (r_b ** (1.0 - d / 2.0) * kve(nu, r_b) * math.exp(-r_b))
    gs.kappa, gs.c1, gs.g0 = compute_constants(gs)
    return gs


def compute_constants(gs):
    """(kappa, c1, g0) from the tabulated profile.

    kappa comes from a least-squares fit of ln q + r + (d-1)/2 ln r over
    [r_max/2, 3 r_max/4]; a 1/r correction term absorbs the first Bessel
    correction so the fit is stable in every dimension.  c1 and g0 reduce to
    one-dimensional radial quadratures (for g0 the angular average of
    e^{-x1} over the sphere is an explicit Bessel factor).
    """
    d, p = gs.params.d, gs.params.p
    r_lo, r_hi = gs.r_max / 2.0, 0.75 * gs.r_max
    rs = np.linspace(r_lo, r_hi, 201)
    qs = eval_q(gs, rs)
    ln_prod = np.log(qs) + rs + 0.5 * (d - 1) * np.log(rs)
    # model: ln kappa + b / r
    A = np.vstack([np.ones_like(rs), 1.0 / rs]).T
    coef, *_ = np.linalg.lstsq(A, ln_prod, rcond=None)
    resid = ln_prod - A @ coef
    spread = float(resid.max() - resid.min())
    if spread > 1e-3:
        raise FitUnstable(f"kappa fit residual spread {spread:.2e} exceeds 1e-3")
    kappa = float(np.exp(coef[0]))
    gs.kappa_fit_spread = spread

    area = sphere_area(d)
    c1_rad, c1_err = quad(
        lambda r: eval_dq(gs, r) ** 2 * r ** (d - 1),
        0.0,
        gs.r_max,
        limit=300,
        epsabs=0.0,
        epsrel=1e-11,
    )
    c1 = area / d * c1_rad
    if c1_err / c1_rad > 1e-8:
        raise FitUnstable(f"c1 quadrature error {c1_err:.2e} too large")

    if d == 1:
        integ, ierr = quad(
            lambda r: eval_q(gs, r) ** p * 2.0 * np.cosh(r),
            0.0,
            gs.r_max,
            limit=300,
            epsabs=0.0,
            epsrel=1e-11,
        )
    else:
        nu_a = (d - 2) / 2.0
        pref = sphere_area(d - 1) * math.sqrt(math.pi) * gamma_fn((d - 1) / 2.0)

        def integrand(r):
            # q^p r^(d-1) * (angular average of e^{-x1}) ; I_nu scaled by e^-r
            ang = pref * (2.0 / r) ** nu_a * ive(nu_a, r)
            return eval_q(gs, r) ** p * r ** (d - 1) * ang * math.exp(r)

        integ, ierr = quad(
            integrand, 1e-12, gs.r_max, limit=300, epsabs=0.0, epsrel=1e-11
        )
    g0 = integ / c1
    if ierr / integ > 1e-8:
        raise FitUnstable(f"g0 quadrature error {ierr:.2e} too large")
    return kappa, float(c1), float(g0)


def soliton_energy(gs):
    """Static energy E(Q, 0) = 1/2 int |grad Q|^2 + Q^2 - 2/(p+1) Q^{p+1}."""
    d, p = gs.params.d, gs.params.p
    area = sphere_area(d)

    def integrand(r):
        q = eval_q(gs, r)
        return (eval_dq(gs, r) ** 2 + q * q - 2.0 / (p + 1.0) * q ** (p + 1.0)) * r ** (
            d - 1
        )

    val, _ = quad(integrand, 0.0, gs.r_max, limit=300, epsabs=1e-13, epsrel=1e-12)
    return 0.5 * area * val


def tail_consistency(gs):
    """Fitted constant C in |q - kappa r^{-(d-1)/2} e^{-r}| <= C q / r on the tail window."""
    rs = np.linspace(gs.r_max / 2.0, gs.r_max, 101)
    qs = eval_q(gs, rs)
    asym = gs.kappa * rs ** (-(gs.params.d - 1) / 2.0) * np.exp(-rs)
    c = float(np.max(np.abs(qs - asym) * rs / qs))
    gs.tail_fit_constant = c
    return c


def save_profile(gs, path):
    """Write the profile as CSV (r, q, dq) with a JSON header line."""
    header = {
        "params": gs.params.as_dict(),
        "kappa": gs.kappa,
        "c1": gs.c1,
        "g0": gs.g0,
        "q0": gs.q0,
        "tail_amplitude": gs.tail_amplitude,
    }
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["r", "q", "dq"])
        for r, q, dq in zip(gs.r_grid, gs.q_values, gs.dq_values):
            writer.writerow([repr(r), repr(q), repr(dq)])


def load_profile(path):
    """Inverse of save_profile."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise InvalidParams(f"{path} lacks the JSON header line")
        header = json.loads(first[2:])
        rows = list(csv.reader(io.StringIO(fh.read())))
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    params = ModelParams(**header["params"])
    gs = GroundState(
        params=params,
        r_grid=data[:, 0],
        q_values=data[:, 1],
        dq_values=data[:, 2],
        kappa=header["kappa"],
        c1=header["c1"],
        g0=header["g0"],
        q0=header["q0"],
        tail_amplitude=header["tail_amplitude"],
    )
    return gs
