"""Finite-dimensional soliton-center dynamics and its log-law asymptotics.

First-order system (overdamped centers y):

    y_w' = -(1/2a) sum_{v != w} s_w s_v (y_w - y_v)/|y_w - y_v| g(|y_w - y_v|)

so same-sign pairs attract and opposite-sign pairs repel.  Second-order
system in (z, l):  z' = l,  l' = -2a l - sum s s' (z_w - z_v)/|.| g(|.|),
with y = z + l/(2a).  For an admissible rigid configuration every vertex
stays on a dilation of the template and the dynamics reduces to the scalar
law  r' = (gamma_raw / 2a) g(r)  for the nearest-neighbour distance r; the
long-time integration is done in log-time, where the equation is not stiff.

Remainder terms of the modulation analysis are deliberately dropped here;
this module is the model system that the field solver is compared against.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CollisionDetected, NotAdmissible, WindowTooShort

__all__ = [
    "ReducedState",
    "ReducedTrajectory",
    "AsymptoticFit",
    "pairwise_distances",
    "step_first_order",
    "step_second_order",
    "run_first_order",
    "run_second_order",
    "integrate_symmetric",
    "fit_asymptotics",
    "collapse_experiment",
]

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _dp45(f, t, y, h, rtol, atol):
    """One embedded Dormand-Prince step; returns (ok, t_new, y_new, h_next)."""
    k = [f(t, y)]
    for i in range(1, 7):
        yi = y + h * sum(a * kk for a, kk in zip(_DP_A[i], k))
        k.append(f(t + _DP_C[i] * h, yi))
    y5 = y + h * sum(b * kk for b, kk in zip(_DP_B5, k) if b != 0.0)
    y4 = y + h * sum(b * kk for b, kk in zip(_DP_B4, k))
    scale = atol + rtol * max(np.linalg.norm(y), np.linalg.norm(y5))
    err = np.linalg.norm(y5 - y4) / scale
    if err == 0.0:
        fac = 5.0
    else:
        fac = min(5.0, max(0.2, 0.9 * err ** (-0.2)))
    if err <= 1.0:
        return True, t + h, y5, h * fac
    return False, t, y, h * fac


class _AdaptiveDriver:
    """Steps f adaptively from (t, y), stopping exactly on requested times."""

    def __init__(self, f, t, y, rtol=1e-10, atol=1e-12, h0=1e-3, h_max=np.inf):
        self.f, self.t, self.y = f, t, np.asarray(y, dtype=float)
        self.rtol, self.atol = rtol, atol
        self.h = h0
        self.h_max = h_max

    def advance(self, t_target):
        while self.t < t_target:
            h = min(self.h, self.h_max, t_target - self.t)
            ok, tn, yn, hn = _dp45(self.f, self.t, self.y, h, self.rtol, self.atol)
            if ok:
                self.t, self.y = tn, yn
            self.h = min(hn, self.h_max)
            if self.h < 1e-14 * max(1.0, abs(self.t)):
                raise RuntimeError("step size underflow in the reduced integrator")
        return self.y


@dataclass
class ReducedState:
    """Centers (and optionally boosts) with their configuration and kernel."""

    t: float
    y: np.ndarray  # (n, d) centers in first-order mode, or z in second-order
    signs: np.ndarray
    kernel: object
    alpha: float
    ell: np.ndarray = None  # boosts; presence selects the second-order system
    config: object = None

    @property
    def centers(self):
        """Effective first-order centers y = z + l/(2 alpha)."""
        if self.ell is None:
            return self.y
        return self.y + self.ell / (2.0 * self.alpha)


@dataclass
class ReducedTrajectory:
    t: np.ndarray
    y: np.ndarray  # (nt, n, d)
    r_min: np.ndarray
    r_max: np.ndarray
    collided: bool = False
    t_collision: float = None
    ell: np.ndarray = None

    @property
    def r(self):
        """Nearest-neighbour distance series (alias of r_min)."""
        return self.r_min


def pairwise_distances(y):
    n = y.shape[0]
    diff = y[:, None, :] - y[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    iu = np.triu_indices(n, k=1)
    return dist[iu]


def state_from_config(config, kernel, r0, alpha, second_order=False):
    """Initial centers lambda_Omega * r0 * vertices (nearest distance r0)."""
    y0 = config.lambda_omega * r0 * config.vertices
    return ReducedState(
        t=0.0,
        y=y0,
        signs=config.signs.copy(),
        kernel=kernel,
        alpha=alpha,
        ell=np.zeros_like(y0) if second_order else None,
        config=config,
    )


def _forces(kernel, signs, y, floor, sign=1.0):
    n = y.shape[0]
    diff = y[:, None, :] - y[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    np.fill_diagonal(dist, np.inf)
    if dist.min() < floor:
        raise CollisionDetected("pair distance fell below the kernel floor")
    g = kernel.g(np.where(np.isinf(dist), min(kernel.r_hi, 50.0), dist))
    np.fill_diagonal(g, 0.0)
    coef = signs[:, None] * signs[None, :] * g / dist
    return -sign * np.einsum("ij,ijk->ik", coef, diff)


def _first_order_rhs(kernel, signs, alpha, floor, force_sign=1.0):
    def f(t, flat):
        y = flat.reshape(len(signs), -1)
        return (_forces(kernel, signs, y, floor, force_sign) / (2.0 * alpha)).ravel()

    return f


def _second_order_rhs(kernel, signs, alpha, floor):
    n = len(signs)

    def f(t, flat):
        zl = flat.reshape(2 * n, -1)
        z, ell = zl[:n], zl[n:]
        acc = _forces(kernel, signs, z, floor) - 2.0 * alpha * ell
        return np.vstack([ell, acc]).ravel()

    return f


def step_first_order(state, dt_ctrl=None):
    """Advance the first-order center system by one adaptive RK5(4) step."""
    ctrl = {"rtol": 1e-10, "atol": 1e-12, "h0": 1e-2}
    if dt_ctrl:
        ctrl.update(dt_ctrl)
    f = _first_order_rhs(state.kernel, state.signs, state.alpha, state.kernel.floor)
    drv = _AdaptiveDriver(f, state.t, state.y.ravel(), **ctrl)
    ok = False
    while not ok:
        h = drv.h
        ok, tn, yn, hn = _dp45(f, drv.t, drv.y, h, drv.rtol, drv.atol)
        drv.h = hn
    return replace(state, t=tn, y=yn.reshape(state.y.shape))


def step_second_order(state, dt_ctrl=None):
    """One adaptive step of the (z, l) system; state.ell must be set."""
    ctrl = {"rtol": 1e-10, "atol": 1e-12, "h0": 1e-2}
    if dt_ctrl:
        ctrl.update(dt_ctrl)
    f = _second_order_rhs(state.kernel, state.signs, state.alpha, state.kernel.floor)
    flat = np.vstack([state.y, state.ell]).ravel()
    drv = _AdaptiveDriver(f, state.t, flat, **ctrl)
    ok = False
    while not ok:
        ok, tn, yn, hn = _dp45(f, drv.t, drv.y, drv.h, drv.rtol, drv.atol)
        drv.h = hn
    zl = yn.reshape(2 * state.y.shape[0], -1)
    n = state.y.shape[0]
    return replace(state, t=tn, y=zl[:n], ell=zl[n:])


def _run(state, t_end, second_order, t_eval=None, rtol=1e-10, atol=1e-12,
         r_collide=None, force_sign=1.0):
    n, d = state.y.shape
    kernel = state.kernel
    floor = kernel.floor
    r_collide = kernel.r_lo if r_collide is None else r_collide
    if second_order:
        f = _second_order_rhs(kernel, state.signs, state.alpha, floor)
        flat = np.vstack([state.y, state.ell]).ravel()
    else:
        f = _first_order_rhs(kernel, state.signs, state.alpha, floor, force_sign)
        flat = state.y.ravel()
    if t_eval is None:
        t_eval = np.linspace(state.t, t_end, 201)
    drv = _AdaptiveDriver(f, state.t, flat, rtol=rtol, atol=atol)

    ts, ys, ells = [], [], []
    collided, t_col = False, None

    def unpack(vec):
        arr = vec.reshape(-1, d)
        return (arr[:n], arr[n:]) if second_order else (arr, None)

    for tk in t_eval:
        if tk < drv.t:
            continue
        try:
            drv.advance(tk)
        except CollisionDetected:
            collided = True
            t_col = drv.t
            break
        z, ell = unpack(drv.y)
        y_now = z if ell is None else z + ell / (2 * state.alpha)
        pd = pairwise_distances(y_now)
        ts.append(drv.t)
        ys.append(z.copy())
        if second_order:
            ells.append(ell.copy())
        if pd.min() < r_collide:
            collided = True
            t_col = drv.t
            break
    y_arr = np.array(ys)
    pd_all = np.array([pairwise_distances(yk if not second_order else
                                          yk + ells[i] / (2 * state.alpha))
                       for i, yk in enumerate(y_arr)])
    return ReducedTrajectory(
        t=np.array(ts),
        y=y_arr,
        r_min=pd_all.min(axis=1) if len(ts) else np.array([]),
        r_max=pd_all.max(axis=1) if len(ts) else np.array([]),
        collided=collided,
        t_collision=t_col,
        ell=np.array(ells) if second_order else None,
    )


def run_first_order(state, t_end, **kw):
    """Integrate the center system, sampling at t_eval (default uniform).

    Terminates with the trajectory flagged as collided when the minimal pair
    distance crosses the kernel's validity floor.
    """
    return _run(state, t_end, second_order=False, **kw)


def run_second_order(state, t_end, **kw):
    """Integrate the (z, l) modulation model; state.ell must be set."""
    if state.ell is None:
        raise NotAdmissible("second-order mode needs boosts ell on the state")
    return _run(state, t_end, second_order=True, **kw)


def symmetric_rate(config, kernel, alpha, all_shells=False):
    """Scalar force law F(r) with r' = F(r) for the rigid dilation mode.

    With all_shells=True every pair interaction is kept (the exact radial
    reduction of the vector field); otherwise only the nearest-neighbour
    term (gamma_raw/2a) g(r) of the expansion law.
    """
    if not config.admissible:
        raise NotAdmissible(f"{config.name} has gamma <= 0")
    d_min = 1.0 / config.lambda_omega
    gamma = config.gamma_raw
    if not all_shells:
        return lambda r: gamma / (2.0 * alpha) * kernel.g(r)
    i0 = 0 if config.center_index != 0 else 1
    w0 = config.vertices[i0]
    others = [j for j in range(config.size) if j != i0]
    rel = np.array([w0 - config.vertices[j] for j in others])
    dist0 = np.linalg.norm(rel, axis=1)
    proj = (rel @ w0) / dist0 / (w0 @ w0)
    ss = config.signs[i0] * config.signs[np.array(others)]

    def rate(r):
        rho = r * config.lambda_omega
        return -d_min / (2.0 * alpha) * np.sum(ss * proj * kernel.g(rho * dist0))

    return rate


def integrate_symmetric(config, kernel, r0, t_end, alpha, n_out=400,
                        all_shells=False, rate=None, rtol=1e-12):
    """Scalar symmetric trajectory r(t), sampled logarithmically in time.

    Integrates in tau = ln t past t = 1 (the scalar law is stiffness-free
    there because r grows like tau).  A custom ``rate`` callable overrides
    the kernel-derived law, which is how the closed-form model kernels are
    exercised.
    """
    if rate is None:
        rate = symmetric_rate(config, kernel, alpha, all_shells)
    if r0 < kernel.r_lo:
        raise NotAdmissible(f"r0 = {r0} is below the kernel validity range")
    t_head = min(1.0, t_end)
    drv = _AdaptiveDriver(
        lambda t, y: np.array([rate(y[0])]), 0.0, [r0], rtol=rtol, atol=1e-13
    )
    head_times = np.linspace(0.0, t_head, 33)
    ts, rs = [0.0], [r0]
    for tk in head_times[1:]:
        drv.advance(tk)
        ts.append(tk)
        rs.append(drv.y[0])
    if t_end > 1.0:
        tau_grid = np.linspace(0.0, math.log(t_end), n_out)
        drv2 = _AdaptiveDriver(
            lambda tau, y: np.array([math.exp(tau) * rate(y[0])]),
            0.0,
            [rs[-1]],
            rtol=rtol,
            atol=1e-13,
            h0=1e-3,
        )
        for tau in tau_grid[1:]:
            drv2.advance(tau)
            ts.append(math.exp(tau))
            rs.append(drv2.y[0])
    t = np.array(ts)
    r = np.array(rs)
    y = r[:, None, None] * config.lambda_omega * config.vertices[None, :, :]
    return ReducedTrajectory(t=t, y=y, r_min=r, r_max=r * 0 + r, collided=False)


@dataclass
class AsymptoticFit:
    """Coefficients of r(t) ~ ln t + lambda_fit ln ln t + c_fit."""

    lambda_fit: float
    c_fit: float
    refine_fit: float
    window: tuple
    residual: float


def fit_asymptotics(traj, d, window_decades=2.0):
    """Fit the log-law tail r(t) ~ ln t - ((d-1)/2) ln ln t + c of a
    symmetric trajectory.

    Two least-squares passes on the last ``window_decades`` decades, both
    with a 1/t regressor absorbing the launch transient:

    * lambda_fit: free ln ln t coefficient from  r - ln t ~ A lnln t + c
      (the consistency check that the trajectory follows the law);
    * c_fit: with the coefficient pinned to -(d-1)/2 and the proof's
      predicted ((d-1)/2)^2 lnln t/ln t refinement subtracted, so the
      constant converges at practical horizons.

    The residual is the sup gap of the pinned model over the window.
    """
    t, r = traj.t, traj.r_min
    if t[-1] < 1e6:
        raise WindowTooShort("need the trajectory to span t up to at least 1e6")
    t_hi = t[-1]
    t_lo = t_hi / 10**window_decades
    msk = (t >= t_lo) & (t <= t_hi)
    if msk.sum() < 8:
        raise WindowTooShort("too few samples in the fit window")
    tt, rr = t[msk], r[msk]
    m = (d - 1) / 2.0
    s = rr - np.log(tt)
    u = np.log(np.log(tt))
    w = np.log(tt)

    reg_free = np.vstack([u, np.ones_like(tt), 1.0 / tt]).T
    coef_free, *_ = np.linalg.lstsq(reg_free, s, rcond=None)

    s_pinned = s + m * u - m * m * u / w
    reg_pin = np.vstack([np.ones_like(tt), 1.0 / tt]).T
    coef_pin, *_ = np.linalg.lstsq(reg_pin, s_pinned, rcond=None)
    resid = float(np.max(np.abs(s_pinned - reg_pin @ coef_pin)))
    return AsymptoticFit(
        lambda_fit=float(coef_free[0]),
        c_fit=float(coef_pin[0]),
        refine_fit=m * m,
        window=(float(t_lo), float(t_hi)),
        residual=resid,
    )


def _increase_episodes(t, series, tol=1e-10):
    """Maximal intervals on which the series strictly increases."""
    episodes = []
    i = 0
    while i < len(series) - 1:
        if series[i + 1] > series[i] + tol:
            j = i
            while j < len(series) - 1 and series[j + 1] > series[j] + tol:
                j += 1
            episodes.append(
                {
                    "t_start": float(t[i]),
                    "t_end": float(t[j]),
                    "rise": float(series[j] - series[i]),
                }
            )
            i = j
        i += 1
    return episodes


def collapse_experiment(kernel, points, alpha, t_max=2e4, signs=None,
                        r_collide=None, second_order=False, ell0=None,
                        n_out=2000):
    """Run a same-sign configuration to collision and report the geometry.

    Returns the min/max pairwise distance series, the collision time (None
    if it survived to t_max), monotonicity diagnostics, and the intervals
    on which the minimal (and any individual) pair distance increased.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if signs is None:
        signs = np.ones(n)
    signs = np.asarray(signs, dtype=float)
    if not np.all(signs == signs[0]):
        raise NotAdmissible("collapse experiments are for equal-sign configurations")
    if ell0 is not None:
        second_order = True
    state = ReducedState(
        t=0.0,
        y=points,
        signs=signs,
        kernel=kernel,
        alpha=alpha,
        ell=(np.asarray(ell0, dtype=float) if ell0 is not None
             else np.zeros_like(points)) if second_order else None,
    )
    t_eval = np.linspace(0.0, t_max, n_out)
    traj = _run(state, t_max, second_order=second_order, t_eval=t_eval,
                r_collide=r_collide)
    from .groundstate import eval_q  # local import to avoid a cycle at load

    qstar = np.array(
        [2.0 * np.sum(eval_q(kernel.gs, pairwise_distances(yk))) for yk in traj.y]
    )
    if traj.ell is not None:
        pd_series = np.array(
            [
                pairwise_distances(traj.y[i] + traj.ell[i] / (2 * alpha))
                for i in range(traj.t.size)
            ]
        )
    else:
        pd_series = np.array([pairwise_distances(yk) for yk in traj.y])
    pair_episodes = {}
    for j in range(pd_series.shape[1] if pd_series.size else 0):
        eps = _increase_episodes(traj.t, pd_series[:, j])
        if eps:
            pair_episodes[j] = eps
    report = {
        "t": traj.t,
        "r_min": traj.r_min,
        "r_max": traj.r_max,
        "q_star": qstar,
        "collided": traj.collided,
        "t_collision": traj.t_collision,
        "max_monotone_decreasing": bool(
            np.all(np.diff(traj.r_max) <= 1e-9) if traj.t.size > 1 else True
        ),
        "min_increase_episodes": _increase_episodes(traj.t, traj.r_min),
        "pair_increase_episodes": pair_episodes,
        "q_star_final_over_initial": float(qstar[-1] / qstar[0]) if qstar.size else None,
    }
    return report
