"""Uniform periodic grids in one and two dimensions.

Points are x_i = -L + i h with h = 2L/n (the +L face is the periodic image
of -L).  Orthogonal maps whose matrices are signed permutations act on the
grid exactly by index arithmetic, which is what makes symmetry classes
checkable at round-off level.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParams


@dataclass
class Grid:
    d: int
    L: float
    n: int
    x: np.ndarray = field(default=None, repr=False)
    k2: np.ndarray = field(default=None, repr=False)
    k_axes: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise InvalidParams("field grids support d = 1 and d = 2")
        if self.n % 2:
            raise InvalidParams("grid size must be even")
        self.x = -self.L + self.h * np.arange(self.n)
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        if self.d == 1:
            self.k_axes = (kr,)
            self.k2 = kr**2
        else:
            self.k_axes = (k, kr)
            self.k2 = k[:, None] ** 2 + kr[None, :] ** 2

    @property
    def h(self):
        return 2.0 * self.L / self.n

    @property
    def shape(self):
        return (self.n,) * self.d

    def coords(self):
        """Coordinate arrays broadcastable to the field shape."""
        if self.d == 1:
            return (self.x,)
        return (self.x[:, None], self.x[None, :])

    def integrate(self, f):
        return float(np.sum(f)) * self.h**self.d

    def inner(self, a, b):
        return float(np.sum(a * b)) * self.h**self.d

    def gradient(self, u):
        """Spectral gradient, one array per axis."""
        uh = np.fft.rfftn(u)
        outs = []
        for ax in range(self.d):
            shape = [1] * self.d
            shape[ax] = -1
            kx = self.k_axes[ax].reshape(shape)
            outs.append(np.fft.irfftn(1j * kx * uh, s=self.shape))
        return outs

    def grad_norm_sq(self, u):
        return sum(self.integrate(g * g) for g in self.gradient(u))

    def signed_permutation(self, R):
        """Validate that R maps the grid to itself; return (perm, signs)."""
        R = np.asarray(R, dtype=float)
        perm = np.full(self.d, -1, dtype=int)
        signs = np.zeros(self.d)
        for i in range(self.d):
            for j in range(self.d):
                v = R[i, j]
                if abs(abs(v) - 1.0) < 1e-12:
                    perm[i], signs[i] = j, np.sign(v)
                elif abs(v) > 1e-12:
                    raise InvalidParams(
                        "symmetry generator is not a signed permutation; "
                        "it cannot act exactly on the grid"
                    )
        if sorted(perm.tolist()) != list(range(self.d)):
            raise InvalidParams("symmetry generator is not a signed permutation")
        return perm, signs

    def apply_orthogonal(self, u, R):
        """Samples of x -> u(R x) for a signed-permutation matrix R."""
        perm, signs = self.signed_permutation(R)
        n = self.n
        idx = np.arange(n)
        neg = (n - idx) % n
        if self.d == 1:
            return u[neg] if signs[0] < 0 else u.copy()
        # w[i0, i1] = u((Rx)_0, (Rx)_1) with (Rx)_a = signs[a] x_{i_perm[a]},
        # so index u with the sign maps first and transpose if R swaps axes
        src = [idx if signs[a] > 0 else neg for a in range(2)]
        out = u[np.ix_(src[0], src[1])]
        if perm[0] == 1:
            out = out.T
        return out


@dataclass
class FieldState:
    """Samples of (u, d_t u) on a grid at time t."""

    grid: Grid
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self):
        return FieldState(self.grid, self.u.copy(), self.v.copy(), self.t)

    def equivariance_residual(self, generators, taus):
        """Max over generators of || u(Rx) - tau u(x) ||_inf (and for v)."""
        res = 0.0
        for R, tau in zip(generators, taus):
            res = max(
                res,
                float(np.max(np.abs(self.grid.apply_orthogonal(self.u, R) - tau * self.u))),
                float(np.max(np.abs(self.grid.apply_orthogonal(self.v, R) - tau * self.v))),
            )
        return res

    def symmetrize(self, generators, taus):
        """Project onto the symmetry class by group averaging.

        Uses the closure of the supplied generators so the average is an
        exact projection; with only a generating set the unstable
        asymmetric round-off would survive in part.
        """
        mats = [np.eye(self.grid.d)]
        chars = [1.0]
        frontier = [0]
        while frontier:
            nxt = []
            for i in frontier:
                for R, tau in zip(generators, taus):
                    cand = R @ mats[i]
                    if not any(np.abs(cand - m).max() < 1e-10 for m in mats):
                        mats.append(cand)
                        chars.append(tau * chars[i])
                        nxt.append(len(mats) - 1)
            frontier = nxt
        acc_u = np.zeros_like(self.u)
        acc_v = np.zeros_like(self.v)
        for R, tau in zip(mats, chars):
            acc_u += tau * self.grid.apply_orthogonal(self.u, R)
            acc_v += tau * self.grid.apply_orthogonal(self.v, R)
        self.u = acc_u / len(mats)
        self.v = acc_v / len(mats)
        return self
