"""Rigid signed configurations: regular polytopes, sign equivariance, gamma.

A configuration is a finite vertex set (possibly including the center 0),
signs sigma in {+1, -1}, and a finite group of orthogonal matrices acting on
the vertices with sign character tau.  The shape identity evaluated with
unit difference vectors,

    S(w) = sigma_w * sum over nearest neighbours v of sigma_v (w - v)/|w - v|,

must be parallel to w with a common scalar; gamma is stored with the
repulsion-positive convention (gamma = -mu where S(w) = mu * w/|w| on the
unit-circumradius normalisation), which reproduces the catalogued values
2 sin(pi/2K) for alternating 2K-gons, sqrt(K) for alternating hypercubes
and 1 for the centered polytopes.  The literal scalar with unnormalised
differences is kept as gamma_raw; on unit-circumradius configurations it is
gamma / lambda_omega and is exactly the coefficient of the reduced
expansion law  r' = (gamma_raw / 2 alpha) g(r),  so the dynamics modules
consume gamma_raw.
"""

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooSmall, InvalidParams, RankDeficient, UnknownName

__all__ = [
    "SignedConfiguration",
    "ValidationReport",
    "build_catalog",
    "validate",
    "similarity_extract",
    "corollary_table",
    "CATALOG_NAMES",
    "save_configuration",
]

_KEY_DECIMALS = 9


def _rot(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _embed(mat, d):
    n = mat.shape[0]
    if n == d:
        return mat.copy()
    out = np.eye(d)
    out[:n, :n] = mat
    return out


def _closure(generators, taus, cap=2000):
    """Group closure with the sign character carried along each product.

    Elements are matched by tolerance (matrix products drift at round-off,
    so exact hashing would keep minting duplicates).
    """
    d = generators[0].shape[0]
    elems = [np.eye(d)]
    chars = [1.0]

    def find(mat):
        for i, e in enumerate(elems):
            if np.abs(mat - e).max() < 1e-8:
                return i
        return -1

    frontier = [0]
    gen_pairs = list(zip(generators, taus))
    while frontier:
        new_frontier = []
        for idx in frontier:
            for g, tg in gen_pairs:
                prod = g @ elems[idx]
                j = find(prod)
                if j >= 0:
                    if abs(chars[j] - tg * chars[idx]) > 1e-6:
                        raise InvalidParams("sign character is not a homomorphism")
                    continue
                elems.append(prod)
                chars.append(tg * chars[idx])
                new_frontier.append(len(elems) - 1)
                if len(elems) > cap:
                    raise InvalidParams("group closure exceeded the element cap")
        frontier = new_frontier
    return elems, chars


@dataclass
class SignedConfiguration:
    """Vertex set with signs, symmetry group, and shape constants."""

    name: str
    dim: int
    vertices: np.ndarray  # (n, dim)
    signs: np.ndarray  # (n,)
    generators: list  # orthogonal matrices
    gen_taus: list  # sign character of each generator
    gamma: float = 0.0
    gamma_raw: float = 0.0
    lambda_omega: float = 0.0
    theta_ratio: float = math.inf
    neighbour_sets: list = field(default_factory=list)
    admissible: bool = False
    parallel_residual: float = 0.0
    center_index: int = None
    metadata: dict = field(default_factory=dict)
    group_elements: list = field(default=None, repr=False)
    group_taus: list = field(default=None, repr=False)
    group_perms: list = field(default=None, repr=False)

    @property
    def size(self):
        return self.vertices.shape[0]

    @property
    def gamma_dyn(self):
        """Coefficient of the scalar expansion law r' = (gamma_dyn/2a) g(r)."""
        return self.gamma_raw

    def finalize(self):
        """Build group closure, per-element vertex permutations and shells."""
        self.group_elements, self.group_taus = _closure(self.generators, self.gen_taus)
        self.group_perms = [self._vertex_perm(g) for g in self.group_elements]
        self._neighbour_shells()
        self._shape_constants()
        return self

    def _vertex_perm(self, g):
        img = self.vertices @ g.T
        perm = np.empty(self.size, dtype=int)
        for i in range(self.size):
            dist = np.linalg.norm(self.vertices - img[i], axis=1)
            j = int(np.argmin(dist))
            if dist[j] > 1e-8:
                raise InvalidParams(
                    f"{self.name}: group element does not permute the vertices"
                )
            perm[i] = j
        if len(set(perm.tolist())) != self.size:
            raise InvalidParams(f"{self.name}: vertex permutation not one-to-one")
        return perm

    def _neighbour_shells(self, rel_tol=1e-9):
        v = self.vertices
        n = self.size
        diff = v[:, None, :] - v[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        self._dist = dist
        shells = []
        for i in range(n):
            dmin = dist[i].min()
            shells.append(np.nonzero(dist[i] <= dmin * (1.0 + rel_tol))[0])
        self.neighbour_sets = shells
        non_center = [i for i in range(n) if i != self.center_index]
        d_nn = min(dist[i].min() for i in non_center)
        self.lambda_omega = 1.0 / d_nn
        ratios = []
        for i in non_center:
            dmin = dist[i].min()
            far = np.setdiff1d(np.arange(n), np.append(self.neighbour_sets[i], i))
            if far.size:
                ratios.append(dist[i][far].min() / dmin)
        self.theta_ratio = min(ratios) if ratios else math.inf

    def _shape_constants(self):
        v = self.vertices
        mus, mus_raw, perp = [], [], 0.0
        for i in range(self.size):
            if i == self.center_index:
                continue
            w = v[i]
            nw = np.linalg.norm(w)
            s_norm = np.zeros(self.dim)
            s_raw = np.zeros(self.dim)
            for j in self.neighbour_sets[i]:
                dv = w - v[j]
                s_raw += self.signs[j] * dv
                s_norm += self.signs[j] * dv / np.linalg.norm(dv)
            s_norm *= self.signs[i]
            s_raw *= self.signs[i]
            mu = float(s_norm @ (w / nw))
            perp = max(perp, float(np.linalg.norm(s_norm - mu * w / nw)))
            mus.append(mu)
            mus_raw.append(float(s_raw @ w) / nw**2)
        spread = max(mus) - min(mus) if mus else 0.0
        self.parallel_residual = max(perp, spread)
        self.gamma = -float(np.mean(mus))
        self.gamma_raw = -float(np.mean(mus_raw))
        self.admissible = self.gamma > 1e-12 and self.parallel_residual < 1e-8


def _polygon_center(n_sides, d, name):
    if d < 2:
        raise DimensionTooSmall(f"{name} needs d >= 2")
    ang = 2.0 * math.pi * np.arange(n_sides) / n_sides
    verts = np.zeros((n_sides + 1, d))
    verts[:-1, 0] = np.cos(ang)
    verts[:-1, 1] = np.sin(ang)
    signs = np.ones(n_sides + 1)
    signs[-1] = -1.0
    c, s = math.cos(2 * math.pi / n_sides), math.sin(2 * math.pi / n_sides)
    rot = _embed(np.array([[c, -s], [s, c]]), d)
    refl = _embed(np.diag([1.0, -1.0]), d)
    return SignedConfiguration(
        name=name,
        dim=d,
        vertices=verts,
        signs=signs,
        generators=[rot, refl],
        gen_taus=[1.0, 1.0],
        center_index=n_sides,
    )


def _polygon_alternating(n_sides, d, name):
    if n_sides < 2 or n_sides % 2:
        raise InvalidParams("alternating polygons need an even vertex count >= 2")
    if d < 2:
        raise DimensionTooSmall(f"{name} needs d >= 2")
    ang = 2.0 * math.pi * np.arange(n_sides) / n_sides
    verts = np.zeros((n_sides, d))
    verts[:, 0] = np.cos(ang)
    verts[:, 1] = np.sin(ang)
    signs = np.where(np.arange(n_sides) % 2 == 0, 1.0, -1.0)
    c, s = math.cos(2 * math.pi / n_sides), math.sin(2 * math.pi / n_sides)
    rot = _embed(np.array([[c, -s], [s, c]]), d)
    refl = _embed(np.diag([1.0, -1.0]), d)
    return SignedConfiguration(
        name=name,
        dim=d,
        vertices=verts,
        signs=signs,
        generators=[rot, refl],
        gen_taus=[-1.0, 1.0],
    )


_TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)


def _poly3d(kind, d, name):
    if d < 3:
        raise DimensionTooSmall(f"{name} needs d >= 3")
    cyc = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    if kind == "tetrahedron":
        verts3 = _TETRA
        gens3 = [cyc, np.diag([-1.0, -1.0, 1.0])]
    elif kind == "octahedron":
        verts3 = np.vstack([np.eye(3), -np.eye(3)])
        gens3 = [cyc, np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])]
    elif kind == "cube":
        verts3 = (
            np.array([[sx, sy, sz] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)])
            / math.sqrt(3)
        )
        gens3 = [cyc, np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])]
    elif kind in ("icosahedron", "dodecahedron"):
        phi = (1.0 + math.sqrt(5.0)) / 2.0
        if kind == "icosahedron":
            base = [(0.0, s1, s2 * phi) for s1 in (1, -1) for s2 in (1, -1)]
        else:
            # dual orientation of the icosahedron above: cube corners plus
            # cyclic permutations of (0, +-phi, +-1/phi)
            base = [
                (s1 * 1.0, s2 * 1.0, s3 * 1.0)
                for s1 in (1, -1)
                for s2 in (1, -1)
                for s3 in (1, -1)
            ] + [(0.0, s1 * phi, s2 / phi) for s1 in (1, -1) for s2 in (1, -1)]
        pts = []
        for b in base:
            b = np.array(b)
            for _ in range(3):
                b = np.roll(b, 1)
                if not any(np.allclose(b, q) for q in pts):
                    pts.append(b.copy())
        verts3 = np.array(pts)
        verts3 = verts3 / np.linalg.norm(verts3[0])
        # the 5-fold axes of the icosahedral group pass through icosahedron
        # vertices, i.e. dodecahedron face centers
        gens3 = [cyc, _rot(np.array([0.0, 1.0, phi]), 2.0 * math.pi / 5.0)]
    else:  # pragma: no cover
        raise UnknownName(kind)
    n = verts3.shape[0]
    verts = np.zeros((n + 1, d))
    verts[:-1, :3] = verts3
    signs = np.ones(n + 1)
    signs[-1] = -1.0
    return SignedConfiguration(
        name=name,
        dim=d,
        vertices=verts,
        signs=signs,
        generators=[_embed(g, d) for g in gens3],
        gen_taus=[1.0] * len(gens3),
        center_index=n,
    )


def _simplex_center(d, name):
    if d < 1:
        raise DimensionTooSmall("simplex needs d >= 1")
    m = d + 1
    centered = np.eye(m) - np.full((m, m), 1.0 / m)
    # orthonormal basis of the hyperplane sum(x) = 0
    u, s, vt = np.linalg.svd(centered)
    basis = vt[:d]  # (d, m)
    verts_d = centered @ basis.T
    verts_d /= np.linalg.norm(verts_d[0])
    verts = np.vstack([verts_d, np.zeros(d)])
    signs = np.ones(m + 1)
    signs[-1] = -1.0

    def perm_matrix(perm):
        pm = np.zeros((m, m))
        for i, j in enumerate(perm):
            pm[j, i] = 1.0
        return basis @ pm @ basis.T

    swap = list(range(m))
    swap[0], swap[1] = 1, 0
    cycle = list(range(1, m)) + [0]
    return SignedConfiguration(
        name=name,
        dim=d,
        vertices=verts,
        signs=signs,
        generators=[perm_matrix(swap), perm_matrix(cycle)],
        gen_taus=[1.0, 1.0],
        center_index=m,
    )


def _orthoplex_center(d, name):
    if d < 2:
        raise DimensionTooSmall("orthoplex needs d >= 2")
    verts = np.vstack([np.eye(d), -np.eye(d), np.zeros(d)])
    signs = np.ones(2 * d + 1)
    signs[-1] = -1.0
    cycle = np.roll(np.eye(d), 1, axis=0)
    swap = np.eye(d)
    swap[[0, 1]] = swap[[1, 0]]
    flip = np.diag([-1.0] + [1.0] * (d - 1))
    return SignedConfiguration(
        name=name,
        dim=d,
        vertices=verts,
        signs=signs,
        generators=[cycle, swap, flip],
        gen_taus=[1.0, 1.0, 1.0],
        center_index=2 * d,
    )


def _hypercube_alternating(k, d, name):
    if d < k:
        raise DimensionTooSmall(f"hypercube of dimension {k} needs d >= {k}")
    n = 2**k
    verts = np.zeros((n, d))
    signs = np.empty(n)
    for i in range(n):
        bits = [(1.0 if (i >> b) & 1 == 0 else -1.0) for b in range(k)]
        verts[i, :k] = bits
        signs[i] = float(np.prod(bits))
    verts /= math.sqrt(k)
    gens, taus = [], []
    if k >= 2:
        # coordinate permutations leave the product sign invariant
        swap = np.eye(k)
        swap[[0, 1]] = swap[[1, 0]]
        gens.append(_embed(swap, d))
        taus.append(1.0)
        cycle = np.roll(np.eye(k), 1, axis=0)
        gens.append(_embed(cycle, d))
        taus.append(1.0)
    flip = np.diag([-1.0] + [1.0] * (k - 1))
    gens.append(_embed(flip, d))
    taus.append(-1.0)
    cfg = SignedConfiguration(
        name=name,
        dim=d,
        vertices=verts,
        signs=signs,
        generators=gens,
        gen_taus=taus,
    )
    cfg.metadata["paper_lambda_omega"] = 2.0 / math.sqrt(k)
    cfg.metadata["lambda_note"] = (
        "1/min-distance on the unit-circumradius normalisation is sqrt(K)/2; "
        "the catalogued 2/sqrt(K) is the minimal distance itself"
    )
    return cfg


CATALOG_NAMES = [
    "pair",
    "triangle_center",
    "square_center",
    "pentagon_center",
    "hexagon_center",
    "tetrahedron_center",
    "octahedron_center",
    "cube_center",
    "icosahedron_center",
    "dodecahedron_center",
    "simplex_center",
    "orthoplex_center",
    "polygon_alternating",
    "hypercube_alternating",
]


def build_catalog(name, d=None, size=None):
    """Construct a catalogued configuration on the unit circumradius.

    Parametrised families accept the vertex count via ``size`` or a
    bracketed suffix, e.g. ``polygon_alternating(8)`` for the alternating
    octagon or ``hypercube_alternating(3)`` for the signed cube.  ``pair``
    is shorthand for ``hypercube_alternating(1)``: two opposite-sign
    solitons at distance 2/sqrt(1) = 2 before rescaling.
    """
    m = re.fullmatch(r"([a-z_]+)\((\d+)\)", name.strip())
    if m:
        name, size = m.group(1), int(m.group(2))
    if name == "pair":
        name, size = "hypercube_alternating", 1
    polygons = {"triangle_center": 3, "square_center": 4, "pentagon_center": 5,
                "hexagon_center": 6}
    if name in polygons:
        cfg = _polygon_center(polygons[name], d or 2, name)
    elif name in ("tetrahedron_center", "octahedron_center", "cube_center",
                  "icosahedron_center", "dodecahedron_center"):
        cfg = _poly3d(name.replace("_center", ""), d or 3, name)
    elif name == "simplex_center":
        if size is None and d is None:
            raise InvalidParams("simplex_center needs d")
        cfg = _simplex_center(d or size, name)
    elif name == "orthoplex_center":
        if d is None:
            raise InvalidParams("orthoplex_center needs d")
        cfg = _orthoplex_center(d, name)
    elif name == "polygon_alternating":
        if size is None:
            raise InvalidParams("polygon_alternating needs the vertex count")
        cfg = _polygon_alternating(size, d or 2, f"polygon_alternating({size})")
    elif name == "hypercube_alternating":
        if size is None:
            raise InvalidParams("hypercube_alternating needs the dimension K")
        cfg = _hypercube_alternating(size, d or size, f"hypercube_alternating({size})")
    else:
        raise UnknownName(f"unknown configuration name: {name}")
    cfg.finalize()
    com = np.linalg.norm(cfg.vertices.sum(axis=0))
    if com > 1e-12:
        raise InvalidParams(f"{name}: center of mass {com:.2e} is not zero")
    return cfg


@dataclass
class ValidationReport:
    name: str
    equivariance_ok: bool
    equivariance_residual: float
    sign_equivariance_ok: bool
    parallel_residual: float
    gamma: float
    gamma_raw: float
    lambda_omega: float
    theta_ratio: float
    center_of_mass: float
    admissible: bool

    def as_dict(self):
        return {
            k: (bool(v) if isinstance(v, (bool, np.bool_)) else v)
            for k, v in self.__dict__.items()
        }


def validate(config):
    """Equivariance, parallelism and admissibility diagnostics (never raises)."""
    v = config.vertices
    geo_res, sign_ok = 0.0, True
    for g, tau, perm in zip(
        config.group_elements, config.group_taus, config.group_perms
    ):
        geo_res = max(geo_res, float(np.max(np.linalg.norm(v @ g.T - v[perm], axis=1))))
        if not np.allclose(config.signs[perm], tau * config.signs, atol=1e-12):
            sign_ok = False
    return ValidationReport(
        name=config.name,
        equivariance_ok=geo_res <= 1e-12,
        equivariance_residual=geo_res,
        sign_equivariance_ok=sign_ok,
        parallel_residual=config.parallel_residual,
        gamma=config.gamma,
        gamma_raw=config.gamma_raw,
        lambda_omega=config.lambda_omega,
        theta_ratio=config.theta_ratio,
        center_of_mass=float(np.linalg.norm(v.sum(axis=0))),
        admissible=bool(config.admissible and sign_ok and geo_res <= 1e-10),
    )


def similarity_extract(config, points, allow_degenerate=False):
    """Least-squares similarity fit  points ~ lam * R * vertices + tau.

    Returns (lam, R, tau, residual).  R ranges over the full orthogonal
    group (the symmetry groups here may contain reflections).  A vertex set
    spanning less than two dimensions leaves the rotation under-determined;
    that raises RankDeficient unless allow_degenerate, in which case R acts
    as the identity on the unresolved complement.
    """
    x = np.asarray(config.vertices, dtype=float)
    y = np.asarray(points, dtype=float)
    if y.shape != x.shape:
        raise InvalidParams("points must match the vertex set cardinality")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    m = yc.T @ xc
    u, s, vt = np.linalg.svd(m)
    rank = int(np.sum(s > 1e-12 * max(s[0], 1e-300)))
    if rank < min(2, config.dim) and not allow_degenerate:
        raise RankDeficient(
            f"vertex span has rank {rank}; rotation determined only up to "
            "the stabiliser of a line"
        )
    r_fit = u @ vt
    denom = float((xc**2).sum())
    lam = float(s.sum()) / denom
    tau = y.mean(axis=0) - lam * r_fit @ x.mean(axis=0)
    resid = float(np.linalg.norm(lam * xc @ r_fit.T - yc))
    return lam, r_fit, tau, resid


def corollary_table(d_max=5):
    """Gamma/lambda table over the whole catalogue (admissible and rejected)."""
    rows = []
    entries = [
        ("triangle_center", None, None),
        ("square_center", None, None),
        ("pentagon_center", None, None),
        ("hexagon_center", None, None),
        ("tetrahedron_center", None, None),
        ("octahedron_center", None, None),
        ("cube_center", None, None),
        ("icosahedron_center", None, None),
        ("dodecahedron_center", None, None),
        ("simplex_center", 3, None),
        ("simplex_center", 4, None),
        ("orthoplex_center", 3, None),
        ("orthoplex_center", 4, None),
        ("polygon_alternating", None, 4),
        ("polygon_alternating", None, 6),
        ("polygon_alternating", None, 8),
        ("polygon_alternating", None, 10),
        ("polygon_alternating", None, 12),
        ("hypercube_alternating", None, 1),
        ("hypercube_alternating", None, 2),
        ("hypercube_alternating", None, 3),
        ("hypercube_alternating", None, 4),
    ]
    for name, d, size in entries:
        cfg = build_catalog(name, d=d, size=size)
        rep = validate(cfg)
        label = cfg.name if d is None else f"{cfg.name}(d={d})"
        rows.append(
            {
                "name": label,
                "n_vertices": cfg.size,
                "gamma": rep.gamma,
                "gamma_raw": rep.gamma_raw,
                "lambda_omega": rep.lambda_omega,
                "theta_ratio": rep.theta_ratio,
                "admissible": rep.admissible,
            }
        )
    return rows


def save_configuration(config, path):
    payload = {
        "name": config.name,
        "dim": config.dim,
        "vertices": config.vertices.tolist(),
        "signs": config.signs.tolist(),
        "generators": [g.tolist() for g in config.generators],
        "gen_taus": list(config.gen_taus),
        "gamma": config.gamma,
        "gamma_raw": config.gamma_raw,
        "lambda_omega": config.lambda_omega,
        "theta_ratio": config.theta_ratio if math.isfinite(config.theta_ratio) else None,
        "admissible": bool(config.admissible),
        "center_index": config.center_index,
        "metadata": config.metadata,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
