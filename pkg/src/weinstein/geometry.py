"""Axially symmetric domains, staggered grids, and boundary sampling.

Coordinates are x = (r, y1, ..., yk); axis 0 is the weighted radial
coordinate.  Domains are symmetric under r -> -r and centered on the
axis {r = 0}, so signed distances are evaluated with |r|.

The grid is staggered in r: nodes sit at r_i = (i + 1/2) h, which keeps
every node strictly off the singular axis.  The y lattice is centered on
the domain so that refinement preserves the symmetry of node positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmptyDomain, UnsupportedShape

R_AXIS = 0  # index of the weighted radial coordinate


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Euclidean ball of given radius centered at (0, center) on the axis."""

    radius: float
    center: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def k(self):
        return len(self.center)

    @property
    def smooth_boundary(self):
        return True

    @property
    def r_extent(self):
        return self.radius

    @property
    def y_halfwidth(self):
        return (self.radius,) * self.k

    @property
    def y_center(self):
        return self.center

    def _centered(self, x):
        x = np.asarray(x, dtype=float)
        q = np.empty_like(x)
        q[..., 0] = np.abs(x[..., 0])
        q[..., 1:] = x[..., 1:] - np.asarray(self.center)
        return q

    def signed_distance(self, x):
        q = self._centered(x)
        return np.linalg.norm(q, axis=-1) - self.radius

    def sd_gradient(self, x):
        x = np.asarray(x, dtype=float)
        q = self._centered(x)
        n = np.linalg.norm(q, axis=-1, keepdims=True)
        g = np.divide(q, n, out=np.zeros_like(q), where=n > 0)
        g[..., 0] *= np.sign(x[..., 0])
        return g

    def descriptor(self):
        return {"type": "ball", "radius": self.radius, "center": list(self.center)}


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned ellipsoid sum((x_i - c_i)^2 / s_i^2) = 1, c on the axis.

    semi_axes[0] is the r semi-axis.  The signed distance is the true
    Euclidean distance, found from the first-order conditions for the
    nearest boundary point: p_i = s_i^2 q_i / (s_i^2 + t) with t the root
    of sum((s_i q_i / (s_i^2 + t))^2) = 1 (bisection plus Newton polish).
    Deep inside, past the medial axis where that root can disappear, a
    conservative proxy (1 - |q/s|) * min(s) is used; all boundary-local
    consumers (cut fractions, probes) stay on the exact branch.
    """

    semi_axes: tuple
    center: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "semi_axes", tuple(float(s) for s in self.semi_axes))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.semi_axes) != len(self.center) + 1:
            raise ValueError("need k+1 semi-axes for k center coordinates")
        if any(s <= 0 for s in self.semi_axes):
            raise ValueError("semi-axes must be positive")

    @property
    def k(self):
        return len(self.center)

    @property
    def smooth_boundary(self):
        return True

    @property
    def r_extent(self):
        return self.semi_axes[0]

    @property
    def y_halfwidth(self):
        return self.semi_axes[1:]

    @property
    def y_center(self):
        return self.center

    def _centered(self, x):
        x = np.asarray(x, dtype=float)
        q = np.empty_like(x)
        q[..., 0] = np.abs(x[..., 0])
        q[..., 1:] = x[..., 1:] - np.asarray(self.center)
        return q

    def _nearest(self, q):
        """Nearest boundary point p and 'deep' mask, q already centered."""
        s = np.asarray(self.semi_axes)
        s2 = s * s
        flat = q.reshape(-1, q.shape[-1])
        level = np.sqrt(np.sum((flat / s) ** 2, axis=-1))

        def f(t):
            return np.sum((s * flat / (s2 + t[:, None])) ** 2, axis=-1) - 1.0

        lo = np.full(flat.shape[0], -s2.min() + 1e-14 * s2.min())
        hi = np.linalg.norm(flat, axis=-1) * s.max() + s2.max()
        deep = f(lo) < 0  # no root: inside the evolute
        lo_w, hi_w = lo.copy(), hi.copy()
        for _ in range(80):
            mid = 0.5 * (lo_w + hi_w)
            pos = f(mid) > 0
            lo_w = np.where(pos, mid, lo_w)
            hi_w = np.where(pos, hi_w, mid)
        t = 0.5 * (lo_w + hi_w)
        for _ in range(3):  # Newton polish
            val = f(t)
            der = -2.0 * np.sum(s2 * flat**2 / (s2 + t[:, None]) ** 3, axis=-1)
            step = np.divide(val, der, out=np.zeros_like(val), where=der != 0)
            t_new = t - step
            ok = t_new > lo
            t = np.where(ok, t_new, t)
        p = s2 * flat / (s2 + t[:, None])
        return p.reshape(q.shape), deep.reshape(q.shape[:-1]), level.reshape(q.shape[:-1])

    def signed_distance(self, x):
        q = self._centered(x)
        p, deep, level = self._nearest(q)
        dist = np.linalg.norm(q - p, axis=-1)
        sign = np.where(level >= 1.0, 1.0, -1.0)
        sd = sign * dist
        proxy = -(1.0 - level) * min(self.semi_axes)
        return np.where(deep, proxy, sd)

    def sd_gradient(self, x):
        x = np.asarray(x, dtype=float)
        q = self._centered(x)
        p, deep, level = self._nearest(q)
        s2 = np.asarray(self.semi_axes) ** 2
        d = q - p
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        sign = np.where(level >= 1.0, 1.0, -1.0)[..., None]
        g = np.where(n > 1e-12, sign * np.divide(d, n, out=np.zeros_like(d), where=n > 0), 0.0)
        # on (or numerically at) the surface fall back to the level-set normal
        surf = (n <= 1e-12)[..., 0] | deep
        if np.any(surf):
            ln = p / s2
            lnn = np.linalg.norm(ln, axis=-1, keepdims=True)
            alt = np.divide(ln, lnn, out=np.zeros_like(ln), where=lnn > 0)
            g = np.where(surf[..., None], alt, g)
        g[..., 0] *= np.sign(x[..., 0])
        return g

    def descriptor(self):
        return {
            "type": "ellipsoid",
            "semi_axes": list(self.semi_axes),
            "center": list(self.center),
        }


@dataclass(frozen=True)
class Box:
    """Axis-aligned box |x_i - c_i| <= w_i; boundary has corners, so the
    smooth-boundary experiments reject it while volume quadrature stays exact."""

    half_widths: tuple
    center: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "half_widths", tuple(float(w) for w in self.half_widths))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.half_widths) != len(self.center) + 1:
            raise ValueError("need k+1 half-widths for k center coordinates")
        if any(w <= 0 for w in self.half_widths):
            raise ValueError("half-widths must be positive")

    @property
    def k(self):
        return len(self.center)

    @property
    def smooth_boundary(self):
        return False

    @property
    def r_extent(self):
        return self.half_widths[0]

    @property
    def y_halfwidth(self):
        return self.half_widths[1:]

    @property
    def y_center(self):
        return self.center

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        q = np.empty_like(x)
        q[..., 0] = np.abs(x[..., 0])
        q[..., 1:] = x[..., 1:] - np.asarray(self.center)
        d = np.abs(q) - np.asarray(self.half_widths)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(d.max(axis=-1), 0.0)
        return outside + inside

    def sd_gradient(self, x):
        x = np.asarray(x, dtype=float)
        q = np.empty_like(x)
        q[..., 0] = np.abs(x[..., 0])
        q[..., 1:] = x[..., 1:] - np.asarray(self.center)
        d = np.abs(q) - np.asarray(self.half_widths)
        out = np.maximum(d, 0.0)
        n = np.linalg.norm(out, axis=-1, keepdims=True)
        g = np.where(
            n > 0,
            np.divide(out, n, out=np.zeros_like(out), where=n > 0) * np.sign(q),
            0.0,
        )
        interior = (n[..., 0] == 0)
        if np.any(interior):
            face = np.argmax(d, axis=-1)
            alt = np.zeros_like(g)
            idx = np.indices(face.shape)
            alt[(*idx, face)] = np.sign(q[(*idx, face)])
            g = np.where(interior[..., None], alt, g)
        g[..., 0] *= np.sign(x[..., 0])
        return g

    def descriptor(self):
        return {
            "type": "box",
            "half_widths": list(self.half_widths),
            "center": list(self.center),
        }


# ---------------------------------------------------------------------------
# staggered grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StaggeredGrid:
    """Tensor-product lattice; r nodes at (i + 1/2) h_r, i = 0..n_r-1."""

    h_r: float
    h_y: float
    n_r: int
    n_y: tuple
    y_start: tuple

    def __post_init__(self):
        object.__setattr__(self, "n_y", tuple(int(n) for n in self.n_y))
        object.__setattr__(self, "y_start", tuple(float(y) for y in self.y_start))

    @classmethod
    def from_domain(cls, domain, h, margin_cells=2):
        """Cover the domain with at least margin_cells of slack per side."""
        h = float(h)
        if h <= 0:
            raise ValueError("h must be positive")
        n_r = int(math.floor(domain.r_extent / h + 1e-12)) + margin_cells
        n_y, y_start = [], []
        for c, w in zip(domain.y_center, domain.y_halfwidth):
            half = int(math.floor(w / h + 1e-12)) + margin_cells
            n = 2 * half
            n_y.append(n)
            y_start.append(c - (n - 1) / 2.0 * h)
        return cls(h_r=h, h_y=h, n_r=n_r, n_y=tuple(n_y), y_start=tuple(y_start))

    @property
    def k(self):
        return len(self.n_y)

    @property
    def shape(self):
        return (self.n_r, *self.n_y)

    @property
    def n_nodes(self):
        return int(np.prod(self.shape))

    def r_nodes(self):
        return (np.arange(self.n_r) + 0.5) * self.h_r

    def y_nodes(self, m):
        return self.y_start[m] + np.arange(self.n_y[m]) * self.h_y

    def axes(self):
        return [self.r_nodes()] + [self.y_nodes(m) for m in range(self.k)]

    def node_points(self):
        """All node coordinates, shape (*grid.shape, k+1)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def node_point(self, index):
        ax = self.axes()
        return np.array([ax[d][index[d]] for d in range(self.k + 1)])


# ---------------------------------------------------------------------------
# node classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeClass:
    kind: str  # 'interior' | 'near_boundary' | 'exterior'
    cuts: dict = field(default_factory=dict)  # (axis, dir) -> theta in (0, 1]


_DIRS = (1, -1)


class GridGeometry:
    """Classification of every node of a grid against a domain.

    inside          node strictly inside (sd < 0)
    interior        inside and all 2(k+1) axis neighbors inside
                    (the mirror neighbor across r = 0 counts as inside)
    near            inside with at least one neighbor across the boundary
    cut_theta       {(axis, dir): array}, fraction of the step at which the
                    arm crosses the boundary (bisection to 1e-12), nan if no cut
    volfrac         fraction of each node's cell covered by the domain,
                    from a local planar model of the boundary
    donor_flat      for covered cells whose center is outside: flat index of
                    an adjacent inside node to read field values from (-1: none)
    """

    def __init__(self, domain, grid):
        self.domain = domain
        self.grid = grid
        pts = grid.node_points()
        sd = domain.signed_distance(pts)
        self.sd = sd
        inside = sd < 0.0
        if not inside.any():
            raise EmptyDomain("no grid node lies inside the domain")
        self.inside = inside

        dim = grid.k + 1
        self.cut_theta = {}
        any_cut = np.zeros(grid.shape, dtype=bool)
        for axis in range(dim):
            for direction in _DIRS:
                nb_inside = self._shifted_inside(inside, axis, direction)
                cut = inside & ~nb_inside
                theta = np.full(grid.shape, np.nan)
                if cut.any():
                    theta[cut] = self._bisect_theta(pts[cut], axis, direction)
                self.cut_theta[(axis, direction)] = theta
                any_cut |= cut
        self.near = inside & any_cut
        self.interior = inside & ~any_cut

        # no inside node may touch the lattice edge (except across r = 0,
        # where reflection supplies the neighbor)
        edge = np.zeros(grid.shape, dtype=bool)
        for axis in range(dim):
            sl_hi = [slice(None)] * dim
            sl_hi[axis] = -1
            edge[tuple(sl_hi)] = True
            if axis != R_AXIS:
                sl_lo = [slice(None)] * dim
                sl_lo[axis] = 0
                edge[tuple(sl_lo)] = True
        if (inside & edge).any():
            raise EmptyDomain("domain touches the lattice edge; margin too small")

        self._build_volume_fractions(pts, sd)

    def _shifted_inside(self, inside, axis, direction):
        """Inside mask of the neighbor one step along (axis, direction)."""
        dim = inside.ndim
        nb = np.zeros_like(inside)
        src = [slice(None)] * dim
        dst = [slice(None)] * dim
        if direction == 1:
            dst[axis] = slice(0, -1)
            src[axis] = slice(1, None)
        else:
            dst[axis] = slice(1, None)
            src[axis] = slice(0, -1)
        nb[tuple(dst)] = inside[tuple(src)]
        if axis == R_AXIS and direction == -1:
            first = [slice(None)] * dim
            first[axis] = 0
            nb[tuple(first)] = inside[tuple(first)]  # mirror across r = 0
        return nb

    def _bisect_theta(self, points, axis, direction):
        h = self.grid.h_r if axis == R_AXIS else self.grid.h_y
        step = np.zeros(points.shape[-1])
        step[axis] = direction * h
        lo = np.zeros(points.shape[0])
        hi = np.ones(points.shape[0])
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            sd = self.domain.signed_distance(points + mid[:, None] * step)
            neg = sd < 0.0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
        return 0.5 * (lo + hi)

    def _build_volume_fractions(self, pts, sd):
        grid, domain = self.grid, self.domain
        dim = grid.k + 1
        h = grid.h_r
        half_diag = 0.5 * h * math.sqrt(dim)
        band = np.abs(sd) <= half_diag * 1.0001
        frac = np.where(sd < 0, 1.0, 0.0)
        if band.any():
            centers = pts[band]
            if isinstance(domain, Box):
                frac_band = _box_cell_overlap(domain, centers, h)
            else:
                normals = domain.sd_gradient(centers)
                frac_band = _halfspace_cell_fraction(normals, sd[band], h)
            frac[band] = frac_band
        self.volfrac = frac

        covered_out = (frac > 0) & ~self.inside
        donor = np.full(grid.shape, -1, dtype=np.int64)
        if covered_out.any():
            idx = np.argwhere(covered_out)
            normals = domain.sd_gradient(pts[covered_out])
            flat_strides = np.array(
                [int(np.prod(grid.shape[d + 1 :], dtype=np.int64)) for d in range(dim)]
            )
            for row, n_vec in zip(idx, normals):
                order = np.argsort(-np.abs(n_vec))
                found = -1
                for d in order:
                    step = -1 if n_vec[d] > 0 else 1
                    nb = row.copy()
                    nb[d] += step
                    if 0 <= nb[d] < grid.shape[d] and self.inside[tuple(nb)]:
                        found = int(np.dot(nb, flat_strides))
                        break
                donor[tuple(row)] = found
        self.donor_flat = donor

    def node_class(self, index):
        index = tuple(index)
        if not self.inside[index]:
            return NodeClass("exterior")
        cuts = {}
        for key, theta in self.cut_theta.items():
            t = theta[index]
            if np.isfinite(t):
                cuts[key] = float(t)
        if cuts:
            return NodeClass("near_boundary", cuts)
        return NodeClass("interior")


def _halfspace_cell_fraction(normals, sd, h):
    """Fraction of the cube [-h/2, h/2]^d lying in {x : n.x <= -sd}.

    Exact for a planar boundary; the standard inclusion-exclusion formula
    vol{x in [0,1]^d : sum m_i x_i <= c} =
        sum_S (-1)^|S| max(0, c - sum_{i in S} m_i)^d / (d! prod m_i).
    """
    m = normals * h
    # on the unit cube, after reflecting negative axes, the offset becomes
    c = -sd + 0.5 * np.abs(m).sum(axis=-1)
    m = np.abs(m)
    scale = m.sum(axis=-1)
    scale = np.where(scale > 0, scale, 1.0)
    out = np.empty(m.shape[0])
    # drop negligible axes per point (plane parallel to those axes)
    d_full = m.shape[-1]
    signif = m > 1e-12 * scale[:, None]
    n_sig = signif.sum(axis=-1)
    for d_eff in range(0, d_full + 1):
        sel = n_sig == d_eff
        if not sel.any():
            continue
        if d_eff == 0:
            out[sel] = (c[sel] >= 0).astype(float)
            continue
        ms = m[sel]
        cs = c[sel]
        sig = signif[sel]
        # compact the significant coefficients into shape (n, d_eff)
        mm = ms[sig].reshape(-1, d_eff)
        total = np.zeros(mm.shape[0])
        for bits in range(1 << d_eff):
            subset = np.array([(bits >> j) & 1 for j in range(d_eff)], dtype=bool)
            ssum = mm[:, subset].sum(axis=-1) if subset.any() else 0.0
            term = np.maximum(0.0, cs - ssum) ** d_eff
            total += term if (bin(bits).count("1") % 2 == 0) else -term
        denom = math.factorial(d_eff) * np.prod(mm, axis=-1)
        out[sel] = total / denom
    return np.clip(out, 0.0, 1.0)


def _box_cell_overlap(domain, centers, h):
    """Exact covered fraction of cells against an axis-aligned box."""
    lo = np.array([0.0, *domain.center]) - np.array(domain.half_widths)
    hi = np.array([0.0, *domain.center]) + np.array(domain.half_widths)
    lo[0] = -domain.half_widths[0]
    hi[0] = domain.half_widths[0]
    a = centers - h / 2.0
    b = centers + h / 2.0
    # the physical region r < 0 mirrors into r > 0; the box covers |r| <= w_r
    overlap = np.minimum(b, hi) - np.maximum(a, lo)
    overlap = np.clip(overlap, 0.0, h)
    return np.prod(overlap / h, axis=-1)


_GEOMETRY_CACHE = {}


def grid_geometry(domain, grid) -> GridGeometry:
    key = (domain, grid)
    geo = _GEOMETRY_CACHE.get(key)
    if geo is None:
        geo = GridGeometry(domain, grid)
        if len(_GEOMETRY_CACHE) > 16:
            _GEOMETRY_CACHE.clear()
        _GEOMETRY_CACHE[key] = geo
    return geo


def classify_node(domain, grid, index) -> NodeClass:
    """Classify one node: interior, near-boundary (with arm cut fractions),
    or exterior."""
    return grid_geometry(domain, grid).node_class(index)


# ---------------------------------------------------------------------------
# sphere lattices and boundary samples
# ---------------------------------------------------------------------------


def sphere_area(k):
    """Unweighted area of the unit sphere S^k in R^(k+1)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


def sphere_lattice(k, count):
    """Deterministic quasi-uniform lattice on S^k in R^(k+1).

    Returns (points, weight) with a single scalar weight = area / count.
    k = 1: midpoint angles; k = 2: Fibonacci spiral; k = 3: super-Fibonacci.
    Coordinate 0 is the one aligned with the r axis downstream.
    """
    count = int(count)
    if count < 1:
        raise ValueError("count must be positive")
    if k == 1:
        theta = 2.0 * math.pi * (np.arange(count) + 0.5) / count
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    elif k == 2:
        i = np.arange(count)
        z = 1.0 - (2.0 * i + 1.0) / count
        phi = i * math.pi * (3.0 - math.sqrt(5.0))
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        pts = np.stack([z, rho * np.cos(phi), rho * np.sin(phi)], axis=-1)
    elif k == 3:
        # super-Fibonacci spiral on S^3
        i = np.arange(count)
        s = (i + 0.5) / count
        rr = np.sqrt(s)
        cc = np.sqrt(1.0 - s)
        alpha = 2.0 * math.pi * i / math.sqrt(2.0)
        beta = 2.0 * math.pi * i / 1.5337511687552043
        pts = np.stack(
            [rr * np.sin(alpha), rr * np.cos(alpha), cc * np.sin(beta), cc * np.cos(beta)],
            axis=-1,
        )
    else:
        raise UnsupportedShape(f"sphere quadrature implemented for k in 1..3, got k={k}")
    return pts, sphere_area(k) / count


@dataclass(frozen=True)
class BoundarySamples:
    points: np.ndarray  # (M, k+1), on the r > 0 part of the boundary
    normals: np.ndarray  # outward unit normals
    weights: np.ndarray  # unweighted surface weights, sum ~ area of Sigma


def boundary_samples(domain, count) -> BoundarySamples:
    """Quadrature points on Sigma = boundary ∩ {r > 0} with outward normals.

    Built by pushing a sphere lattice through the affine map of the shape;
    weights carry the exact area Jacobian det(S) |S^{-1} w|, so they sum to
    the unweighted area of Sigma up to lattice discretization error.
    """
    if isinstance(domain, Ball):
        semi = np.full(domain.k + 1, domain.radius)
    elif isinstance(domain, Ellipsoid):
        semi = np.array(domain.semi_axes)
    else:
        raise UnsupportedShape(
            "boundary sampling needs a smooth shape (ball or ellipsoid), "
            f"got {type(domain).__name__}"
        )
    k = domain.k
    omegas, w0 = sphere_lattice(k, 2 * int(count))
    keep = omegas[:, 0] > 0.0
    omegas = omegas[keep]
    center = np.array([0.0, *domain.y_center])
    points = center + omegas * semi
    # normal of the level set sum(q_i^2/s_i^2): q_i / s_i^2, normalized
    ln = omegas / semi
    normals = ln / np.linalg.norm(ln, axis=-1, keepdims=True)
    jac = np.prod(semi) * np.linalg.norm(omegas / semi, axis=-1)
    weights = w0 * jac
    return BoundarySamples(points=points, normals=normals, weights=weights)
