"""Finite-difference discretization of the Weinstein operator

    L_a u = u_rr + (a/r) u_r + Delta_y u.

Interior rows use the conservative flux form

    (B_a u)_i = [ (r_face+)^a (u_{i+1}-u_i)/h - (r_face-)^a (u_i-u_{i-1})/h ] / V_i

with the exact weighted cell measure V_i = int_cell r^a dr.  With that
measure the scheme is exact on even quadratics at every node, including
the axis cell, where the inward face weight (r = 0)^a vanishes and the
even reflection u_{-1} = u_0 kills the a = 0 remainder; both readings
implement the same zero weighted flux through the axis.

Rows whose arms cross the boundary switch to the nondivergence form with
3-point unequal-arm (Shortley-Weller) stencils and the Dirichlet value at
the cut point.  Interior rows are symmetric in the weighted inner product
<u, v> = sum u v V_i h^k; cut rows are not, which is why the solver probes
symmetry instead of assuming it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GridTooCoarse, MissingBoundaryData, StencilLeavesDomain, UnsupportedShape
from .field import ScalarField
from .geometry import R_AXIS, boundary_samples, grid_geometry
from .measure import r_cell_measure


# ---------------------------------------------------------------------------
# stencil construction
# ---------------------------------------------------------------------------


class _Stencil:
    """Matrix + boundary-coupling of L_a on the active nodes of a grid."""

    def __init__(self, domain, grid, params):
        geo = grid_geometry(domain, grid)
        dim = grid.k + 1
        shape = grid.shape
        n_nodes = grid.n_nodes

        flat_active = np.flatnonzero(geo.inside.reshape(-1))
        n_active = flat_active.size
        row_of = np.full(n_nodes, -1, dtype=np.int64)
        row_of[flat_active] = np.arange(n_active)

        strides = np.array(
            [int(np.prod(shape[d + 1 :], dtype=np.int64)) for d in range(dim)], dtype=np.int64
        )

        h = grid.h_r
        a = params.a
        m_r = r_cell_measure(grid, params)
        face = (np.arange(grid.n_r + 1) * h) ** a
        c_plus = face[1:] / (h * m_r)
        c_minus = face[:-1] / (h * m_r)
        c_minus[0] = 0.0  # zero weighted flux through r = 0 (reflection)
        hy2 = grid.h_y**2

        rows, cols, vals = [], [], []
        # interior rows: flux form, vectorized
        idx = np.argwhere(geo.interior)
        if idx.size:
            flat = idx @ strides
            r_i = idx[:, 0]
            diag = -(c_plus[r_i] + c_minus[r_i]) - 2.0 * grid.k / hy2
            rows.append(row_of[flat])
            cols.append(row_of[flat])
            vals.append(diag)

            nb = flat + strides[0]
            rows.append(row_of[flat])
            cols.append(row_of[nb])
            vals.append(c_plus[r_i])

            has_minus = r_i > 0
            nb = flat[has_minus] - strides[0]
            rows.append(row_of[flat[has_minus]])
            cols.append(row_of[nb])
            vals.append(c_minus[r_i[has_minus]])

            for m in range(grid.k):
                for direction in (1, -1):
                    nb = flat + direction * strides[1 + m]
                    rows.append(row_of[flat])
                    cols.append(row_of[nb])
                    vals.append(np.full(flat.shape, 1.0 / hy2))

        # near-boundary rows: nondivergence Shortley-Weller, per node
        bc_rows, bc_coeffs, bc_points = [], [], []
        near_idx = np.argwhere(geo.near)
        node_pts = grid.node_points()
        for node in near_idx:
            node_t = tuple(node)
            flat = int(node @ strides)
            row = row_of[flat]
            pt = node_pts[node_t]
            diag = 0.0
            for axis in range(dim):
                step = h if axis == R_AXIS else grid.h_y
                arm = {}
                for direction in (1, -1):
                    theta = geo.cut_theta[(axis, direction)][node_t]
                    if np.isfinite(theta):
                        cut_pt = pt.copy()
                        cut_pt[axis] += direction * theta * step
                        arm[direction] = (max(theta, 1e-6) * step, ("bc", cut_pt))
                    elif axis == R_AXIS and direction == -1 and node[0] == 0:
                        arm[direction] = (step, ("ghost", None))
                    else:
                        nb = node.copy()
                        nb[axis] += direction
                        arm[direction] = (step, ("node", int(nb @ strides)))
                hp, src_p = arm[1]
                hm, src_m = arm[-1]
                den = hm * hp * (hm + hp)
                c_m = 2.0 * hp / den
                c_p = 2.0 * hm / den
                c_0 = -2.0 * (hm + hp) / den
                if axis == R_AXIS:
                    ar = a / pt[0]
                    c_m += ar * (-(hp**2) / den)
                    c_p += ar * (hm**2 / den)
                    c_0 += ar * ((hp**2 - hm**2) / den)
                diag += c_0
                for coeff, (kind, payload) in ((c_m, src_m), (c_p, src_p)):
                    if kind == "node":
                        rows.append(np.array([row]))
                        cols.append(np.array([row_of[payload]]))
                        vals.append(np.array([coeff]))
                    elif kind == "bc":
                        bc_rows.append(row)
                        bc_coeffs.append(coeff)
                        bc_points.append(payload)
                    else:  # ghost across r = 0: value u_0 folds into the diagonal
                        diag += coeff
            rows.append(np.array([row]))
            cols.append(np.array([row]))
            vals.append(np.array([diag]))

        rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
        vals = np.concatenate(vals) if vals else np.zeros(0)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(n_active, n_active)).tocsr()

        self.domain = domain
        self.grid = grid
        self.params = params
        self.geometry = geo
        self.A = A
        self.row_of = row_of
        self.flat_active = flat_active
        self.n_active = n_active
        self.bc_rows = np.array(bc_rows, dtype=np.int64)
        self.bc_coeffs = np.array(bc_coeffs)
        self.bc_points = (
            np.array(bc_points) if bc_points else np.zeros((0, dim))
        )
        # weighted inner-product measure of the scheme (per active node)
        cw = (m_r.reshape((-1,) + (1,) * grid.k) * grid.h_y**grid.k) * np.ones(shape)
        self.cell_weights = cw.reshape(-1)[flat_active]

    def bc_vector(self, dirichlet):
        """Accumulated boundary contributions coeff * g(cut point) per row."""
        out = np.zeros(self.n_active)
        if self.bc_rows.size == 0:
            return out
        if dirichlet is None:
            raise MissingBoundaryData("stencil touches the boundary but no Dirichlet data given")
        if callable(dirichlet):
            g = np.asarray(dirichlet(self.bc_points), dtype=float)
        else:
            g = np.full(self.bc_rows.shape, float(dirichlet))
        np.add.at(out, self.bc_rows, self.bc_coeffs * g)
        return out


_STENCIL_CACHE = {}


def discretize(domain, grid, params) -> _Stencil:
    key = (domain, grid, params)
    st = _STENCIL_CACHE.get(key)
    if st is None:
        st = _Stencil(domain, grid, params)
        if len(_STENCIL_CACHE) > 8:
            _STENCIL_CACHE.clear()
        _STENCIL_CACHE[key] = st
    return st


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def apply_operator(field, params, rows_mask=None):
    """L_a applied to a grid field, as a new field on the same active set.

    Rows next to the boundary need the field's Dirichlet data; restrict with
    rows_mask (boolean, grid shape) to evaluate only away from the boundary
    (for example for fields that carry no boundary values)."""
    st = discretize(field.domain, field.grid, params)
    u = field.values.reshape(-1)[st.flat_active]
    out = st.A @ u
    if st.bc_rows.size:
        needed = np.ones(st.n_active, dtype=bool)
        if rows_mask is not None:
            needed = rows_mask.reshape(-1)[st.flat_active]
        if needed[st.bc_rows].any():
            if field.boundary_values is None:
                raise MissingBoundaryData(
                    "applying the operator next to the boundary requires "
                    "Dirichlet data on the field"
                )
            out = out + st.bc_vector(field.boundary_values)
    vals = np.full(field.grid.shape, np.nan).reshape(-1)
    vals[st.flat_active] = out
    vals = vals.reshape(field.grid.shape)
    if rows_mask is not None:
        vals = np.where(rows_mask, vals, np.nan)
    return ScalarField(grid=field.grid, domain=field.domain, values=vals,
                       boundary_values=None, parity=field.parity)


@dataclass
class SparseSystem:
    """Assembled linear system A u = b on the active nodes (A ~ L_a)."""

    A: sp.csr_matrix
    b: np.ndarray
    domain: object
    grid: object
    params: object
    dirichlet: object
    cell_weights: np.ndarray

    @property
    def n(self):
        return self.b.shape[0]

    def field_from_vector(self, vec):
        return ScalarField.from_active_vector(
            self.grid, self.domain, vec, boundary_values=self.dirichlet
        )


def assemble_torsion_system(domain, grid, params, rhs=-1.0, dirichlet=0.0) -> SparseSystem:
    """Assemble A u = b for L_a u = rhs with Dirichlet data on the cut
    points.  A approximates L_a itself (diagonal strictly negative), so the
    torsion problem is rhs = -1 with dirichlet = 0."""
    min_axis = min(domain.r_extent, *domain.y_halfwidth)
    if min_axis / grid.h_r < 4.0 - 1e-12:
        raise GridTooCoarse(
            f"smallest semi-axis {min_axis} is under 4 cells at h={grid.h_r}; refine the grid"
        )
    st = discretize(domain, grid, params)
    if callable(rhs):
        pts = grid.node_points().reshape(-1, grid.k + 1)[st.flat_active]
        rhs_vec = np.asarray(rhs(pts), dtype=float)
    elif isinstance(rhs, ScalarField):
        rhs_vec = rhs.values.reshape(-1)[st.flat_active]
    else:
        rhs_vec = np.full(st.n_active, float(rhs))
    b = rhs_vec - st.bc_vector(dirichlet)
    return SparseSystem(
        A=st.A,
        b=b,
        domain=domain,
        grid=grid,
        params=params,
        dirichlet=dirichlet,
        cell_weights=st.cell_weights,
    )


def boundary_normal_gradient(field, samples=None, count=20000, depth=None):
    """|normal derivative| at boundary sample points.

    The nodal gradient (second order, one-sided at boundary cuts) is
    interpolated at two inward offsets d and 2d along the normal and
    extrapolated back to the boundary, g ~ 2 g(p - d nu) - g(p - 2d nu).
    Exact for affine gradients, so the quadratic ball profile is probed
    to solver accuracy.
    """
    from .differential import gradient_fields

    domain = field.domain
    if not domain.smooth_boundary:
        raise UnsupportedShape("normal gradient sampling needs a smooth boundary")
    if field.boundary_values is None:
        raise MissingBoundaryData(
            "boundary probing requires Dirichlet data on the field")
    if samples is None:
        samples = boundary_samples(domain, count)
    # default depth keeps both probe points inside fully interior
    # interpolation cells even where the boundary curves across the grid
    d = depth if depth is not None else 2.0 * field.grid.h_r
    grads = gradient_fields(field)
    p1 = samples.points - d * samples.normals
    p2 = samples.points - 2.0 * d * samples.normals
    g1 = np.zeros(samples.points.shape[0])
    g2 = np.zeros(samples.points.shape[0])
    for axis, g in enumerate(grads):
        g1 += samples.normals[:, axis] * g.interpolate(p1)
        g2 += samples.normals[:, axis] * g.interpolate(p2)
    if np.any(~np.isfinite(g1)) or np.any(~np.isfinite(g2)):
        raise StencilLeavesDomain(
            "normal probe stencil leaves the active grid; refine the grid "
            "or shrink the probe depth"
        )
    return np.abs(2.0 * g1 - g2)


def normal_derivative_at_axis(field):
    """Estimate u_r(0, y) per tangential column from the first three
    r-layers: u_r(0) ~ (-2 u_0 + 3 u_1 - u_2)/h (second order; exact zero
    for fields even in r on symmetric data).

    Returns (y_points, values) over the columns whose first three r-nodes
    are inside the domain."""
    grid = field.grid
    geo = grid_geometry(field.domain, field.grid)
    if grid.n_r < 3:
        raise GridTooCoarse("need at least three r-layers for the axis probe")
    ok = geo.inside[0] & geo.inside[1] & geo.inside[2]
    u0 = field.values[0][ok]
    u1 = field.values[1][ok]
    u2 = field.values[2][ok]
    vals = (-2.0 * u0 + 3.0 * u1 - u2) / grid.h_r
    cols = np.argwhere(ok)
    y_pts = np.stack(
        [grid.y_nodes(m)[cols[:, m]] for m in range(grid.k)], axis=-1
    ) if grid.k else np.zeros((vals.size, 0))
    return y_pts, vals


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------


def field_to_csv(field, path):
    """Write `r,y1,...,yk,u` rows (17 significant digits) for active nodes."""
    grid = field.grid
    geo = grid_geometry(field.domain, field.grid)
    pts = grid.node_points()[geo.inside]
    vals = field.values[geo.inside]
    header = "r," + ",".join(f"y{m + 1}" for m in range(grid.k)) + ",u"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for p, v in zip(pts, vals):
            coords = ",".join(f"{c:.17g}" for c in p)
            fh.write(f"{coords},{v:.17g}\n")


def field_from_csv(path, grid, domain, boundary_values=None, parity="even"):
    """Read a field written by field_to_csv back onto its grid."""
    vals = np.full(grid.shape, np.nan)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if len(header) != grid.k + 2:
            raise ValueError(f"expected {grid.k + 2} columns, found {len(header)}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            fields = [float(x) for x in line.split(",")]
            i = int(round(fields[0] / grid.h_r - 0.5))
            index = [i]
            for m in range(grid.k):
                index.append(int(round((fields[1 + m] - grid.y_start[m]) / grid.h_y)))
            expected = grid.node_point(index)
            if not np.allclose(expected, fields[:-1], atol=1e-9 * grid.h_r):
                raise ValueError(f"row does not land on a grid node: {line}")
            vals[tuple(index)] = fields[-1]
    return ScalarField(grid=grid, domain=domain, values=vals,
                       boundary_values=boundary_values, parity=parity)
