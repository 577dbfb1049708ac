"""Finite-difference derivatives of grid fields.

Centered stencils at nodes whose neighbors are inside the domain, and
3-point unequal-arm stencils (using Dirichlet values at the boundary cut
points) next to the boundary.  Across r = 0 the even/odd reflection of
the field supplies the missing ghost value, so nothing special happens
at the axis.
"""

from __future__ import annotations

import numpy as np

from .errors import MissingBoundaryData
from .field import ScalarField
from .geometry import R_AXIS, grid_geometry


def _axis_step(grid, axis):
    return grid.h_r if axis == R_AXIS else grid.h_y


def _arm_values(field, geo, axis):
    """Per-direction arm lengths and values for 3-point stencils on `axis`.

    Returns (h_plus, v_plus, h_minus, v_minus) arrays over grid.shape;
    entries are meaningful only at inside nodes.  Boundary cut arms take
    the field's Dirichlet data; the r < 0 ghost takes the parity reflection.
    """
    grid = field.grid
    h = _axis_step(grid, axis)
    dim = grid.k + 1
    vals = field.values

    out = {}
    for direction in (1, -1):
        arm = np.full(grid.shape, h)
        nb = np.full(grid.shape, np.nan)
        src = [slice(None)] * dim
        dst = [slice(None)] * dim
        if direction == 1:
            dst[axis] = slice(0, -1)
            src[axis] = slice(1, None)
        else:
            dst[axis] = slice(1, None)
            src[axis] = slice(0, -1)
        nb[tuple(dst)] = vals[tuple(src)]
        if axis == R_AXIS and direction == -1:
            first = [slice(None)] * dim
            first[axis] = 0
            sign = -1.0 if field.parity == "odd" else 1.0
            nb[tuple(first)] = sign * vals[tuple(first)]

        theta = geo.cut_theta[(axis, direction)]
        cut = geo.inside & np.isfinite(theta)
        if cut.any():
            if field.boundary_values is None:
                raise MissingBoundaryData(
                    f"axis {axis} stencil crosses the boundary but the field "
                    "carries no Dirichlet data"
                )
            pts = grid.node_points()[cut]
            t = theta[cut]
            step = np.zeros(dim)
            step[axis] = direction * h
            cut_pts = pts + t[:, None] * step
            g = field.boundary_value_at(cut_pts)
            arm[cut] = np.maximum(t, 1e-6) * h
            nb[cut] = g
        out[direction] = (arm, nb)
    hp, vp = out[1]
    hm, vm = out[-1]
    return hp, vp, hm, vm


def axis_derivative(field, axis):
    """First derivative along one axis as a full-shape array (NaN outside)."""
    geo = grid_geometry(field.domain, field.grid)
    hp, vp, hm, vm = _arm_values(field, geo, axis)
    v0 = field.values
    num = -(hp**2) * vm + (hp**2 - hm**2) * v0 + hm**2 * vp
    den = hm * hp * (hm + hp)
    d = num / den
    d[~geo.inside] = np.nan
    return d


def axis_second_derivative(field, axis):
    geo = grid_geometry(field.domain, field.grid)
    hp, vp, hm, vm = _arm_values(field, geo, axis)
    v0 = field.values
    num = 2.0 * (hp * vm - (hm + hp) * v0 + hm * vp)
    den = hm * hp * (hm + hp)
    d = num / den
    d[~geo.inside] = np.nan
    return d


def gradient_fields(field):
    """All first derivatives as ScalarFields with the correct r-parity."""
    flip = {"even": "odd", "odd": "even"}
    outs = []
    for axis in range(field.grid.k + 1):
        arr = axis_derivative(field, axis)
        parity = flip[field.parity] if axis == R_AXIS else field.parity
        outs.append(ScalarField(grid=field.grid, domain=field.domain,
                                values=arr, boundary_values=None, parity=parity))
    return outs


def deep_mask(field_or_geo, domain=None):
    """Nodes whose full 3^d neighborhood (r-mirror allowed) is inside."""
    if isinstance(field_or_geo, ScalarField):
        geo = grid_geometry(field_or_geo.domain, field_or_geo.grid)
    else:
        geo = field_or_geo
    inside = geo.inside
    dim = inside.ndim
    mask = inside.copy()
    for axis in range(dim):
        for direction in (1, -1):
            nb = np.zeros_like(inside)
            src = [slice(None)] * dim
            dst = [slice(None)] * dim
            if direction == 1:
                dst[axis] = slice(0, -1)
                src[axis] = slice(1, None)
            else:
                dst[axis] = slice(1, None)
                src[axis] = slice(0, -1)
            nb[tuple(dst)] = mask[tuple(src)]
            if axis == R_AXIS and direction == -1:
                first = [slice(None)] * dim
                first[axis] = 0
                nb[tuple(first)] = mask[tuple(first)]
            mask = mask & nb
    return mask


def mixed_second_derivative(field, axis1, axis2):
    """Cross derivative by the 4-point centered stencil; valid on deep_mask.

    Uses the parity reflection across r = 0 when axis1 or axis2 is the
    radial axis and the stencil reaches below the first node layer."""
    if axis1 == axis2:
        raise ValueError("use axis_second_derivative for repeated axes")
    grid = field.grid
    vals = field.values
    dim = grid.k + 1
    h1 = _axis_step(grid, axis1)
    h2 = _axis_step(grid, axis2)

    def shifted(a, axis, direction):
        out = np.full_like(a, np.nan)
        src = [slice(None)] * dim
        dst = [slice(None)] * dim
        if direction == 1:
            dst[axis] = slice(0, -1)
            src[axis] = slice(1, None)
        else:
            dst[axis] = slice(1, None)
            src[axis] = slice(0, -1)
        out[tuple(dst)] = a[tuple(src)]
        if axis == R_AXIS and direction == -1:
            first = [slice(None)] * dim
            first[axis] = 0
            sign = -1.0 if field.parity == "odd" else 1.0
            out[tuple(first)] = sign * a[tuple(first)]
        return out

    pp = shifted(shifted(vals, axis1, 1), axis2, 1)
    pm = shifted(shifted(vals, axis1, 1), axis2, -1)
    mp = shifted(shifted(vals, axis1, -1), axis2, 1)
    mm = shifted(shifted(vals, axis1, -1), axis2, -1)
    return (pp - pm - mp + mm) / (4.0 * h1 * h2)
