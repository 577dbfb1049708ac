"""Krylov solution of the assembled systems.

Method selection is by measurement, not assumption: the assembled matrix
is symmetric in the weighted cell inner product exactly when no boundary
cut rows are present, so a randomized symmetry probe picks conjugate
gradients (on the weighted symmetrization) when it passes and BiCGStab
otherwise.  Both run Jacobi preconditioned.

The returned residual is recomputed from the original system at exit
(never trusted from the iteration), and the probe vectors come from a
fixed seed so repeated solves are bit-identical.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, bicgstab, cg

from .errors import BreakdownDetected, NoConvergence

_PROBE_SEED = 20260814


@dataclass(frozen=True)
class SolveReport:
    method: str
    iterations: int
    final_relative_residual: float
    converged: bool
    wall_time: float
    n_unknowns: int


def _weighted_symmetry_gap(A, w, rng):
    u = rng.standard_normal(A.shape[0])
    v = rng.standard_normal(A.shape[0])
    Au = A @ u
    Av = A @ v
    s1 = np.sum(w * Au * v)
    s2 = np.sum(w * u * Av)
    den = np.sum(np.abs(w * Au * v)) + np.sum(np.abs(w * u * Av)) + 1e-300
    return abs(s1 - s2) / den


def solve(system, tol=1e-10, max_iter=20000):
    """Solve A u = b; returns (ScalarField, SolveReport).

    Raises NoConvergence (best iterate and report attached) when the
    certified relative residual misses 10 * tol within max_iter, and
    BreakdownDetected when BiCGStab breaks down twice.
    """
    A, b = system.A, system.b
    n = b.shape[0]
    start = time.perf_counter()
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        report = SolveReport("none", 0, 0.0, True, time.perf_counter() - start, n)
        return system.field_from_vector(np.zeros(n)), report

    w = np.asarray(system.cell_weights, dtype=float)
    rng = np.random.default_rng(_PROBE_SEED)
    symmetric = _weighted_symmetry_gap(A, w, rng) <= 1e-12

    count = {"it": 0}

    def cb(_xk):
        count["it"] += 1

    if symmetric:
        method = "cg"
        W = sp.diags(w)
        A_sym = (W @ (-A)).tocsr()
        b_sym = -(w * b)
        d = A_sym.diagonal()
        d = np.where(np.abs(d) > 0, d, 1.0)
        M = LinearOperator((n, n), matvec=lambda x: x / d)
        x, info = cg(A_sym, b_sym, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=cb)
    else:
        method = "bicgstab"
        A_neg = (-A).tocsr()
        b_neg = -b
        d = A_neg.diagonal()
        d = np.where(np.abs(d) > 0, d, 1.0)
        M = LinearOperator((n, n), matvec=lambda x: x / d)
        x, info = bicgstab(A_neg, b_neg, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=cb)
        if info < 0:  # breakdown: restart once from the current iterate
            x0 = x if np.all(np.isfinite(x)) else np.zeros(n)
            x, info = bicgstab(
                A_neg, b_neg, x0=x0, rtol=tol, atol=0.0, maxiter=max_iter, M=M, callback=cb
            )
            if info < 0:
                res = float(np.linalg.norm(A @ x - b) / b_norm) if np.all(np.isfinite(x)) else np.inf
                report = SolveReport(method, count["it"], res, False,
                                     time.perf_counter() - start, n)
                raise BreakdownDetected(
                    "BiCGStab broke down twice", best=system.field_from_vector(x), report=report
                )

    residual = float(np.linalg.norm(A @ x - b) / b_norm)  # certified on the original system
    converged = residual <= 10.0 * tol
    report = SolveReport(
        method=method,
        iterations=count["it"],
        final_relative_residual=residual,
        converged=converged,
        wall_time=time.perf_counter() - start,
        n_unknowns=n,
    )
    fld = system.field_from_vector(x)
    if not converged:
        raise NoConvergence(
            f"{method} stopped at relative residual {residual:.3e} "
            f"after {count['it']} iterations (target {tol:.1e})",
            best=fld,
            report=report,
        )
    return fld, report
