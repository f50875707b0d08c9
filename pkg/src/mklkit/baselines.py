"""Uniform-sum (l2) and sparse simplex-weighted (l1) MKL baselines."""
from __future__ import annotations

import numpy as np

from .kernels import GramSet
from .linf import (MKL_KKT_TOL, LAMBDA_TOL, LinfModel, _relative_change, conjugated,
                   quad_forms)
from .qp import solve_svm

SVM_CONVENTION = "Q=YK_kY for the selected k; f(x)=sum_i a_i y_i K_k(x_i,x) - b"
L2_CONVENTION = "Q=sum_k YK_kY; f(x)=sum_i a_i y_i sum_k K_k(x_i,x) - b"
L1_CONVENTION = ("Q(lambda)=sum_k lambda_k YK_kY; objective=max_a 1'a - 0.5 a'Q(lambda)a; "
                 "f(x)=sum_i a_i y_i sum_k lambda_k K_k(x_i,x) - b")
TRUNCATE_BELOW = 1e-6
POLISH_GRID = 201


def fit_svm(g: GramSet, C: float = 1.0, kernel_index: int = 0,
            kkt_tol: float = MKL_KKT_TOL) -> LinfModel:
    """Plain SVM on one kernel, stored as a one-hot weighted model."""
    y, Qs = conjugated(g)
    sol = solve_svm(Qs[kernel_index], y, C, kkt_tol)
    lam = np.zeros(g.l)
    lam[kernel_index] = 1.0
    return LinfModel(lam=lam, svm=sol, labels=y, kind="svm", objective_trace=[sol.objective],
                     lambda_trace=[lam], convention=SVM_CONVENTION, recipes=list(g.recipes),
                     objective=sol.objective)


def fit_l2(g: GramSet, C: float = 1.0, kkt_tol: float = MKL_KKT_TOL) -> LinfModel:
    """Plain SVM on the unweighted kernel sum; ``lam`` is reported as uniform."""
    y, Qs = conjugated(g)
    sol = solve_svm(Qs.sum(axis=0), y, C, kkt_tol)
    lam = np.full(g.l, 1.0 / g.l)
    return LinfModel(lam=lam, svm=sol, labels=y, kind="l2", objective_trace=[sol.objective],
                     lambda_trace=[lam], convention=L2_CONVENTION, recipes=list(g.recipes),
                     objective=sol.objective)


def _l1_value(Qs, lam, y, C, kkt_tol, alpha0=None):
    sol = solve_svm(np.tensordot(lam, Qs, axes=1), y, C, kkt_tol, alpha0=alpha0, validate=False)
    return sol, -sol.objective


def fit_l1(g: GramSet, C: float = 1.0, max_iter: int = 100, obj_tol: float = 1e-5,
           kkt_tol: float = MKL_KKT_TOL) -> LinfModel:
    """Sparse kernel selection: minimise the SVM dual value over simplex weights.

    Uses the multiplicative fixed point ``lambda_k <- lambda_k sqrt(D_k)``
    (normalised), which is alternating minimisation of the variational form
    ``0.5 sum_k ||w_k||^2 / lambda_k`` and therefore monotone. With two
    kernels a 201-point grid over the simplex is checked afterwards, since
    the multiplicative step approaches a vertex only sublinearly. Weights
    below 1e-6 are truncated to zero before the final solve.
    """
    y, Qs = conjugated(g)
    l = g.l
    lam = np.full(l, 1.0 / l)
    trace, lam_trace = [], [lam.copy()]
    converged = False
    alpha = None
    for _ in range(max_iter):
        sol, value = _l1_value(Qs, lam, y, C, kkt_tol, alpha)
        alpha = sol.alpha
        stop = bool(trace) and _relative_change(value, trace[-1]) < obj_tol
        trace.append(value)
        if stop:
            converged = True
            break
        w = lam * np.sqrt(np.maximum(quad_forms(Qs, alpha), 0.0))
        if not w.sum() > 0:
            converged = True
            break
        new_lam = w / w.sum()
        step = float(np.max(np.abs(new_lam - lam)))
        lam = new_lam
        lam_trace.append(lam.copy())
        if step < LAMBDA_TOL:
            converged = True
            break

    if l == 2:
        best_lam, best_val = lam, _l1_value(Qs, lam, y, C, kkt_tol, alpha)[1]
        for t in np.linspace(0.0, 1.0, POLISH_GRID):
            cand = np.array([t, 1.0 - t])
            _, v = _l1_value(Qs, cand, y, C, kkt_tol)
            if v < best_val:
                best_lam, best_val = cand, v
        lam = best_lam

    lam = np.where(lam < TRUNCATE_BELOW, 0.0, lam)
    lam = lam / lam.sum()
    sol, value = _l1_value(Qs, lam, y, C, kkt_tol)
    return LinfModel(lam=lam, svm=sol, labels=y, kind="l1", objective_trace=trace,
                     lambda_trace=lam_trace, converged=converged,
                     convention=L1_CONVENTION, recipes=list(g.recipes), objective=value)
