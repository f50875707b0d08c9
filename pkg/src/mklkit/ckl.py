"""Composite kernel learning: l-infinity across descriptors, l1 within each.

Kernels are grouped by descriptor. For a fixed dual point ``alpha`` the
inner weights of descriptor ``j`` put all their mass on the kernel with the
largest ``alpha' Q_jk alpha`` and the descriptor weights follow the same
square-root rule as the l-infinity solver. The SVM step uses the Hessian
``0.5 * sum_j sum_k lambda_jk Y K_jk Y / gamma_j``, i.e. the dual objective
``0.25 a' [sum_j sum_k lambda_jk Q_jk / gamma_j] a - 1'a``.

Because the inner weights sit at a vertex chosen by a *max*, a plain SVM
step can raise the composite objective when the maximising kernel flips.
Each step is therefore accepted only if it does not increase the objective,
halving the move towards the SVM solution otherwise. That iteration can
still stop short of the optimum when the optimum has tied kernels, so a
refinement pass (see :func:`_refine`) finishes the fit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .kernels import GramSet
from .linf import (LAMBDA_TOL, MKL_KKT_TOL, PD_RIDGE, _relative_change, conjugated,
                   decision_values, effective_slice, quad_forms, sign_labels,
                   sqrt_ratio_update, strictly_pd)
from .qp import SvmSolution, solve_svm

CKL_CONVENTION = ("objective=0.25*a'(sum_j sum_k lambda_jk YK_jkY/gamma_j)a - 1'a; "
                  "f(x)=sum_i a_i y_i sum_jk lambda_jk K_jk(x_i,x)/(2 gamma_j) - b")
MAX_HALVINGS = 30
TIE_RTOL = 1e-12
INNER_FLOOR = 1e-4
REFINE_ITER = 2000


@dataclass
class CklModel:
    gamma: np.ndarray
    inner_lambda: list
    groups: list
    svm: SvmSolution
    labels: np.ndarray
    objective_trace: list = field(default_factory=list)
    gamma_trace: list = field(default_factory=list)
    inner_trace: list = field(default_factory=list)
    ties: list = field(default_factory=list)
    converged: bool = True
    stalled: bool = False
    refine_trace: list = field(default_factory=list)
    gap: float = 0.0
    convention: str = CKL_CONVENTION
    objective: float = float("nan")
    ridges: np.ndarray | None = None
    recipes: list = field(default_factory=list)

    @property
    def C(self):
        return self.svm.C

    @property
    def descriptor_of(self) -> dict:
        return {k: j for j, ks in enumerate(self.groups) for k in ks}

    def kernel_coefficients(self) -> np.ndarray:
        return _coefficients(self.groups, self.inner_lambda, self.gamma) / 2.0


def tied_maximum(values, rtol: float = TIE_RTOL) -> bool:
    v = np.asarray(values, dtype=float)
    top = v.max()
    return int(np.sum(v >= top - rtol * abs(top))) > 1


def inner_lambda_update(candidates) -> tuple[np.ndarray, float]:
    """One-hot weights at the largest candidate (lowest index on ties) and that value."""
    v = np.asarray(candidates, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValidationError("a descriptor needs at least one kernel")
    k = int(np.argmax(v))
    w = np.zeros(v.size)
    w[k] = 1.0
    return w, float(v[k])


def gamma_update(D) -> np.ndarray:
    """Descriptor weights ``sqrt(D_j) / sum sqrt(D_j)``."""
    return sqrt_ratio_update(D)


def _coefficients(groups, inner, gamma) -> np.ndarray:
    l = sum(len(ks) for ks in groups)
    coef = np.zeros(l)
    for j, ks in enumerate(groups):
        coef[ks] = inner[j] / gamma[j]
    return coef


def _weights_at(half, groups, alpha):
    """Inner weights, descriptor maxima, ties, gamma and objective at ``alpha``."""
    Dk = quad_forms(half, alpha)
    inner, D, ties = [], np.zeros(len(groups)), []
    for j, ks in enumerate(groups):
        w, D[j] = inner_lambda_update(Dk[ks])
        inner.append(w)
        if len(ks) > 1 and tied_maximum(Dk[ks]):
            ties.append(j)
    if not np.any(D > 0):
        return None
    gamma = gamma_update(D)
    obj = float(0.5 * np.sum(D / gamma) - alpha.sum())
    return inner, gamma, ties, obj


def fit_ckl(g: GramSet, C: float = 1.0, max_iter: int = 100, obj_tol: float = 1e-5,
            kkt_tol: float = MKL_KKT_TOL, ridge: float = PD_RIDGE,
            svm_max_iter: int = 500_000, refine: bool = True) -> CklModel:
    """Alternate SVM solves with the closed-form inner/outer weight updates.

    Starts from ``gamma = 1/n`` and ``lambda_j = 1/n_j``. Stops on the same
    rules as :func:`mklkit.linf.fit_linf`, or when no step along the SVM
    direction lowers the objective (``stalled``; typically a tie between
    kernels of one descriptor). With one kernel per descriptor the iterates
    coincide with the l-infinity solver's. The traces record this one-hot
    phase; with ``refine`` the returned weights come from :func:`_refine`
    and ``objective`` is the composite dual value at the returned point.
    """
    if g.descriptor_of is None:
        raise ValidationError("composite kernel learning needs a descriptor grouping")
    g, ridges = strictly_pd(g, ridge)
    y, Qs = conjugated(g)
    half = 0.5 * Qs
    groups = g.groups()
    n = len(groups)
    gamma = np.full(n, 1.0 / n)
    inner = [np.full(len(ks), 1.0 / len(ks)) for ks in groups]
    alpha = None
    trace, gamma_trace, inner_trace = [], [gamma.copy()], [[w.copy() for w in inner]]
    ties: list = []
    converged = stalled = False
    for _ in range(max_iter):
        H = np.tensordot(_coefficients(groups, inner, gamma), half, axes=1)
        sol = solve_svm(H, y, C, kkt_tol, alpha0=alpha, max_iter=svm_max_iter, validate=False)
        cand = sol.alpha
        state = _weights_at(half, groups, cand)
        if state is None:
            # alpha = 0: every weight vector is optimal
            alpha = cand
            trace.append(sol.objective)
            converged = True
            break
        if trace and state[3] > trace[-1]:
            t, state = 1.0, None
            for _ in range(MAX_HALVINGS):
                t *= 0.5
                trial = alpha + t * (cand - alpha)
                s = _weights_at(half, groups, trial)
                if s is not None and s[3] <= trace[-1]:
                    cand, state = trial, s
                    break
            if state is None:
                stalled = converged = True
                break
        alpha = cand
        new_inner, new_gamma, ties, obj = state
        step = float(np.max(np.abs(new_gamma - gamma)))
        inner_changed = any(not np.array_equal(a, b) for a, b in zip(new_inner, inner))
        inner, gamma = new_inner, new_gamma
        gamma_trace.append(gamma.copy())
        inner_trace.append([w.copy() for w in inner])
        done = bool(trace) and _relative_change(obj, trace[-1]) < obj_tol
        trace.append(obj)
        if done or (step < LAMBDA_TOL and not inner_changed):
            converged = True
            break
    refine_trace: list = []
    if refine and alpha is not None and np.any(alpha > 0):
        inner, gamma, ties, refine_trace, ok = _refine(half, y, groups, C, alpha, REFINE_ITER,
                                                       kkt_tol, svm_max_iter)
        converged = converged and ok
    H = np.tensordot(_coefficients(groups, inner, gamma), half, axes=1)
    sol = solve_svm(H, y, C, kkt_tol, alpha0=alpha, max_iter=svm_max_iter, validate=False)
    # the SVM value at fixed weights is a lower bound on the optimum and the
    # composite objective at its alpha an upper bound; report the latter
    final = _weights_at(half, groups, sol.alpha)
    objective = final[3] if final is not None else sol.objective
    return CklModel(gamma=gamma, inner_lambda=inner, groups=groups, svm=sol, labels=y,
                    objective_trace=trace, gamma_trace=gamma_trace, inner_trace=inner_trace,
                    ties=ties, converged=converged, stalled=stalled, objective=objective,
                    refine_trace=refine_trace, gap=objective - sol.objective, ridges=ridges, recipes=list(g.recipes))


def _refine(half, y, groups, C, alpha, max_iter, kkt_tol, svm_max_iter):
    """Resolve ties left by the one-hot iteration.

    At the optimum the largest quadratic form of a descriptor is usually
    attained by several kernels at once, and only a mixture of them is a
    saddle point. Here the inner weights follow the multiplicative rule
    ``lambda_jk <- lambda_jk sqrt(D_jk)`` (normalised per descriptor), which
    drifts to a vertex when the maximum is unique and settles on a mixture
    when it is tied. Weights below ``INNER_FLOOR`` are zeroed at the end.
    """
    inner = [np.full(len(ks), 1.0 / len(ks)) for ks in groups]
    gamma = np.full(len(groups), 1.0 / len(groups))
    trace: list = []
    converged = False
    for _ in range(max_iter):
        H = np.tensordot(_coefficients(groups, inner, gamma), half, axes=1)
        sol = solve_svm(H, y, C, kkt_tol, alpha0=alpha, max_iter=svm_max_iter, validate=False)
        alpha = sol.alpha
        Dk = quad_forms(half, alpha)
        if not np.any(Dk > 0):
            trace.append(sol.objective)
            converged = True
            break
        new_inner = []
        for w, ks in zip(inner, groups):
            v = w * np.sqrt(Dk[ks])
            new_inner.append(v / v.sum() if v.sum() > 0 else w)
        D = np.array([w @ Dk[ks] for w, ks in zip(new_inner, groups)])
        new_gamma = gamma_update(D)
        step = max(float(np.max(np.abs(new_gamma - gamma))),
                   max(float(np.max(np.abs(a - b))) for a, b in zip(new_inner, inner)))
        inner, gamma = new_inner, new_gamma
        obj = float(0.5 * np.sum(D / gamma) - alpha.sum())
        trace.append(obj)
        if step < LAMBDA_TOL:
            converged = True
            break
    ties = []
    for j, w in enumerate(inner):
        w = np.where(w < INNER_FLOOR, 0.0, w)
        inner[j] = w / w.sum()
        if np.count_nonzero(w) > 1:
            ties.append(j)
    return inner, gamma, ties, trace, converged


def decision_ckl(model: CklModel, test_slices) -> np.ndarray:
    K_eff = effective_slice(model.kernel_coefficients(), test_slices)
    return decision_values(model.svm.alpha, model.labels, model.svm.bias, K_eff)


def predict_ckl(model: CklModel, test_slices) -> np.ndarray:
    return sign_labels(decision_ckl(model, test_slices))
