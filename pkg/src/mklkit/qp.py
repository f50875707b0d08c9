"""Soft-margin SVM dual for a fixed precomputed Hessian.

Both solvers minimise ``0.5 a'Qa - 1'a`` subject to ``0 <= a <= C`` and
``y'a = 0`` where ``Q`` is the label-conjugated kernel ``YKY`` (or any PSD
matrix the caller builds, e.g. a weighted kernel sum). The decision function
convention is ``f(x) = sum_i a_i y_i K(x_i, x) - b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import InfeasibleProblemError, MatrixValidationError, ValidationError
from .kernels import binary_labels, is_symmetric, psd_tolerance

DEFAULT_KKT_TOL = 1e-4
ALPHA_TOL_FACTOR = 1e-8
BRUTE_FORCE_MAX_M = 30
_TAU = 1e-12


@dataclass
class SvmSolution:
    alpha: np.ndarray
    bias: float
    C: float | np.ndarray
    objective: float
    support_indices: np.ndarray
    kkt_violation: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def free_mask(self) -> np.ndarray:
        Cv = np.broadcast_to(np.asarray(self.C, dtype=float), self.alpha.shape)
        tol = ALPHA_TOL_FACTOR * Cv
        return (self.alpha > tol) & (self.alpha < Cv - tol)


def dual_objective(Q: np.ndarray, alpha: np.ndarray) -> float:
    return float(0.5 * alpha @ Q @ alpha - alpha.sum())


def _box(C, m: int) -> np.ndarray:
    Cv = np.broadcast_to(np.asarray(C, dtype=float), (m,)).astype(float)
    if not np.all(Cv > 0) or not np.all(np.isfinite(Cv)):
        raise ValidationError("C must be finite and > 0")
    return Cv


def _prepare(Q, labels, C, validate: bool):
    Q = np.asarray(Q, dtype=float)
    y = binary_labels(labels)
    m = y.shape[0]
    if Q.shape != (m, m):
        raise ValidationError(f"Q has shape {Q.shape}, expected ({m}, {m})")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InfeasibleProblemError("both classes must be present")
    Cv = _box(C, m)
    if validate:
        if not np.all(np.isfinite(Q)):
            raise MatrixValidationError("Q contains non-finite values")
        if not is_symmetric(Q, 1e-10):
            raise MatrixValidationError("Q is not symmetric")
        if np.linalg.eigvalsh(Q)[0] < -psd_tolerance(Q):
            raise MatrixValidationError("Q is not positive semidefinite")
    return Q, y, Cv


def _violation(y, Cv, alpha, G):
    """Maximal pairwise KKT violation ``m(a) - M(a)`` and the extremal sets."""
    v = -y * G
    up = ((alpha < Cv) & (y > 0)) | ((alpha > 0) & (y < 0))
    low = ((alpha < Cv) & (y < 0)) | ((alpha > 0) & (y > 0))
    if not up.any() or not low.any():
        return 0.0, v, up, low
    return float(v[up].max() - v[low].min()), v, up, low


def _bias(y, Cv, alpha, G) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < Cv)
    if free.any():
        return float(yG[free].mean())
    at_lo, at_hi = alpha <= 0, alpha >= Cv
    ub_mask = (at_lo & (y > 0)) | (at_hi & (y < 0))
    lb_mask = (at_hi & (y > 0)) | (at_lo & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else None
    lb = yG[lb_mask].max() if lb_mask.any() else None
    if ub is None:
        return float(lb)
    if lb is None:
        return float(ub)
    return float(0.5 * (ub + lb))


def _finish(Q, y, Cv, C, alpha, G, iterations, converged) -> SvmSolution:
    viol = _violation(y, Cv, alpha, G)[0]
    sv = np.flatnonzero(alpha > ALPHA_TOL_FACTOR * Cv)
    return SvmSolution(alpha=alpha, bias=_bias(y, Cv, alpha, G), C=C,
                       objective=dual_objective(Q, alpha), support_indices=sv,
                       kkt_violation=viol, iterations=iterations, converged=converged)


@numba.njit(cache=True)
def _smo_loop(Q, y, Cv, alpha, G, kkt_tol, max_iter):
    """Pair updates in place on ``alpha`` and the gradient ``G = Qa - 1``."""
    m = y.shape[0]
    it = 0
    while it < max_iter:
        # i: maximal violator in I_up; M: smallest -y G over I_low
        i = -1
        vi = -np.inf
        vmin = np.inf
        for t in range(m):
            v = -y[t] * G[t]
            if (y[t] > 0 and alpha[t] < Cv[t]) or (y[t] < 0 and alpha[t] > 0):
                if v > vi:
                    vi = v
                    i = t
            if (y[t] < 0 and alpha[t] < Cv[t]) or (y[t] > 0 and alpha[t] > 0):
                if v < vmin:
                    vmin = v
        if i < 0 or vmin == np.inf or vi - vmin < kkt_tol:
            return it, True
        # j: largest second-order gain b^2 / a among I_low violators
        j = -1
        best = -np.inf
        Qii = Q[i, i]
        for t in range(m):
            if (y[t] < 0 and alpha[t] < Cv[t]) or (y[t] > 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v < vi:
                    b = vi - v
                    a = Qii + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t]
                    if a <= _TAU:
                        a = _TAU
                    gain = b * b / a
                    if gain > best:
                        best = gain
                        j = t
        b = vi + y[j] * G[j]
        a = Qii + Q[j, j] - 2.0 * y[i] * y[j] * Q[i, j]
        if a <= _TAU:
            a = _TAU
        # move along a_i += y_i t, a_j -= y_j t, which keeps y'a fixed
        step = b / a
        lim_i = Cv[i] - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else Cv[j] - alpha[j]
        step = min(step, lim_i, lim_j)
        old_i = alpha[i]
        old_j = alpha[j]
        if step == lim_i:
            alpha[i] = Cv[i] if y[i] > 0 else 0.0
        else:
            alpha[i] = old_i + y[i] * step
        if step == lim_j:
            alpha[j] = 0.0 if y[j] > 0 else Cv[j]
        else:
            alpha[j] = old_j - y[j] * step
        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        for t in range(m):
            G[t] += Q[i, t] * di + Q[j, t] * dj
        it += 1
    return it, False


def solve_svm(Q, labels, C, kkt_tol: float = DEFAULT_KKT_TOL, alpha0=None,
              max_iter: int = 500_000, validate: bool = True) -> SvmSolution:
    """Minimise the SVM dual with pairwise (SMO-style) working-set updates.

    The first index of each pair is the maximal KKT violator; the second is
    chosen by the second-order gain rule. ``C`` may be a scalar or a
    per-sample vector of upper bounds. ``alpha0`` warm-starts the solver and
    must be feasible; every pair update decreases the objective, so the
    returned objective never exceeds that of ``alpha0``.

    Raises
    ------
    InfeasibleProblemError
        If only one class is present.
    MatrixValidationError
        If ``validate`` and ``Q`` is not symmetric PSD within tolerance.
    """
    Q, y, Cv = _prepare(Q, labels, C, validate)
    m = y.shape[0]
    if alpha0 is None:
        alpha = np.zeros(m)
        G = -np.ones(m)
    else:
        alpha = np.clip(np.asarray(alpha0, dtype=float).copy(), 0.0, Cv)
        if abs(float(y @ alpha)) > 1e-9 * max(1.0, float(Cv.max())):
            raise ValidationError("warm start violates y'alpha = 0")
        G = Q @ alpha - 1.0
    it, converged = _smo_loop(np.ascontiguousarray(Q), y, Cv, alpha, G, float(kkt_tol), int(max_iter))
    return _finish(Q, y, Cv, C, alpha, G, it, converged)


# ---------------------------------------------------------------------------
# slow reference solver


def project_feasible(v: np.ndarray, y: np.ndarray, Cv: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{0 <= a <= C, y'a = 0}``.

    ``h(mu) = y' clip(v - mu y, 0, C)`` is piecewise linear and nonincreasing,
    so the root is found exactly by scanning its breakpoints.
    """
    bps = np.unique(np.concatenate([y * v, y * (v - Cv)]))
    X = np.clip(v[None, :] - bps[:, None] * y[None, :], 0.0, Cv[None, :])
    h = X @ y
    if h[0] <= 0:
        return X[0]
    if h[-1] >= 0:
        return X[-1]
    k = int(np.flatnonzero(h <= 0)[0])
    h0, h1 = h[k - 1], h[k]
    mu = bps[k - 1] + (bps[k] - bps[k - 1]) * h0 / (h0 - h1)
    return np.clip(v - mu * y, 0.0, Cv)


def _polish(Q, y, Cv, alpha, tol):
    """Solve the equality-constrained KKT system on the free set of ``alpha``."""
    m = y.shape[0]
    lo = alpha <= tol * Cv
    hi = alpha >= Cv * (1 - tol)
    F = ~(lo | hi)
    a = np.where(lo, 0.0, np.where(hi, Cv, alpha))
    if not F.any():
        return a
    B = ~F
    QF = Q[np.ix_(F, F)]
    yF = y[F]
    nf = int(F.sum())
    A = np.zeros((nf + 1, nf + 1))
    A[:nf, :nf] = QF
    A[:nf, nf] = yF
    A[nf, :nf] = yF
    rhs = np.concatenate([1.0 - Q[np.ix_(F, B)] @ a[B], [-(y[B] @ a[B])]])
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    a = a.copy()
    a[F] = sol[:nf]
    if np.any(a[F] < -1e-12) or np.any(a[F] > Cv[F] + 1e-12):
        return None
    a = np.clip(a, 0.0, Cv)
    if m and abs(y @ a) > 1e-10 * max(1.0, Cv.max()):
        return None
    return a


def brute_force_svm(Q, labels, C, tol: float = 1e-10, max_iter: int = 200_000) -> SvmSolution:
    """Reference dual solver for small problems (``m <= 30``), used by tests.

    Accelerated projected gradient with fixed step ``1/L`` and gradient-based
    restarts, followed by an exact solve of the KKT system on the detected
    free set. Deliberately shares no code path with :func:`solve_svm` beyond
    input validation.
    """
    Q, y, Cv = _prepare(Q, labels, C, validate=True)
    m = y.shape[0]
    if m > BRUTE_FORCE_MAX_M:
        raise ValidationError(f"brute_force_svm is limited to m <= {BRUTE_FORCE_MAX_M}")
    L = max(float(np.linalg.eigvalsh(Q)[-1]), 1e-12)
    x = np.zeros(m)
    z = x.copy()
    theta = 1.0
    best = x
    best_obj = 0.0
    for it in range(1, max_iter + 1):
        x_new = project_feasible(z - (Q @ z - 1.0) / L, y, Cv)
        step = float(np.max(np.abs(x_new - x)))
        if (z - x_new) @ (x_new - x) > 0:
            # momentum is pointing uphill: restart from the plain gradient step
            x, z, theta = x_new, x_new.copy(), 1.0
        else:
            theta_new = 0.5 * (1 + np.sqrt(1 + 4 * theta * theta))
            z = x_new + ((theta - 1) / theta_new) * (x_new - x)
            x, theta = x_new, theta_new
        if it % 200 == 0 or step < tol:
            cand = _polish(Q, y, Cv, x, 1e-7)
            for a in (x, cand):
                if a is None:
                    continue
                obj = dual_objective(Q, a)
                if obj < best_obj:
                    best, best_obj = a, obj
            G = Q @ best - 1.0
            if _violation(y, Cv, best, G)[0] < tol:
                return _finish(Q, y, Cv, C, best.copy(), G, it, True)
            if step < tol * 1e-3:
                break
    G = Q @ best - 1.0
    return _finish(Q, y, Cv, C, best.copy(), G, max_iter, _violation(y, Cv, best, G)[0] < 1e-6)
