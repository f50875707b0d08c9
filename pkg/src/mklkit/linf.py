"""Block l-infinity MKL by alternating between the SVM dual and the weights.

The joint dual is

    min_{alpha, lambda}  0.5 alpha' Q(lambda) alpha - 1'alpha,
    Q(lambda) = 0.5 sum_k Y K_k Y / lambda_k,

over the SVM box and the simplex. For fixed ``alpha`` the weight problem
``min sum_k D_k / lambda_k`` has the closed form ``lambda_k ~ sqrt(D_k)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDirectionError, ValidationError
from .kernels import GramMatrix, GramSet, binary_labels, min_eigenvalue, psd_tolerance
from .qp import SvmSolution, solve_svm

LINF_CONVENTION = ("Q(lambda)=0.5*sum_k YK_kY/lambda_k; "
                   "f(x)=sum_i a_i y_i sum_k K_k(x_i,x)/(2 lambda_k) - b")
MKL_KKT_TOL = 1e-8
LAMBDA_TOL = 1e-6
PD_RIDGE = 1e-8
MAX_OMEGA = 16.0
MIN_WEIGHT = 1e-12


@dataclass
class LinfModel:
    """Kernel weights plus the SVM dual solution they were trained with.

    Shared by the l-infinity solver and the l1/l2 baselines; ``kind`` says
    which, and :meth:`kernel_coefficients` gives the multiplier of each
    gram matrix in the effective kernel.
    """

    lam: np.ndarray
    svm: SvmSolution
    labels: np.ndarray
    kind: str = "linf"
    objective_trace: list = field(default_factory=list)
    lambda_trace: list = field(default_factory=list)
    converged: bool = True
    convention: str = LINF_CONVENTION
    recipes: list = field(default_factory=list)
    objective: float = float("nan")
    ridges: np.ndarray | None = None

    @property
    def C(self):
        return self.svm.C

    def kernel_coefficients(self) -> np.ndarray:
        if self.kind == "linf":
            return 1.0 / (2.0 * self.lam)
        if self.kind in ("l1", "svm"):
            return self.lam.copy()
        return np.ones_like(self.lam)


def sqrt_ratio_update(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 1 or D.size < 1:
        raise ValidationError("D must be a nonempty vector")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ValidationError("D must be finite and nonnegative")
    r = np.sqrt(D)
    s = r.sum()
    if not s > 0:
        raise DegenerateDirectionError("all D_k are zero; any simplex point is optimal")
    return r / s


def lambda_update(D) -> np.ndarray:
    """Minimiser of ``sum_k D_k / lambda_k`` over the simplex: ``sqrt(D)/sum sqrt(D)``."""
    return sqrt_ratio_update(D)


def conjugated(g: GramSet) -> tuple[np.ndarray, np.ndarray]:
    """Labels as +-1 floats and the stack ``Y K_k Y`` of shape ``(l, m, m)``."""
    y = binary_labels(g.labels)
    return y, g.matrices * np.outer(y, y)[None, :, :]


def strictly_pd(g: GramSet, ridge: float = PD_RIDGE) -> tuple[GramSet, np.ndarray]:
    """Add ``ridge * mean(diag K)`` to the diagonal of every singular gram.

    The closed-form weight updates need ``D_k > 0`` whenever ``alpha != 0``,
    which holds only for positive definite kernels. Returns the adjusted set
    and the ridge added to each kernel (zero where none was needed).
    """
    added = np.zeros(g.l)
    mats = []
    for k, gm in enumerate(g.kernels):
        K = gm.entries
        if min_eigenvalue(K) <= psd_tolerance(K):
            added[k] = ridge * max(float(np.mean(np.diag(K))), 1.0)
            K = K + added[k] * np.eye(g.m)
        mats.append(GramMatrix(K, gm.ridge_applied + added[k]))
    return GramSet(mats, g.labels, g.descriptor_of, list(g.recipes)), added


def quad_forms(Qs: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """``alpha' Qs[k] alpha`` for every ``k``."""
    return np.maximum(np.einsum("kij,i,j->k", Qs, alpha, alpha), 0.0)


def _relative_change(new: float, old: float) -> float:
    return abs(new - old) / max(abs(old), 1e-300)


def _extrapolated(old, new, omega):
    """Push ``new`` further along ``log(new / old)``, back onto the simplex."""
    v = new * np.exp(omega * (np.log(new) - np.log(old)))
    v = np.maximum(v / v.sum(), MIN_WEIGHT)
    return v / v.sum()


def fit_linf(g: GramSet, C: float = 1.0, max_iter: int = 100, obj_tol: float = 1e-5,
             kkt_tol: float = MKL_KKT_TOL, ridge: float = PD_RIDGE,
             svm_max_iter: int = 500_000, extrapolate: bool = True) -> LinfModel:
    """Alternating minimisation for l-infinity MKL.

    Starts from uniform weights. Each iteration warm-starts the SVM solve
    from the previous ``alpha``, so the recorded objective
    ``0.5 sum_k D_k / lambda_k - 1'alpha`` (with ``D_k = alpha' (YK_kY/2) alpha``)
    never increases. Stops when the relative objective change drops below
    ``obj_tol`` or the weights move less than 1e-6 in max-norm; a final SVM
    solve at the returned weights keeps ``alpha``, ``lambda`` and the bias
    consistent. Hitting ``max_iter`` returns the last iterate with
    ``converged=False``. Singular grams get a small ridge first, see
    :func:`strictly_pd`.

    Plain alternation crawls when a weight heads for zero. With
    ``extrapolate`` each iteration also tries weights pushed further along
    the last multiplicative step and keeps them only if the objective ends
    up lower, so the trace stays monotone.
    """
    g, ridges = strictly_pd(g, ridge)
    y, Qs = conjugated(g)
    half = 0.5 * Qs

    def step(lam, alpha0):
        H = np.tensordot(1.0 / lam, half, axes=1)
        sol = solve_svm(H, y, C, kkt_tol, alpha0=alpha0, max_iter=svm_max_iter, validate=False)
        D = quad_forms(half, sol.alpha)
        if not np.any(D > 0):
            return sol, None, sol.objective
        new = lambda_update(D)
        return sol, new, float(0.5 * np.sum(D / new) - sol.alpha.sum())

    lam = np.full(g.l, 1.0 / g.l)
    alpha = None
    trace, lam_trace = [], [lam.copy()]
    converged = False
    omega = 1.0
    for _ in range(max_iter):
        sol, new_lam, obj = step(lam, alpha)
        alpha = sol.alpha
        if new_lam is None:
            # alpha = 0: every lambda is optimal, keep the current one
            trace.append(obj)
            converged = True
            break
        if extrapolate and np.all(new_lam > 0):
            trial = _extrapolated(lam, new_lam, omega)
            t_sol, t_lam, t_obj = step(trial, alpha)
            if t_lam is not None and t_obj < obj:
                alpha, new_lam, obj = t_sol.alpha, t_lam, t_obj
                omega = min(2 * omega, MAX_OMEGA)
            else:
                omega = 1.0
        step_size = float(np.max(np.abs(new_lam - lam)))
        lam = new_lam
        lam_trace.append(lam.copy())
        done = bool(trace) and _relative_change(obj, trace[-1]) < obj_tol
        trace.append(obj)
        if done or step_size < LAMBDA_TOL:
            converged = True
            break
    H = np.tensordot(1.0 / lam, half, axes=1)
    sol = solve_svm(H, y, C, kkt_tol, alpha0=alpha, max_iter=svm_max_iter, validate=False)
    return LinfModel(lam=lam, svm=sol, labels=y, kind="linf", objective_trace=trace,
                     lambda_trace=lam_trace, converged=converged,
                     recipes=list(g.recipes), objective=sol.objective, ridges=ridges)


def effective_slice(coefs: np.ndarray, slices) -> np.ndarray:
    S = np.asarray(slices, dtype=float)
    if S.ndim == 2:
        S = S[None]
    if S.shape[0] != coefs.shape[0]:
        raise ValidationError(f"expected {coefs.shape[0]} kernel slices, got {S.shape[0]}")
    return np.tensordot(coefs, S, axes=1)


def decision_values(alpha, labels, bias, K_eff) -> np.ndarray:
    """``f(x) = sum_i alpha_i y_i K_eff(x_i, x) - b`` for every column of ``K_eff``."""
    K_eff = np.asarray(K_eff, dtype=float)
    if K_eff.shape[0] != alpha.shape[0]:
        raise ValidationError(
            f"slices have {K_eff.shape[0]} rows but the model has {alpha.shape[0]} training points")
    return (alpha * labels) @ K_eff - bias


def sign_labels(f) -> np.ndarray:
    return np.where(np.asarray(f) >= 0, 1, -1)


def decision_linf(model: LinfModel, test_slices) -> np.ndarray:
    K_eff = effective_slice(model.kernel_coefficients(), test_slices)
    return decision_values(model.svm.alpha, model.labels, model.svm.bias, K_eff)


def predict_linf(model: LinfModel, test_slices) -> np.ndarray:
    """+-1 predictions; ``test_slices`` holds ``l`` matrices of shape ``(m, m_test)``."""
    return sign_labels(decision_linf(model, test_slices))
