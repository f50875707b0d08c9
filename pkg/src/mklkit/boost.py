"""Discrete AdaBoost whose weak learners are single-kernel SVMs.

Sample weights enter the SVM through per-sample box constraints
``C_i = C * m * w_i`` instead of resampling, so a fit is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .kernels import GramSet, binary_labels
from .linf import decision_values, sign_labels
from .qp import DEFAULT_KKT_TOL, SvmSolution, solve_svm


@dataclass
class BoostRound:
    kernel_index: int
    svm: SvmSolution
    beta: float
    error: float


@dataclass
class BoostModel:
    rounds: list
    max_rounds: int
    labels: np.ndarray
    train_error_trace: list = field(default_factory=list)
    weight_sums: list = field(default_factory=list)
    stop_reason: str = "max_rounds"


def round_weight(error: float, m: int) -> float:
    """``0.5 ln((1 - e) / e)`` with ``e`` floored at ``1/(2m)``."""
    e = max(float(error), 1.0 / (2 * m))
    return 0.5 * np.log((1.0 - e) / e)


def _weak_fit(K, y, C_vec, kkt_tol):
    Q = K * np.outer(y, y)
    sol = solve_svm(Q, y, C_vec, kkt_tol, validate=False)
    h = sign_labels(decision_values(sol.alpha, y, sol.bias, K))
    return sol, h


def fit_boost(g: GramSet, C: float = 1.0, max_rounds: int = 10,
              kkt_tol: float = DEFAULT_KKT_TOL) -> BoostModel:
    """Boost per-kernel SVMs; each round keeps the kernel with the lowest weighted error.

    Stops early when the best weighted error reaches 1/2, or after a round
    with zero error (whose weight is capped at ``0.5 ln(2m - 1)``).
    """
    if max_rounds < 1:
        raise ValidationError("max_rounds must be >= 1")
    y = binary_labels(g.labels)
    m = g.m
    mats = g.matrices
    w = np.full(m, 1.0 / m)
    rounds, errors, sums = [], [], []
    votes = np.zeros(m)
    reason = "max_rounds"
    for _ in range(max_rounds):
        best = None
        for k in range(g.l):
            sol, h = _weak_fit(mats[k], y, C * m * w, kkt_tol)
            err = float(w[h != y].sum())
            if best is None or err < best[0]:
                best = (err, k, sol, h)
        err, k, sol, h = best
        if err >= 0.5:
            reason = "weak_learner_error"
            break
        beta = round_weight(err, m)
        rounds.append(BoostRound(k, sol, beta, err))
        votes += beta * h
        errors.append(float(np.mean(sign_labels(votes) != y)))
        w = w * np.exp(-beta * y * h)
        w = w / w.sum()
        sums.append(float(w.sum()))
        if err == 0.0:
            reason = "perfect_learner"
            break
    return BoostModel(rounds, max_rounds, y, errors, sums, reason)


def _check_slices(model: BoostModel, slices) -> np.ndarray:
    S = np.asarray(slices, dtype=float)
    if S.ndim == 2:
        S = S[None]
    needed = max((r.kernel_index for r in model.rounds), default=-1)
    if S.shape[0] <= needed:
        raise ValidationError(f"model uses kernel {needed} but only {S.shape[0]} slices were given")
    if S.shape[1] != model.labels.shape[0]:
        raise ValidationError("slice rows must match the number of training points")
    return S


def decision_boost(model: BoostModel, test_slices) -> np.ndarray:
    S = _check_slices(model, test_slices)
    f = np.zeros(S.shape[2])
    for r in model.rounds:
        h = sign_labels(decision_values(r.svm.alpha, model.labels, r.svm.bias, S[r.kernel_index]))
        f += r.beta * h
    return f


def predict_boost(model: BoostModel, test_slices) -> np.ndarray:
    """Weighted vote ``sign(sum_t beta_t h_t(x))``; a zero vote maps to +1."""
    return sign_labels(decision_boost(model, test_slices))
