"""Method dispatch and the one-vs-one multiclass reduction."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..baselines import fit_l1, fit_l2, fit_svm
from ..boost import BoostModel, decision_boost, fit_boost
from ..ckl import CklModel, decision_ckl, fit_ckl
from ..errors import ValidationError
from ..kernels import GramSet
from ..linf import LinfModel, decision_linf, fit_linf

METHODS = ("l1", "l2", "linf", "ckl", "boost", "svm")


def fit_binary(g: GramSet, method: str, C: float = 1.0, **opts):
    """Fit one binary model; ``opts`` go to the method (``max_iter``, ``obj_tol`` ...)."""
    if method == "linf":
        return fit_linf(g, C, **_pick(opts, "max_iter", "obj_tol", "kkt_tol", "svm_max_iter"))
    if method == "ckl":
        return fit_ckl(g, C, **_pick(opts, "max_iter", "obj_tol", "kkt_tol", "svm_max_iter"))
    if method == "l1":
        return fit_l1(g, C, **_pick(opts, "max_iter", "obj_tol", "kkt_tol"))
    if method == "l2":
        return fit_l2(g, C, **_pick(opts, "kkt_tol"))
    if method == "svm":
        return fit_svm(g, C, **_pick(opts, "kernel_index", "kkt_tol"))
    if method == "boost":
        return fit_boost(g, C, **_pick(opts, "max_rounds", "kkt_tol"))
    raise ValidationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def _pick(opts: dict, *keys) -> dict:
    return {k: opts[k] for k in keys if opts.get(k) is not None}


def decision(model, slices) -> np.ndarray:
    if isinstance(model, LinfModel):
        return decision_linf(model, slices)
    if isinstance(model, CklModel):
        return decision_ckl(model, slices)
    if isinstance(model, BoostModel):
        return decision_boost(model, slices)
    raise ValidationError(f"unsupported model type {type(model).__name__}")


@dataclass
class OvoModel:
    """Pairwise models keyed by ``(a, b)`` with ``a < b``; ``a`` maps to +1."""

    classes: np.ndarray
    models: dict = field(default_factory=dict)
    indices: dict = field(default_factory=dict)


def ovo_fit(g: GramSet, method: str, C: float = 1.0, **opts) -> OvoModel:
    labels = np.asarray(g.labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValidationError("need at least two classes")
    for c in classes:
        if np.sum(labels == c) < 2:
            raise ValidationError(f"class {c} has fewer than 2 training points")
    out = OvoModel(classes=classes)
    for a, b in combinations(classes.tolist(), 2):
        idx = np.flatnonzero((labels == a) | (labels == b))
        sub = g.subset(idx)
        sub.labels = np.where(labels[idx] == a, 1, -1)
        out.models[(a, b)] = fit_binary(sub, method, C, **opts)
        out.indices[(a, b)] = idx
    return out


def ovo_scores(ovo: OvoModel, slices) -> tuple[np.ndarray, np.ndarray]:
    """Vote counts and summed decision values, each of shape ``(n_test, n_classes)``."""
    S = np.asarray(slices, dtype=float)
    if S.ndim == 2:
        S = S[None]
    pos = {c: i for i, c in enumerate(ovo.classes.tolist())}
    n_test = S.shape[2]
    votes = np.zeros((n_test, len(pos)))
    sums = np.zeros((n_test, len(pos)))
    for (a, b), model in ovo.models.items():
        f = decision(model, S[:, ovo.indices[(a, b)], :])
        win_a = f >= 0
        votes[win_a, pos[a]] += 1
        votes[~win_a, pos[b]] += 1
        sums[:, pos[a]] += f
        sums[:, pos[b]] -= f
    return votes, sums


def ovo_predict(ovo: OvoModel, slices) -> np.ndarray:
    """Majority vote; ties go to the larger summed decision value, then the lowest class id."""
    votes, sums = ovo_scores(ovo, slices)
    out = np.empty(votes.shape[0], dtype=ovo.classes.dtype)
    for t in range(votes.shape[0]):
        top = np.flatnonzero(votes[t] == votes[t].max())
        if top.size > 1:
            best = sums[t, top].max()
            top = top[sums[t, top] == best]
        out[t] = ovo.classes[top[0]]
    return out
