"""Text model files: INI-style ``key = value`` sections.

Every model is written as a ``[model]`` section plus kind-specific sections
(``[group.<j>]`` for composite models, ``[round.<t>]`` for boosting). A
one-vs-one bundle prefixes each pairwise model's sections with
``pair.<a>.<b>:``. Floats are written with ``repr`` so files round-trip
exactly.
"""
from __future__ import annotations

import configparser
import hashlib
import io

import numpy as np

from .boost import BoostModel, BoostRound
from .ckl import CklModel
from .errors import ValidationError
from .linf import LinfModel
from .qp import SvmSolution

FORMAT_VERSION = 1


def label_hash(labels) -> str:
    y = np.asarray(labels, dtype=np.int64)
    return hashlib.sha256(y.tobytes()).hexdigest()


def _vec(a) -> str:
    return ",".join(repr(float(v)) for v in np.atleast_1d(np.asarray(a, dtype=float)))


def _ivec(a) -> str:
    return ",".join(str(int(v)) for v in a)


def _parse_vec(s: str) -> np.ndarray:
    s = s.strip()
    return np.array([float(v) for v in s.split(",")]) if s else np.zeros(0)


def _parse_ivec(s: str) -> list:
    s = s.strip()
    return [int(v) for v in s.split(",")] if s else []


def _svm_fields(sol: SvmSolution) -> dict:
    C = sol.C
    return {
        "C": _vec(C) if np.ndim(C) else repr(float(C)),
        "alpha": _vec(sol.alpha),
        "bias": repr(float(sol.bias)),
        "objective": repr(float(sol.objective)),
        "kkt_violation": repr(float(sol.kkt_violation)),
        "svm_converged": str(bool(sol.converged)),
    }


def _svm_from(sec) -> SvmSolution:
    C = _parse_vec(sec["C"])
    C = float(C[0]) if C.size == 1 else C
    alpha = _parse_vec(sec["alpha"])
    Cv = np.broadcast_to(np.asarray(C, dtype=float), alpha.shape)
    return SvmSolution(alpha=alpha, bias=float(sec["bias"]), C=C,
                       objective=float(sec["objective"]),
                       support_indices=np.flatnonzero(alpha > 1e-8 * Cv),
                       kkt_violation=float(sec.get("kkt_violation", "0")),
                       converged=sec.get("svm_converged", "True") == "True")


def to_sections(model, prefix: str = "") -> dict:
    """Map section name -> ``{key: str}`` for any fitted model."""
    head = {"version": str(FORMAT_VERSION)}
    sections = {}
    if isinstance(model, LinfModel):
        head.update(kind=model.kind, convention=model.convention, labels=_ivec(model.labels),
                    label_hash=label_hash(model.labels), converged=str(model.converged),
                    recipes="; ".join(map(str, model.recipes)))
        head["lambda"] = _vec(model.lam)
        head.update(_svm_fields(model.svm))
        head["model_objective"] = repr(float(model.objective))
    elif isinstance(model, CklModel):
        head.update(kind="ckl", convention=model.convention, labels=_ivec(model.labels),
                    label_hash=label_hash(model.labels), converged=str(model.converged),
                    stalled=str(model.stalled), ties=_ivec(model.ties),
                    recipes="; ".join(map(str, model.recipes)))
        head["gamma"] = _vec(model.gamma)
        head.update(_svm_fields(model.svm))
        head["model_objective"] = repr(float(model.objective))
        head["gap"] = repr(float(model.gap))
        for j, (ks, w) in enumerate(zip(model.groups, model.inner_lambda)):
            sections[f"{prefix}group.{j}"] = {"kernels": _ivec(ks), "lambda": _vec(w)}
    elif isinstance(model, BoostModel):
        head.update(kind="boost", labels=_ivec(model.labels), label_hash=label_hash(model.labels),
                    max_rounds=str(model.max_rounds), stop_reason=model.stop_reason,
                    n_rounds=str(len(model.rounds)))
        for t, r in enumerate(model.rounds):
            sec = {"kernel_index": str(r.kernel_index), "beta": repr(float(r.beta)),
                   "error": repr(float(r.error))}
            sec.update(_svm_fields(r.svm))
            sections[f"{prefix}round.{t}"] = sec
    else:
        raise ValidationError(f"cannot serialise {type(model).__name__}")
    return {f"{prefix}model": head, **sections}


def from_sections(cp, prefix: str = ""):
    head = cp[f"{prefix}model"]
    if int(head.get("version", "0")) != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format version {head.get('version')}")
    kind = head["kind"]
    labels = np.array(_parse_ivec(head["labels"]), dtype=float)
    if label_hash(labels) != head["label_hash"]:
        raise ValidationError("training-label hash mismatch; model file is corrupt")
    recipes = [r for r in head.get("recipes", "").split("; ") if r]
    if kind in ("linf", "l1", "l2", "svm"):
        return LinfModel(lam=_parse_vec(head["lambda"]), svm=_svm_from(head), labels=labels,
                         kind=kind, converged=head["converged"] == "True",
                         convention=head["convention"], recipes=recipes,
                         objective=float(head["model_objective"]))
    if kind == "ckl":
        groups, inner = [], []
        j = 0
        while f"{prefix}group.{j}" in cp:
            sec = cp[f"{prefix}group.{j}"]
            groups.append(_parse_ivec(sec["kernels"]))
            inner.append(_parse_vec(sec["lambda"]))
            j += 1
        return CklModel(gamma=_parse_vec(head["gamma"]), inner_lambda=inner, groups=groups,
                        svm=_svm_from(head), labels=labels, ties=_parse_ivec(head["ties"]),
                        converged=head["converged"] == "True", stalled=head["stalled"] == "True",
                        convention=head["convention"], objective=float(head["model_objective"]),
                        gap=float(head.get("gap", "0")), recipes=recipes)
    if kind == "boost":
        rounds = []
        for t in range(int(head["n_rounds"])):
            sec = cp[f"{prefix}round.{t}"]
            rounds.append(BoostRound(int(sec["kernel_index"]), _svm_from(sec),
                                     float(sec["beta"]), float(sec["error"])))
        return BoostModel(rounds, int(head["max_rounds"]), labels, stop_reason=head["stop_reason"])
    raise ValidationError(f"unknown model kind {kind!r}")


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    return cp


def dumps_sections(sections: dict) -> str:
    cp = _parser()
    for name, fields in sections.items():
        cp[name] = fields
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads_parser(text: str) -> configparser.ConfigParser:
    cp = _parser()
    cp.read_string(text)
    return cp


def dumps(model) -> str:
    return dumps_sections(to_sections(model))


def loads(text: str):
    return from_sections(loads_parser(text))


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(model))


def load_model(path):
    with open(path) as fh:
        return loads(fh.read())


# ---------------------------------------------------------------------------
# bundles: what the command line writes (scaling plus one or many models)


def dumps_bundle(models: dict, classes, scales, distance_scales=None, indices=None) -> str:
    """Serialise ``{(a, b): model}`` (or ``{None: model}`` for a binary fit).

    ``scales`` are the per-kernel factors applied to training grams, which
    prediction must apply to test slices too; ``distance_scales`` holds the
    ``mu`` of ``exp(-d/mu)`` when the inputs were distances.
    """
    head = {"version": str(FORMAT_VERSION), "classes": _ivec(classes), "scales": _vec(scales),
            "pairs": "; ".join("" if k is None else f"{k[0]},{k[1]}" for k in models)}
    if distance_scales is not None:
        head["distance_scales"] = _vec(distance_scales)
    sections = {"bundle": head}
    for key, model in models.items():
        prefix = "" if key is None else f"pair.{key[0]}.{key[1]}:"
        sections.update(to_sections(model, prefix))
        if key is not None:
            sections[f"{prefix}model"]["train_indices"] = _ivec(indices[key])
    return dumps_sections(sections)


def loads_bundle(text: str) -> dict:
    cp = loads_parser(text)
    if "bundle" not in cp:
        # a bare model file: binary, unscaled
        model = from_sections(cp)
        return {"classes": [-1, 1], "scales": None, "distance_scales": None,
                "models": {None: model}, "indices": {}}
    head = cp["bundle"]
    models, indices = {}, {}
    for token in head["pairs"].split("; "):
        if token == "":
            models[None] = from_sections(cp)
            continue
        a, b = (int(v) for v in token.split(","))
        prefix = f"pair.{a}.{b}:"
        models[(a, b)] = from_sections(cp, prefix)
        indices[(a, b)] = np.array(_parse_ivec(cp[f"{prefix}model"]["train_indices"]))
    ds = head.get("distance_scales")
    return {"classes": _parse_ivec(head["classes"]), "scales": _parse_vec(head["scales"]),
            "distance_scales": _parse_vec(ds) if ds else None, "models": models,
            "indices": indices}
