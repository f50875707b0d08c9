"""Seeded experiment drivers: redundancy sweep, kernel-count sweep, C sensitivity.

Every driver is a pure function of its config. Repeat ``r`` uses the data seed
``repeat_seed(cfg.seed, r)`` irrespective of the sweep point, so the same
repeat sees the same points at every ``rho``, every kernel count and every C.

Within a repeat the data is cut into a *pool* (train + validation) and a test
part. When ``select_C`` is on, each method picks its C by fitting on the
train part and scoring on the validation part; the chosen C is then refit on
the whole pool. Test labels are only read when scoring the final model.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..datagen import SyntheticSpec, generate, substream
from ..errors import ValidationError
from ..kernels import (GramMatrix, GramSet, default_distance_scale, kernel_from_distance,
                       read_index_pairs, read_labels, read_matrix, repair_psd)
from .metrics import MetricsReport, accuracy, confusion_csv, confusion_matrix, write_csv
from .multiclass import decision, fit_binary, ovo_fit, ovo_predict
from ..linf import sign_labels


def repeat_seed(seed: int, r: int) -> int:
    digest = hashlib.sha256(f"{int(seed)}:repeat:{int(r)}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


@dataclass
class Split:
    """One repeat's data: pool grams, pool-by-test slices and the index bookkeeping.

    ``fit_idx`` and ``val_idx`` index into the pool; ``test_labels`` is kept
    apart and only used by :func:`score`.
    """

    pool: GramSet
    test_slices: np.ndarray
    test_labels: np.ndarray = field(repr=False)
    fit_idx: np.ndarray
    val_idx: np.ndarray


# ---------------------------------------------------------------------------
# data preparation


def _normalize(pool: np.ndarray, slices: np.ndarray):
    """Scale each kernel to unit mean diagonal using pool entries only."""
    m = pool.shape[1]
    f = m / np.einsum("kii->k", pool)
    if not np.all(np.isfinite(f) & (f > 0)):
        raise ValidationError("cannot normalise a kernel with nonpositive trace")
    return pool * f[:, None, None], slices * f[:, None, None]


def _inner_split(labels, frac: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Stratified split of pool positions into (fit, validation)."""
    fit, val = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        k = min(max(1, int(round(frac * idx.size))), idx.size)
        fit.append(idx[:k])
        val.append(idx[k:])
    return np.sort(np.concatenate(fit)), np.sort(np.concatenate(val))


def synthetic_split(cfg, p: int, r: int) -> Split:
    spec = SyntheticSpec(l=cfg.l, m=cfg.m, n=cfg.n, tau=cfg.tau, p=p,
                         seed=repeat_seed(cfg.seed, r), delta=cfg.delta)
    inst = generate(spec)
    pool, slices = inst.grams.matrices, inst.test_slices
    if cfg.normalize:
        pool, slices = _normalize(pool, slices)
    g = GramSet(list(pool), inst.train_labels, descriptor_of=dict(inst.provenance),
                recipes=list(inst.grams.recipes))
    frac = cfg.train_frac / (cfg.train_frac + cfg.val_frac)
    fit_idx, val_idx = _inner_split(g.labels, frac, substream(spec.seed, "validation"))
    return Split(g, slices, inst.test_labels, fit_idx, val_idx)


@dataclass
class FileData:
    matrices: np.ndarray
    labels: np.ndarray
    descriptor_of: dict | None
    names: list


def load_file_data(cfg) -> FileData:
    try:
        mats = np.stack([read_matrix(p) for p in cfg.matrices])
        labels = read_labels(cfg.labels)
        grouping = read_index_pairs(cfg.grouping) if cfg.grouping else None
    except OSError as exc:
        raise OSError(f"cannot read experiment inputs: {exc}") from exc
    N = labels.shape[0]
    if mats.shape[1:] != (N, N):
        raise ValidationError(f"matrices must be {N}x{N} to match the labels file")
    return FileData(mats, labels, grouping, [Path(p).name for p in cfg.matrices])


def stratified_split(labels, train_frac, val_frac, rng):
    """Per-class (train, validation, test) index arrays, each sorted."""
    parts = ([], [], [])
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_tr = max(1, int(round(train_frac * idx.size)))
        n_va = int(round(val_frac * idx.size))
        if n_tr + n_va >= idx.size:
            raise ValidationError(f"class {c} has too few points for the requested split")
        parts[0].append(idx[:n_tr])
        parts[1].append(idx[n_tr:n_tr + n_va])
        parts[2].append(idx[n_tr + n_va:])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def file_split(cfg, data: FileData, r: int) -> Split:
    rng = substream(repeat_seed(cfg.seed, r), "split")
    tr, va, te = stratified_split(data.labels, cfg.train_frac, cfg.val_frac, rng)
    pool_idx = np.concatenate([tr, va])
    M = data.matrices
    if cfg.distances:
        # kernel scale comes from pool-pool distances only
        ks = []
        for D in M:
            mu = default_distance_scale(D[np.ix_(pool_idx, pool_idx)])
            ks.append(kernel_from_distance(D, mu))
        M = np.stack(ks)
    pool = M[:, pool_idx][:, :, pool_idx]
    slices = M[:, pool_idx][:, :, te]
    pool = np.stack([repair_psd(GramMatrix(0.5 * (K + K.T))).entries for K in pool])
    if cfg.normalize:
        pool, slices = _normalize(pool, slices)
    g = GramSet(list(pool), data.labels[pool_idx], descriptor_of=data.descriptor_of,
                recipes=list(data.names))
    return Split(g, slices, data.labels[te], np.arange(tr.size), np.arange(tr.size, pool_idx.size))


# ---------------------------------------------------------------------------
# fitting and scoring


def _is_binary(labels) -> bool:
    return set(np.unique(labels).tolist()) <= {-1, 1}


def fit_predict(g: GramSet, slices, method: str, C: float, cfg) -> np.ndarray:
    opts = dict(max_iter=cfg.max_iter, obj_tol=cfg.obj_tol, svm_max_iter=cfg.svm_max_iter,
                max_rounds=cfg.max_rounds)
    if _is_binary(g.labels):
        return sign_labels(decision(fit_binary(g, method, C, **opts), slices))
    return ovo_predict(ovo_fit(g, method, C, **opts), slices)


def select_C(split: Split, method: str, cfg) -> float:
    """Grid C with the best validation accuracy (first on ties)."""
    grid = cfg.grid
    if not cfg.select_C or len(grid) == 1:
        return grid[0] if cfg.select_C else float(cfg.C)
    if split.val_idx.size == 0:
        raise ValidationError("C selection needs a nonempty validation part")
    g_fit = split.pool.subset(split.fit_idx)
    S_val = split.pool.matrices[:, split.fit_idx][:, :, split.val_idx]
    y_val = split.pool.labels[split.val_idx]
    best, best_acc = grid[0], -1.0
    for C in grid:
        acc = accuracy(y_val, fit_predict(g_fit, S_val, method, C, cfg))
        if acc > best_acc:
            best, best_acc = C, acc
    return best


def score(split: Split, method: str, C: float, cfg) -> tuple[float, np.ndarray]:
    pred = fit_predict(split.pool, split.test_slices, method, C, cfg)
    return accuracy(split.test_labels, pred), pred


class _Confusion:
    def __init__(self):
        self.truth, self.pred = {}, {}

    def add(self, method, truth, pred):
        self.truth.setdefault(method, []).append(np.asarray(truth))
        self.pred.setdefault(method, []).append(np.asarray(pred))

    def matrices(self) -> dict:
        out = {}
        for m in self.truth:
            t, p = np.concatenate(self.truth[m]), np.concatenate(self.pred[m])
            out[m] = confusion_matrix(t, p, np.unique(t))
        return out


def _ratio_methods(cfg) -> list:
    if "linf" not in cfg.methods:
        raise ValidationError("ratio experiments need linf among the methods")
    return [m for m in cfg.methods if m != "linf"]


def _splits(cfg, p: int):
    """Yield one split per repeat from synthetic data or the configured files."""
    if cfg.uses_files:
        data = load_file_data(cfg)
        for r in range(cfg.repeats):
            yield r, file_split(cfg, data, r)
    else:
        for r in range(cfg.repeats):
            yield r, synthetic_split(cfg, p, r)


def _evaluate(split: Split, cfg, conf: _Confusion) -> tuple[dict, dict]:
    accs, Cs = {}, {}
    for method in cfg.methods:
        Cs[method] = select_C(split, method, cfg)
        accs[method], pred = score(split, method, Cs[method], cfg)
        conf.add(method, split.test_labels, pred)
    return accs, Cs


def _ratio_rows(key: list, results: list, cfg, others: list) -> list:
    """Summary row: key, repeats, mean/std accuracy per method, ratio mean/var per baseline."""
    row = list(key) + [len(results)]
    for m in cfg.methods:
        a = np.array([acc[m] for acc in results])
        row += [float(a.mean()), float(a.std())]
    for o in others:
        q = np.array([acc["linf"] / acc[o] if acc[o] > 0 else np.nan for acc in results])
        row += [float(q.mean()), float(q.var())]
    return row


def _summary_header(key: list, cfg, others: list) -> list:
    h = list(key) + ["repeats"]
    for m in cfg.methods:
        h += [f"mean_acc_{m}", f"std_acc_{m}"]
    for o in others:
        h += [f"ratio_linf_{o}_mean", f"ratio_linf_{o}_var"]
    return h


def _repeat_row(key: list, r: int, accs: dict, Cs: dict, cfg, others: list) -> list:
    row = list(key) + [r]
    row += [Cs[m] for m in cfg.methods] + [accs[m] for m in cfg.methods]
    row += [accs["linf"] / accs[o] if accs[o] > 0 else float("nan") for o in others]
    return row


def _repeat_header(key: list, cfg, others: list) -> list:
    return (list(key) + ["repeat"] + [f"C_{m}" for m in cfg.methods]
            + [f"acc_{m}" for m in cfg.methods] + [f"ratio_linf_{o}" for o in others])


@dataclass
class ExperimentResult:
    name: str
    repeats: MetricsReport
    summary: MetricsReport
    confusions: dict

    def write(self, directory) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.name}_repeats.csv", out / f"{self.name}_summary.csv"]
        write_csv(paths[0], self.repeats.header, self.repeats.rows)
        write_csv(paths[1], self.summary.header, self.summary.rows)
        for method, (classes, M) in sorted(self.confusions.items()):
            path = out / f"{self.name}_confusion_{method}.csv"
            path.write_text(confusion_csv(classes, M))
            paths.append(path)
        return paths


def _result(name, rep_header, rep_rows, sum_header, sum_rows, conf: _Confusion) -> ExperimentResult:
    # per-repeat accuracies of the first listed method
    col = next(i for i, h in enumerate(rep_header) if h.startswith("acc_"))
    accs = [float(row[col]) for row in rep_rows]
    mats = conf.matrices()
    rep = MetricsReport(accuracies=accs, header=rep_header, rows=rep_rows)
    summ = MetricsReport(header=sum_header, rows=sum_rows)
    if mats:
        first = sorted(mats)[0]
        summ.classes, summ.confusion = mats[first]
    return ExperimentResult(name, rep, summ, mats)


def run_redundancy_experiment(cfg) -> ExperimentResult:
    """Accuracy ratios of linf over each baseline as the redundancy ``rho = p/l`` varies."""
    if cfg.uses_files:
        raise ValidationError("the redundancy experiment needs synthetic data")
    others = _ratio_methods(cfg)
    conf = _Confusion()
    rep_rows, sum_rows = [], []
    for p in sorted(dict.fromkeys(cfg.p_values)):
        rho = p / cfg.l
        results = []
        for r, split in _splits(cfg, p):
            accs, Cs = _evaluate(split, cfg, conf)
            results.append(accs)
            rep_rows.append(_repeat_row([p, rho], r, accs, Cs, cfg, others))
        sum_rows.append(_ratio_rows([p, rho], results, cfg, others))
    return _result("redundancy", _repeat_header(["p", "rho"], cfg, others), rep_rows,
                   _summary_header(["p", "rho"], cfg, others), sum_rows, conf)


def run_kernel_count_sweep(cfg) -> ExperimentResult:
    """Ratios on nested prefixes ``{0..c-1}`` of the kernel list, in file order."""
    others = _ratio_methods(cfg)
    conf = _Confusion()
    results: dict = {}
    rep_rows = []
    for r, split in _splits(cfg, cfg.p):
        l = split.pool.l
        counts = sorted(dict.fromkeys(cfg.kernel_counts)) or list(range(1, l + 1))
        if counts[-1] > l:
            raise ValidationError(f"kernel count {counts[-1]} exceeds the {l} available kernels")
        for c in counts:
            ks = list(range(c))
            sub = Split(split.pool.select_kernels(ks), split.test_slices[ks], split.test_labels,
                        split.fit_idx, split.val_idx)
            accs, Cs = _evaluate(sub, cfg, conf)
            results.setdefault(c, []).append(accs)
            rep_rows.append(_repeat_row([c], r, accs, Cs, cfg, others))
    rep_rows.sort(key=lambda row: (row[0], row[1]))
    sum_rows = [_ratio_rows([c], results[c], cfg, others) for c in sorted(results)]
    return _result("kernels", _repeat_header(["kernels"], cfg, others), rep_rows,
                   _summary_header(["kernels"], cfg, others), sum_rows, conf)


def run_c_sensitivity(cfg) -> ExperimentResult:
    """Test accuracy per method at each C of the grid (duplicates dropped)."""
    grid = cfg.grid
    conf = _Confusion()
    acc: dict = {}
    rep_rows = []
    fixed = replace(cfg, select_C=False)
    for r, split in _splits(cfg, cfg.p):
        for C in grid:
            row = [C, r]
            for m in cfg.methods:
                a, pred = score(split, m, C, fixed)
                acc.setdefault((C, m), []).append(a)
                conf.add(m, split.test_labels, pred)
                row.append(a)
            rep_rows.append(row)
    rep_rows.sort(key=lambda row: (grid.index(row[0]), row[1]))
    header = ["C", "repeat"] + [f"acc_{m}" for m in cfg.methods]
    gap = "linf" in cfg.methods and "l1" in cfg.methods
    sum_header = ["C", "repeats"] + [h for m in cfg.methods for h in (f"mean_acc_{m}", f"std_acc_{m}")]
    if gap:
        sum_header.append("gap_linf_l1")
    sum_rows = []
    for C in grid:
        row = [C, cfg.repeats]
        for m in cfg.methods:
            a = np.array(acc[(C, m)])
            row += [float(a.mean()), float(a.std())]
        if gap:
            row.append(float(np.mean(acc[(C, "linf")]) - np.mean(acc[(C, "l1")])))
        sum_rows.append(row)
    return _result("csweep", header, rep_rows, sum_header, sum_rows, conf)


EXPERIMENTS = {
    "redundancy": run_redundancy_experiment,
    "kernels": run_kernel_count_sweep,
    "csweep": run_c_sensitivity,
}
