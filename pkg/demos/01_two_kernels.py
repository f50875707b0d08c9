"""
Kernel weights on a small redundancy instance
=============================================

Six kernels over disjoint feature blocks, fitted with the l-infinity solver
and the two baselines. Kernels are scaled to unit mean diagonal first.
"""
import numpy as np

from mklkit import SyntheticSpec, generate
from mklkit.baselines import fit_l1, fit_l2
from mklkit.kernels import GramSet
from mklkit.linf import fit_linf, predict_linf

inst = generate(SyntheticSpec(l=6, m=100, n=12, tau=4, p=6, seed=1))

# unit mean diagonal, computed on the training grams and applied to the test slices too
f = np.array([inst.grams.m / np.trace(k.entries) for k in inst.grams.kernels])
g = GramSet([k.entries * s for k, s in zip(inst.grams.kernels, f)], inst.train_labels)
S = inst.test_slices * f[:, None, None]

C = 0.01
for name, fit in (("linf", fit_linf), ("l1", fit_l1), ("l2", fit_l2)):
    model = fit(g, C)
    acc = np.mean(predict_linf(model, S) == inst.test_labels)
    print(f"{name:5s} acc={acc:.3f}  lambda={np.round(model.lam, 3)}")

# the l-infinity weights follow sqrt(D_k); the l1 weights pile onto few kernels
li = fit_linf(g, C)
print("objective trace:", np.round(li.objective_trace, 5))
