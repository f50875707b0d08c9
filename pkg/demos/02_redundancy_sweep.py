"""
Accuracy ratio against redundancy
=================================

Runs the desk-scale sweep (l=10 kernels, m=150 points, p in {1, 2, 5, 10})
and prints the ratio of l-infinity to l1 test accuracy per rho = p / l.
About 20 seconds on a laptop.
"""
from mklkit.harness.config import desk_scale_config
from mklkit.harness.experiments import run_redundancy_experiment

cfg = desk_scale_config(repeats=10, seed=0)
res = run_redundancy_experiment(cfg)

h = res.summary.header
print(f"{'rho':>5} {'linf':>7} {'l1':>7} {'l2':>7} {'linf/l1':>8} {'linf/l2':>8}")
for row in res.summary.rows:
    r = dict(zip(h, row))
    print(f"{r['rho']:5.1f} {r['mean_acc_linf']:7.3f} {r['mean_acc_l1']:7.3f} {r['mean_acc_l2']:7.3f}"
          f" {r['ratio_linf_l1_mean']:8.3f} {r['ratio_linf_l2_mean']:8.3f}")

# the same numbers, as files
print(*res.write("redundancy_out"), sep="\n")
