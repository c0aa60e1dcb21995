"""
ECO against the baselines
=========================

Default scenario at an 8.065 Mb model. ECO optimizes trajectory,
participation and powers; the baselines freeze either participation
(fixed: everyone, random: a_min per slot) or the trajectory (STR, CUR).
Each run takes a few seconds.
"""
import warnings

from ecofl.eco import baseline_participation, heuristic_trajectory, run_eco
from ecofl.scenario import MB, default_scenario

warnings.filterwarnings("ignore", message="Solution may be inaccurate")
cfg = default_scenario(Q=8.065 * MB)

runs = {"ECO": run_eco(cfg)}
for kind in ("fixed", "random"):
    runs[kind] = baseline_participation(kind, cfg, seed=0)
for kind in ("STR", "CUR"):
    runs[kind] = heuristic_trajectory(kind, cfg)

print(f"{'run':8s} {'feasible':9s} {'energy [J]':>12s} {'fly':>9s} {'hover':>9s} {'comm':>7s} {'comp':>7s}")
for name, rep in runs.items():
    t = rep.energy.totals()
    print(f"{name:8s} {str(rep.feasible):9s} {t['total']:12.2f} {t['fly']:9.1f} {t['hover']:9.1f} "
          f"{t['comm']:7.2f} {t['comp']:7.1f}")

eco = runs["ECO"]
print("\nECO participants per slot:", eco.state.a.sum(axis=0).tolist())
print("accuracy bound %.3f (target %.1f)" % (eco.accuracy, cfg.eps_G))
