"""
Convex surrogates, one at a time
================================

Each SCA surrogate touches its true function at the reference and stays on
one side of it everywhere else. This script prints both values along a line
through the reference so the gap is visible.
"""
import numpy as np

from ecofl import surrogates as S
from ecofl.channel import gain_constant
from ecofl.eco import initialize
from ecofl.scenario import default_scenario

cfg = default_scenario()
ref = initialize(cfg)

# log channel gain of UE 0 at slot 10, UAV moved along x
n, k = 10, 0
lb = S.gain_log_lb(ref, k, n)
print("ln g(q) vs its lower bound, UAV shifted along x")
for dx in (-200, -50, 0, 50, 200):
    q = ref.q_r[n] + [dx, 0.0]
    true = np.log(gain_constant(cfg.f_c) / S.squared_distance(q[None], cfg)[k, 0])
    print(f"  dx={dx:+5d} m   true={true:9.4f}   bound={lb(q):9.4f}")

# sign approximation of participation and its tangent
print("\ntanh(beta D) vs tangent at D_r = 0.11 Mb")
ub = S.participation_affine_ub(0.11, cfg.beta)
for d in (0.0, 0.05, 0.11, 0.3, 1.0):
    print(f"  D={d:4.2f} Mb   a~={S.sign_approx(d, cfg.beta):.4f}   tangent={ub({'D': d}):.4f}")

# the interference term needs the coupling variable At
r2 = S.rate_r2_lb(ref, n, k)
B = ref.B_r[:, n - 1]
At = r2.tightest_At(ref.q_r[n])
print(f"\nR2 at the reference: true={S.true_r2(ref.q_r[n], B, k, cfg):.6f}  bound={r2(B, At):.6f}")
print(f"R2 with At loosened by 0.5: bound={r2(B, At + 0.5):.6f} (lower, still valid)")
