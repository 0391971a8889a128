"""
When the balance condition fails
================================

The pair (w = 1, v = (xy)^(-alpha)) satisfies the pointwise, A_p and
doubling requirements, yet the balance quotient at the corner behaves like
r^((2 - 2 alpha)/q + 1 - 2/p).  A negative exponent means the quotient
blows up as balls shrink, and the scan reports "fails".
"""

from matweight.balance import admissible_pair_report, balance_scan, exponent_condition
from matweight.cubes import CubeFamily
from matweight.families import default_grid, sample_family

# %%
# Two instances: one negative exponent, one positive.
for alpha, p, q in ((0.9, 1.5, 2.0), (0.5, 2.0, 3.0)):
    g = default_grid("power", 256)
    w = sample_family("constant", g, value=1.0)
    v = sample_family("power", g, mode="cell-average", exponent=-alpha)
    rep = balance_scan(w, v, p, q)
    target = (2 - 2 * alpha) / q + 1 - 2 / p
    print(f"alpha={alpha} p={p} q={q}: slope {rep.loglog_slope:+.4f} (closed form {target:+.4f}), "
          f"verdict {rep.verdict}, worst ball at {rep.worst_ball.center}")

# %%
# The full admissibility report for the failing pair: items 1-3 hold, balance
# fails for every q tried.
g = default_grid("power", 128)
w = sample_family("constant", g, value=1.0)
v = sample_family("power", g, mode="cell-average", exponent=-0.9)
adm = admissible_pair_report(w, v, 1.5, CubeFamily.dyadic(g), [1.75, 2.0, 2.5, 3.0])
print("items:", adm.to_json()["items"], " admissible:", adm.admissible)

# %%
# The exponent relation that guarantees balance for distortion pairs.
c = exponent_condition(1.5, 2.0, 2.0, 2)
print(f"t=1.5, s=2, p=n=2: satisfied {c.satisfied}, q = {c.q:.3f} (epsilon {c.epsilon})")
