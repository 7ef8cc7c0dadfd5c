"""
Why the bias has to be trained
==============================

Fit the constant label 1 with ``ReLU(w x + b)^3`` on standard Gaussian
inputs and penalize ``lam w^2``. With a trainable bias the loss is zero at
``(w, b) = (0, 1)`` for every ``lam``, so the weight collapses for free.
With the bias frozen at 0 the weight stays near 0.47 until ``lam`` is large
enough to make ``w = 0`` the global minimizer.
"""

from sospderand.nn import toy_1d

lams = [1e-3, 1e-2, 1e-1, 0.3, 0.5, 1.0, 10.0]

print(" lambda    w*(frozen b)   w*(trained b)  b*(trained)")
for lam in lams:
    fr = toy_1d(lam, train_bias=False)
    tr = toy_1d(lam, train_bias=True)
    print(f"{lam:7.3g}   {fr.w_star:12.5f}   {tr.w_star:12.2e}   {tr.b_star:10.6f}")

# the frozen-bias minimizer drops to zero once lam exceeds
# max_w (2 sqrt(2/pi) w - 7.5 w^4), which is about 0.45
