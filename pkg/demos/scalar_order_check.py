#!/usr/bin/env python3
"""Empirical order of the generic product scheme on a scalar product ODE.

u' = cos(u) * u splits into a non-stiff factor (evaluated explicitly at
lagged-stage averages) and a stiff factor (implicit, current-stage
averages).  Each stage is a scalar nonlinear solve by damped Newton; the
measured slope of log(error) vs log(tau) should sit at 2 for the
second-order tableau.
"""

import numpy as np

from prkflow.tableau import measure_scalar_order, prk2_tableau

t = prk2_tableau()
taus = [0.1 / 2 ** j for j in range(6)]
result = measure_scalar_order(t, np.cos, lambda u: u, u0=1.0, T=1.0, tau_list=taus)

print("  tau         |u(T) - ref|")
for tau, err in zip(result.taus, result.errors):
    print(f"  {tau:9.3e}  {err:12.5e}")
print(f"\nleast-squares slope: {result.slope:.4f}  (expected ~2)")
print(f"RK4 reference value at T = 1: {result.u_reference:.12f}")
