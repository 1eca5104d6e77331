"""Which critical point carries the least action?

For attractive coupling above omega_star the asymmetric profiles exist
alongside the symmetric one.  Ranking them by action shows the profile
with a single distinguished edge at the bottom, and compares the
symmetric action with the half-line level d_infinity as beta moves past
beta*.
"""
import numpy as np

from graphwave.functionals import d_infinity, rank_critical_points, symmetric_action_closed_form
from graphwave.graph_core import ModelParams
from graphwave.profiles import compute_beta_star


def main():
    for N in (3, 4):
        P = ModelParams(3, 25.0 * (N / 3) ** 2, -1.0, N)
        print(f"N={N}, omega={P.omega:.3f}")
        for row in rank_critical_points(P, points_per_edge=1024):
            print(f"  {row.label:18s} S = {row.S:.10f}")

    p, om, N = 3, 25.0, 3
    bstar = compute_beta_star(p, om, N)
    print(f"\nbeta* = {bstar:.10f}, d_infinity = {d_infinity(p, om):.10f}")
    for b in np.linspace(1.2 * bstar, -N / np.sqrt(om) * 1.01, 6):
        S = symmetric_action_closed_form(ModelParams(p, om, b, N))
        print(f"  beta = {b:9.5f}  S_sym = {S:.6f}  below d_infinity: {S < d_infinity(p, om)}")


if __name__ == "__main__":
    main()
