"""Morse indices of the symmetric standing wave across the bifurcation.

For p = 3 and both signs of the coupling, the indices (n1, n2) of the two
linearized operators are counted twice: by shooting on the half-line
problem and by the inertia of the finite-element matrices.  Crossing
omega_star adds N - 1 negative directions to L1 for attractive coupling
and removes N - 1 of them for repulsive coupling.
"""
from graphwave.graph_core import ModelParams
from graphwave.spectra import morse_by_inertia, morse_by_shooting
from graphwave.profiles import symmetric_spec


def main():
    print(f"{'beta':>5} {'N':>2} {'omega':>7}  shooting  inertia")
    for beta in (-1.0, 1.0):
        for N in (2, 3):
            base = ModelParams(3, 1.0, beta, N)
            for om in (0.5 * (base.omega_floor + base.omega_star), base.omega_star,
                       3 * base.omega_floor):
                spec = symmetric_spec(base.with_omega(om))
                s, i = morse_by_shooting(spec), morse_by_inertia(spec)
                print(f"{beta:5.0f} {N:2d} {om:7.2f}  {(s.n1, s.n2)!s:>8}  {(i.n1, i.n2)!s:>7}")


if __name__ == "__main__":
    main()
