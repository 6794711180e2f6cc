"""Relaxation of a quartic oscillator toward its Gibbs equilibrium.

Starting from a standard normal ensemble, the overdamped dynamics with
gradient 2 q^3 relaxes toward the equilibrium density proportional to
exp(-q^4 / 2). The density at an intermediate time is estimated pointwise
by averaging weighted backward paths, with no histogram binning: each
evaluation point gets its own expectation.

Run: python3 demos/density_relaxation.py
"""

import numpy as np

from mcbridge import (DensityQuery, MonomialGrad, PhysicalParams,
                      RandomStream, box_smooth, density_overdamped,
                      equilibrium_quadrature, make_grid)


def standard_normal(q):
    return np.exp(-0.5 * q[:, 0] ** 2) / np.sqrt(2.0 * np.pi)


def main():
    params = PhysicalParams(beta=1.0, mu=1.0, dim=1)
    grid = make_grid(0.0, 0.75, 1e-3)
    xs = np.linspace(-3.0, 3.0, 41)

    query = DensityQuery(xs[:, None], 0.75, standard_normal, 2000, grid,
                         params, MonomialGrad(), RandomStream(2024))
    estimates = density_overdamped(query)
    dens = box_smooth(np.array([e.mean for e in estimates]), 1)

    target = equilibrium_quadrature(MonomialGrad(), 1.0, (-6.0, 6.0),
                                    10_001)(xs)
    gap = np.trapezoid(np.abs(dens - target), xs)

    print(f"{'q':>6} {'estimate':>10} {'equilibrium':>12} {'std_error':>10}")
    for x, d, t, e in zip(xs[::4], dens[::4], target[::4], estimates[::4]):
        print(f"{x:6.2f} {d:10.4f} {t:12.4f} {e.std_error:10.4f}")
    print(f"\nL1 distance to equilibrium at t = 0.75: {gap:.4f}")
    print("the remaining gap is mostly transient: the ensemble has not "
          "fully relaxed yet")


if __name__ == "__main__":
    main()
