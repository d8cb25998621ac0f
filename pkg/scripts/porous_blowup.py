"""Porous-medium blow-up: certified horizon vs detected blow-up time.

Finds the amplitude where psi changes sign, scales it by a factor and runs
the solver at several resolutions.
"""

import argparse
import math

import numpy as np
from scipy.optimize import brentq

from crossdiff import certificates, dynamics, functionals
from crossdiff.mesh import build_grid, field_from_function
from crossdiff.models import build_model

MODEL = {
    "m": 1,
    "diffusion": {"family": "diagonal_power", "exponents": [2]},
    "reaction": {"family": "potential_pair", "coef": 1, "q": 3, "B_coef": 0.8, "B_power": 5},
}


def data(n, M):
    return field_from_function(build_grid([1.0], [n], "dirichlet0"), lambda x: M * np.sin(np.pi * x))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--factor", type=float, default=1.5)
    ap.add_argument("--cells", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--threshold", type=float, default=1e4)
    args = ap.parse_args()

    model = build_model(MODEL)
    fine = max(args.cells)
    M_star = brentq(lambda M: functionals.levine_psi(data(fine, M), model), 1.0, 100.0, xtol=1e-12)
    M = args.factor * M_star
    rep = certificates.scalar_certificate(
        lambda u: u * u, lambda u: u**3, certificates.power_pair_potential(2, 3), math.sqrt(1.5), data(fine, M), a_prime=lambda u: 2 * u
    )
    print(f"psi sign change at M={M_star:.6f}; running M={M:.6f}")
    print(rep.to_text())
    for n in args.cells:
        r = dynamics.run(model, data(n, M), 2 * rep.horizon, dynamics.RunConfig(threshold=args.threshold, diagnostics=()))
        ratio = r.time / rep.horizon if math.isfinite(rep.horizon) else float("nan")
        print(f"cells={n:5d} {r.termination:16s} t={r.time:.6g} t/T={ratio:.3f}")


if __name__ == "__main__":
    main()
