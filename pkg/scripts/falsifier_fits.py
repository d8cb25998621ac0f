"""Fit the constants C(eps) of the interpolation inequalities and report
violations on fresh draws."""

import argparse

from crossdiff import certificates


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--inequality", choices=certificates.INEQUALITIES, nargs="+", default=["intineq0", "intineqnk"])
    ap.add_argument("--k", type=float, nargs="+", default=[0.0, 1.0, 2.0])
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--eps", type=float, nargs="+", default=[1.0, 0.1, 0.01])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for ineq in args.inequality:
        ks = [0.0] if ineq == "intineq0" else args.k
        for k in ks:
            for N in args.dims:
                r = certificates.inequality_falsifier(ineq, k, args.eps, N, trials=args.trials, seed=args.seed)
                cs = "  ".join(f"C({e:g})={r.C[e]:.4g}" for e in r.eps)
                print(f"{ineq:10s} k={k:g} N={N}  {cs}  violations={r.violations}")


if __name__ == "__main__":
    main()
