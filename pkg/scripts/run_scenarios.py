"""Run every scenario file under scenarios/ through the CLI and print exit codes."""

import argparse
from pathlib import Path

from crossdiff import cli

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "out")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("names", nargs="*", help="scenario stems; default all")
    args = ap.parse_args()

    paths = sorted((ROOT / "scenarios").glob("*.cfg"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    for p in paths:
        code = cli.main([str(p), "--out", str(args.out / p.stem), "--jobs", str(args.jobs)])
        print(f"{p.stem:20s} exit={code}")


if __name__ == "__main__":
    main()
