"""Regenerate the data behind every figure as CSV files.

    python3 scripts/reproduce_figures.py --out figures/
    python3 scripts/reproduce_figures.py --out figures/ --only fig05 fig06

Each job is a plain ``odfc`` command line; ``--print`` lists them instead of
running them.
"""
import argparse
import contextlib
import io
import shlex
import sys
from pathlib import Path

from odfc.cli import main as odfc

LINEAR = ["--plant", "linear", "--lambda", "2", "--x0", "0.5"]
NONLINEAR = ["quad", "cubic_plus", "cubic_minus", "sinsq"]


def jobs(out: Path):
    """Yield ``(figure, argv)`` pairs."""
    for fig, method in (("fig01", "velocity"), ("fig07", "states")):
        for alpha in ("-0.4", "0.8"):
            yield fig, ["simulate", "--method", method, *LINEAR, "--tau", "0.2", "--alpha", alpha,
                        "--periods", "10", "--out", str(out / f"{fig}_alpha{alpha}.csv")]
    for fig, method in (("fig02", "velocity"), ("fig08", "states")):
        for alpha in ("-0.4", "0.8"):
            yield fig, ["simulate", "--method", method, *LINEAR, "--tau", "0.4", "--alpha", alpha,
                        "--periods", "10", "--out", str(out / f"{fig}_alpha{alpha}.csv")]
    for fig, method in (("fig03", "velocity"), ("fig09", "states")):
        for plant in NONLINEAR:
            yield fig, ["simulate", "--method", method, "--plant", plant, "--lambda", "2", "--x0", "0.5",
                        "--tau", "0.2", "--alpha", "-0.4", "--periods", "10",
                        "--out", str(out / f"{fig}_{plant}.csv")]
    for fig, method in (("fig04", "velocity"), ("fig10", "states")):
        for plant, x0, mu in (("linear", "0.5", "0"), ("cubic_minus", "0.5", "0.05")):
            yield fig, ["rate", "--method", method, "--plant", plant, "--lambda", "2", "--x0", x0,
                        "--tau", "0.2", "--alpha", "-0.4", "--periods", "10", "--mu", mu,
                        "--out", str(out / f"{fig}_{plant}.json"),
                        "--envelope-out", str(out / f"{fig}_{plant}_envelope.csv")]
    for tau in ("0.2", "0.02"):
        yield "fig05", ["simulate", "--method", "velocity", *LINEAR, "--tau", tau, "--alpha", "0",
                        "--periods", "4", "--out", str(out / f"fig05_tau{tau}.csv")]
    for fig, method, full, zoom in (("fig06", "velocity", "-100:0", "-25:0"), ("fig11", "states", "0:100", "0:25")):
        yield fig, ["region", "--method", method, "--lambda", "2", "--grid", "64x64", "--mode", "both",
                    f"--eps-range={full}", "--out", str(out / f"{fig}a.csv")]
        yield fig, ["region", "--method", method, "--lambda", "2", "--grid", "64x64", "--mode", "both",
                    f"--eps-range={zoom}", "--out", str(out / f"{fig}b.csv")]
        yield fig, ["region", "--method", method, "--lambda", "2", "--grid", "64x64", "--mode", "both",
                    f"--eps-range={full}", "--lt-range", "0.0078125:0.5", "--out", str(out / f"{fig}c.csv")]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("figures"))
    ap.add_argument("--only", nargs="*", help="figure ids such as fig01 fig06")
    ap.add_argument("--print", action="store_true", dest="dry", help="print the commands and exit")
    args = ap.parse_args(argv)

    if not args.dry:
        args.out.mkdir(parents=True, exist_ok=True)
    for fig, cmd in jobs(args.out):
        if args.only and fig not in args.only:
            continue
        if args.dry:
            print("odfc " + shlex.join(cmd))
            continue
        with contextlib.redirect_stdout(io.StringIO()):
            code = odfc(cmd)
        if code:
            print(f"{fig}: odfc exited with {code}", file=sys.stderr)
            return code
        print(f"{fig}: {cmd[-1]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
