"""Certify a staged slow-contact instance, then measure how the settling
time of the free-running system grows with the number of forced steps.

Writes the same slow.json / slow_curve.csv files as ``dwsim slow``.
"""
import argparse
import json
from pathlib import Path

from dwsim.cli import main as dwsim_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/slow", help="output directory")
    ap.add_argument("--K", type=int, default=10,
                    help="forced interactions in the certified instance")
    ap.add_argument("--curve", default="1,2,5,10,20,40",
                    help="comma list of K values for the empirical curve")
    ap.add_argument("--curve-seeds", type=int, default=50)
    args = ap.parse_args()
    rc = dwsim_main(["slow", "--K", str(args.K), "--out", args.out,
                     "--curve", args.curve,
                     "--curve-seeds", str(args.curve_seeds)])
    if rc != 0:
        return rc
    out = Path(args.out)
    cert = json.loads((out / "slow.json").read_text(encoding="utf-8"))
    print(f"instance K={cert['contact_steps']}: ok={cert['ok']}, "
          f"contact deviation {cert['max_deviation']:.3e}, "
          f"margin {cert['margin']:.6f}")
    print(f"\n{'K':>6}{'median settling':>18}{'runs':>8}{'censored':>10}")
    rows = (out / "slow_curve.csv").read_text(encoding="utf-8").splitlines()[1:]
    for row in rows:
        k, med, n_runs, censored = row.split(",")
        med = med or "n/a"
        print(f"{k:>6}{med:>18}{n_runs:>8}{censored:>10}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
