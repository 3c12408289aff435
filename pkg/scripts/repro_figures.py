"""Run the two preset sweeps and print a per-cell summary table.

Thin wrapper over ``dwsim repro``; the heavy lifting is the exact code
path the installed command uses, so the written files match what the
CLI would produce.
"""
import argparse
import json
from pathlib import Path

from dwsim.cli import main as dwsim_main


def run_figure(figure: str, out: Path, seeds: int) -> None:
    rc = dwsim_main(["repro", figure, "--out", str(out), "--seeds", str(seeds)])
    if rc != 0:
        raise SystemExit(rc)
    summary = json.loads(
        (out / figure / "summary.json").read_text(encoding="utf-8"))
    print(f"\n{figure}  ({seeds} runs per cell)")
    print(f"{'cell':<18}{'converged':>10}{'consensus':>10}{'censored':>10}")
    for name in sorted(summary["cells"]):
        stats = summary["cells"][name]
        censored = max(stats["tau_censored"].values(), default=0)
        print(f"{name:<18}{stats['n_converged']:>10}"
              f"{stats['consensus_frequency']:>10.3f}{censored:>10}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/figures", help="output directory")
    ap.add_argument("--seeds", type=int, default=64, help="runs per cell")
    ap.add_argument("--figure", choices=("fig1", "fig2", "both"),
                    default="both")
    args = ap.parse_args()
    figures = ("fig1", "fig2") if args.figure == "both" else (args.figure,)
    for figure in figures:
        run_figure(figure, Path(args.out), args.seeds)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
