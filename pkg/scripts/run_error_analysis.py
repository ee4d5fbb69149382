"""Truth tables of the identity ladder and CCZ, plus the fitted CCZ phases.

    python3 scripts/run_error_analysis.py --out results/error_analysis [--config cfg.json]
"""
import argparse
import json
import math
from pathlib import Path

from basiscycle.experiments import ErrorAnalysisConfig, run_error_analysis


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, default=Path("results/error_analysis"))
    p.add_argument("--shots", type=int)
    args = p.parse_args()

    cfg = ErrorAnalysisConfig.from_dict(json.loads(args.config.read_text())) if args.config else ErrorAnalysisConfig()
    if args.shots is not None:
        cfg = cfg.replace(shots=args.shots)
    res = run_error_analysis(cfg, out_dir=args.out)
    print("truth-table fidelities")
    for cid, f in res.summary["F_TT"].items():
        print(f"  {cid:14s} {f:.4f}")
    print("CCZ phases (units of pi)")
    for label, phi in res.summary["phi"].items():
        print(f"  {label}  {phi / math.pi:+.4f}")
    print(f"chi2/dof {res.summary['chi2_per_dof']:.3f}")
    for f in res.files:
        print("wrote", f)


if __name__ == "__main__":
    main()
