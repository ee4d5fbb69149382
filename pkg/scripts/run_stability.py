"""Fidelity time series of CCZ and identity probes under a drifting detuning.

    python3 scripts/run_stability.py --out results/stability [--config cfg.json] [--mode ftt]
"""
import argparse
import json
from pathlib import Path

from basiscycle.experiments import StabilityConfig, run_stability_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, default=Path("results/stability"))
    p.add_argument("--mode", choices=("qpt", "ftt"))
    p.add_argument("--seed", type=int)
    args = p.parse_args()

    cfg = StabilityConfig.from_dict(json.loads(args.config.read_text())) if args.config else StabilityConfig()
    overrides = {k: v for k, v in (("mode", args.mode), ("seed", args.seed)) if v is not None}
    cfg = cfg.replace(**overrides) if overrides else cfg
    res = run_stability_experiment(cfg, out_dir=args.out)
    for cid, stats in res.summary.items():
        if isinstance(stats, dict) and "std" in stats:
            print(f"{cid:14s} mean {stats['mean']:.4f}  std {stats['std']:.4f}  range {stats['range']:.4f}")
    print(f"decoherence scale {res.summary['decoherence_scale']:.4g}")
    for f in res.files:
        print("wrote", f)


if __name__ == "__main__":
    main()
