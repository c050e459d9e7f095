"""Run the reference experiment and print the headline numbers.

    python scripts/run_reference.py [--config configs/reference.yaml] [--out results]
"""
import argparse
from pathlib import Path

from shocklab.config import load_config
from shocklab.experiment import run_experiment, write_artifacts

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "reference.yaml")
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    args = ap.parse_args()
    art = run_experiment(load_config(args.config))
    write_artifacts(art, args.out)
    s = art.summary
    print(f"X_inf formula {s.x_inf_formula:.6e}  ode {s.x_inf_ode:.6e}  Y_inf formula {s.y_inf_formula:.6e}")
    print(f"metric {s.metric_initial:.4e} -> {s.metric_final:.4e} (ratio {s.metric_ratio:.4f})")
    print(f"max |int(v - v~)| {s.max_abs_mass_v:.2e}   boundary mismatch {s.max_boundary_mismatch:.2e}")
    print(f"C0 {s.c0:.4e} (half horizon {s.c0_half_horizon:.4e})   wall time {s.wall_time_s:.0f} s")


if __name__ == "__main__":
    main()
