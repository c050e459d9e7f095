"""Amplitude sweep: decay rates and shift limits against epsilon.

    python scripts/sweep_epsilon.py --values 0.01 0.02 0.04 --until shifts
"""
import argparse
from pathlib import Path

from shocklab.config import load_config
from shocklab.experiment import run_sweep, sweep_table, write_artifacts

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "reference.yaml")
    ap.add_argument("--values", type=float, nargs="+", default=[0.01, 0.02, 0.04])
    ap.add_argument("--until", choices=("periodic", "shifts", "run"), default="shifts")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "sweep")
    args = ap.parse_args()
    cfg = load_config(args.config)
    cfg = cfg.with_value("sweep", {"parameter": "perturbation.epsilon", "values": args.values,
                                   "jobs": args.jobs})
    results = run_sweep(cfg, until=args.until)
    for art in results:
        write_artifacts(art, args.out)
    (args.out / f"{cfg.run_id}.sweep.csv").write_text(sweep_table(cfg, results))
    print(f"{'eps':>6} {'status':>7} {'alpha_per_l':>11} {'alpha_X':>8} {'X_inf':>12} {'ode-formula':>12}")
    for eps, art in zip(args.values, results):
        s = art.summary
        if s.status != "ok":
            print(f"{eps:6.3f} {s.status:>7}  [{s.failed_stage}] {s.error}")
            continue
        print(f"{eps:6.3f} {s.status:>7} {s.alpha_periodic_left:11.4f} {s.alpha_shift_x:8.4f} "
              f"{s.x_inf_formula:12.5e} {s.x_inf_ode - s.x_inf_formula:12.2e}")


if __name__ == "__main__":
    main()
