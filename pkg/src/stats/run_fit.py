import os
from pathlib import Path

import pandas as pd

from src.data_loader import load_runs
from src.logger import configure_logging
from src.stats.regression import DegenerateDataError, extract_observations, fit_switching, interpret_fit

# Switching directions: label -> (route left, alternative), 0-based
DIRECTIONS = {"p12": (0, 1), "p21": (1, 0)}


def fit_runs(path, out_dir=None) -> pd.DataFrame:
    """
    Fit the switching model per direction, pooling every replication under
    `path`, and save fit.csv.
    """
    # 1. Load runs
    runs = load_runs(path)
    out_dir = Path(out_dir) if out_dir is not None else Path(path) / "analysis"
    os.makedirs(out_dir, exist_ok=True)

    route_counts = {len(flows) for run in runs for log in run.days[:1] for flows in log.route_flows.values()}
    if route_counts != {2}:
        raise DegenerateDataError("The switching model needs logs of a two-route scenario")
    days = [run.days for run in runs]

    # 2. One binary regression per direction
    rows = []
    for label, pair in DIRECTIONS.items():
        fit = fit_switching(extract_observations(days, pair))
        rows.append(
            {
                "direction": label,
                "theta0": fit.theta0,
                "theta1": fit.theta1,
                "se_theta0": fit.std_errors[0],
                "se_theta1": fit.std_errors[1],
                "p_theta0": fit.p_values[0],
                "p_theta1": fit.p_values[1],
                "log_likelihood": fit.log_likelihood,
                "n_obs": fit.n_obs,
                "converged": fit.converged,
                "iterations": fit.iterations,
                "diagnostic": fit.diagnostic,
            }
        )
        insight = interpret_fit(label, fit)
        print(f"  > {insight['What']}: {insight['Interpretation']}")

    results = pd.DataFrame(rows)
    results.to_csv(out_dir / "fit.csv", index=False)

    # 3. Report
    print("\n=== Switching regression ===")
    print(
        results[["direction", "theta0", "p_theta0", "theta1", "p_theta1", "n_obs", "converged"]].to_string(
            index=False, float_format=lambda v: f"{v:.4f}"
        )
    )
    print(f"Saved fit results to {out_dir / 'fit.csv'}")
    return results


def main():
    configure_logging()

    # 1. Setup Paths
    project_root = Path(__file__).resolve().parents[2]
    runs_root = project_root / "runs"
    reports_root = project_root / "reports" / "fit"

    if not runs_root.exists():
        print("Error: no simulation output found. Run 'dvc repro simulate' first.")
        return

    # 2. Fit every two-route scenario
    for scenario_dir in sorted(p for p in runs_root.glob("scenario*") if p.is_dir()):
        print(f"\n--- {scenario_dir.name} ---")
        try:
            fit_runs(scenario_dir, out_dir=reports_root / scenario_dir.name)
        except DegenerateDataError as e:
            print(f"Skipped: {e}")


if __name__ == "__main__":
    main()
