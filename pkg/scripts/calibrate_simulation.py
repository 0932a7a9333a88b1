"""Grid-search simulated-world dynamics.

For each (step_gain, noise_scale) pair, sweep the prevalences and report the
mean validation-sensitivity amplitude and collapse frequency per prevalence,
flagging pairs where instability decreases strictly with prevalence.

    python scripts/calibrate_simulation.py --seeds 20 --step-gain 1.0 1.5 2.0 --noise-scale 0.4 0.8
"""

import argparse
import itertools
import logging

from promptforge.args import positive_int
from promptforge.restruct import csv_dump
from promptforge.simlab import SimParams, run_instability_experiment

logger = logging.getLogger(__name__)


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.split("\n", 1)[0])
    parser.add_argument("--prevalences", type=float, nargs="+", default=[0.03, 0.12, 0.23])
    parser.add_argument("--seeds", type=positive_int("seeds"), default=20)
    parser.add_argument("--separation", type=float, default=2.0)
    parser.add_argument("--clamp", type=float, default=3.0)
    parser.add_argument("--step-gain", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    parser.add_argument("--noise-scale", type=float, nargs="+", default=[0.4, 0.8, 1.2])
    parser.add_argument("--workers", type=positive_int("workers"), default=1)
    parser.add_argument("--csv", help="Also write the grid to this CSV file")
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    rows = []
    for step_gain, noise_scale in itertools.product(args.step_gain, args.noise_scale):
        params = SimParams(
            separation=args.separation,
            step_gain=step_gain,
            noise_scale=noise_scale,
            clamp=args.clamp,
        )
        summary = run_instability_experiment(args.prevalences, args.seeds, params, workers=args.workers)
        amplitudes = [row.mean_amplitude for row in summary.rows]
        monotone = all(a > b for a, b in zip(amplitudes, amplitudes[1:]))
        for row in summary.rows:
            rows.append(
                [
                    f"{step_gain:g}",
                    f"{noise_scale:g}",
                    *row.cells(),
                    "yes" if monotone else "no",
                ]
            )
        logger.info(
            f"step_gain={step_gain:g} noise_scale={noise_scale:g}: "
            f"amplitudes={[round(a, 3) for a in amplitudes]} monotone={monotone}"
        )
    if args.csv:
        csv_dump(
            args.csv,
            (
                "step_gain",
                "noise_scale",
                "prevalence",
                "seeds",
                "mean_amplitude",
                "collapse_frequency",
                "mean_final_val_f1",
                "mean_selected_val_f1",
                "monotone",
            ),
            rows,
        )


if __name__ == "__main__":
    main()
