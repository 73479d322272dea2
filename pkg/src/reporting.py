"""
CSV and SVG output for trajectories and sweeps.

Numbers are written with 17 significant digits, '.' as decimal separator and
'\n' line endings so files are byte-stable across runs.
"""
import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from core_types import ZERO_EIGENVALUE  # noqa: E402

logger = logging.getLogger(__name__)
logging.getLogger("matplotlib").setLevel(logging.WARNING)

TRAJECTORY_HEADER = ["j", "t", "x1", "x2", "x3", "x4", "x5", "dist"]
SVG_SIZE_PX = (800, 500)

plt.rcParams["svg.hashsalt"] = "fractoda"


def fmt(value) -> str:
    return format(float(value), ".17g")


def fmt_q_tilde(q_tilde) -> str:
    return q_tilde.value if q_tilde is ZERO_EIGENVALUE else fmt(q_tilde)


def trajectory_rows(tr, distances):
    for j, (t, state, dist) in enumerate(zip(tr.times, tr.states, distances)):
        yield [str(j), fmt(t), *(fmt(v) for v in state), fmt(dist)]


def write_trajectory_csv(tr, distances, file_path):
    """
    Write one row per recorded step: j, t, x1..x5 and the distance to the target.

    Args:
        tr (Trajectory): Integration result.
        distances (np.ndarray): d_j for every recorded state.
        file_path (str | Path): Destination CSV.
    """
    with open(file_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        writer.writerows(trajectory_rows(tr, distances))
    logger.info("Wrote %d trajectory rows to %s", len(tr), file_path)


def write_sweep_csv(fields, cells, file_path):
    """`cells` are (value1, value2, verdict_kind, q_tilde) tuples in row-major order."""
    with open(file_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([*fields, "verdict", "q_tilde"])
        for v1, v2, kind, q_tilde in cells:
            q_text = "" if q_tilde is None else fmt_q_tilde(q_tilde)
            writer.writerow([fmt(v1), fmt(v2), str(kind.code), q_text])
    logger.info("Wrote %d sweep cells to %s", len(cells), file_path)


def orbit_paths(base_path):
    """`out/orbit.svg` -> `out/orbit_x1.svg` ... `out/orbit_x5.svg`."""
    base = Path(base_path)
    stem = base.stem if base.suffix.lower() == ".svg" else base.name
    return [base.with_name(f"{stem}_x{i}.svg") for i in range(1, 6)]


def plot_orbits(tr, base_path):
    """
    Plot each coordinate against the step index j, one SVG per coordinate.

    Returns:
        list[Path]: The five files written.
    """
    paths = orbit_paths(base_path)
    width, height = SVG_SIZE_PX
    steps = range(len(tr))
    for i, path in enumerate(paths):
        fig, ax = plt.subplots(figsize=(width / 72, height / 72))
        ax.plot(steps, tr.states[:, i], "b-", linewidth=1.2)
        ax.set_xlabel("n")
        ax.set_ylabel(f"x{i + 1}(n)")
        ax.set_title(f"Orbit (n, x{i + 1}(n)), q = {tr.params.q:g}")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info("Wrote orbit plots %s", ", ".join(str(p) for p in paths))
    return paths
