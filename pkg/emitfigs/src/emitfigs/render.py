"""Panel-grid rendering from sweep manifests.

Input contract (produced by the simulator's `sweep` command):
  manifest.csv   columns run_id,algo,topology,n,attack,seed,rounds,csv
  <run_id>.csv   columns run_id,algo,round,avg_train_loss,grad_norm_sq,
                 consensus_dist,test_acc,comm_bytes,wall_ms

The grid has one row per attack scenario and one column per agent count;
runs that differ only by seed are averaged into a single curve per algorithm.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRICS = ("avg_train_loss", "test_acc", "grad_norm_sq", "consensus_dist")

ALGO_COLORS = {
    "ross": "#d62728",
    "dmsgd": "#1f77b4",
    "dpsgd": "#2ca02c",
}

ATTACK_ORDER = ("longtail", "data_noise", "label_flip", "grad_poison", "none")


class RenderError(Exception):
    pass


@dataclass
class FigureSpec:
    manifest: Path
    metric: str = "test_acc"
    out_dir: Path = Path("figs")
    formats: tuple = ("png", "svg")

    def __post_init__(self):
        self.manifest = Path(self.manifest)
        self.out_dir = Path(self.out_dir)
        if self.metric not in METRICS:
            raise RenderError(f"metric {self.metric!r} not one of {METRICS}")


@dataclass
class RunCurve:
    run_id: str
    algo: str
    attack: str
    n: int
    rounds: list = field(default_factory=list)
    values: list = field(default_factory=list)


def load_manifest(path: Path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise RenderError(f"cannot read manifest {path}: {exc}") from exc
    if not rows:
        raise RenderError(f"manifest {path} is empty")
    needed = {"run_id", "algo", "n", "attack", "csv"}
    missing_cols = needed - set(rows[0])
    if missing_cols:
        raise RenderError(f"manifest {path} lacks columns {sorted(missing_cols)}")
    return rows


def load_curve(entry: dict, base_dir: Path, metric: str) -> RunCurve | None:
    """One run's (round, value) series; None when the CSV has no data rows."""
    csv_path = base_dir / entry["csv"]
    curve = RunCurve(
        run_id=entry["run_id"], algo=entry["algo"], attack=entry["attack"], n=int(entry["n"])
    )
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            curve.rounds.append(int(row["round"]))
            curve.values.append(float(row[metric]))
    if not curve.rounds:
        return None
    return curve


def average_curves(curves: list[RunCurve]) -> tuple[list[int], list[float]]:
    """Pointwise mean over runs that differ only by seed, up to the shortest run."""
    horizon = min(len(c.values) for c in curves)
    rounds = curves[0].rounds[:horizon]
    means = [
        sum(c.values[t] for c in curves) / len(curves) for t in range(horizon)
    ]
    return rounds, means


def collect(spec: FigureSpec):
    """Group curves into (attack, n) panels; report missing and empty runs."""
    entries = load_manifest(spec.manifest)
    base_dir = spec.manifest.parent
    panels: dict[tuple, dict[str, list[RunCurve]]] = {}
    missing, empty = [], []
    for entry in entries:
        if not (base_dir / entry["csv"]).exists():
            missing.append(entry["run_id"])
            continue
        curve = load_curve(entry, base_dir, spec.metric)
        if curve is None:
            empty.append(entry["run_id"])
            continue
        panels.setdefault((curve.attack, curve.n), {}).setdefault(curve.algo, []).append(curve)
    return panels, missing, empty


def render(spec: FigureSpec) -> list[Path]:
    """Write one figure per requested format; returns the output paths."""
    panels, missing, empty = collect(spec)
    for run_id in missing:
        print(f"warning: metrics CSV missing for run {run_id}; skipped")
    for run_id in empty:
        print(f"warning: empty metrics CSV for run {run_id}; skipped")
    if not panels:
        raise RenderError(
            "no plottable runs: "
            + (f"missing {missing}" if missing else "")
            + (f" empty {empty}" if empty else "")
        )

    attacks = sorted({a for a, _ in panels}, key=lambda a: (ATTACK_ORDER.index(a) if a in ATTACK_ORDER else 99, a))
    counts = sorted({n for _, n in panels})
    n_rows, n_cols = len(attacks), len(counts)
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(4.2 * n_cols, 3.0 * n_rows), squeeze=False, sharex=True
    )
    for r, attack in enumerate(attacks):
        for c, count in enumerate(counts):
            ax = axes[r][c]
            cell = panels.get((attack, count), {})
            horizon = 0
            for algo in sorted(cell):
                rounds, means = average_curves(cell[algo])
                horizon = max(horizon, rounds[-1] if rounds else 0)
                ax.plot(rounds, means, label=algo, color=ALGO_COLORS.get(algo), linewidth=1.4)
            ax.set_title(f"{attack}, N={count}", fontsize=10)
            ax.set_xlabel(f"round (T={horizon})", fontsize=9)
            ax.set_ylabel(spec.metric, fontsize=9)
            ax.grid(True, alpha=0.3)
            if cell:
                ax.legend(fontsize=8)
    fig.tight_layout()

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in spec.formats:
        path = spec.out_dir / f"{spec.metric}.{fmt}"
        # strip volatile metadata so re-renders stay comparable
        metadata = {"Date": None} if fmt == "svg" else {}
        fig.savefig(path, format=fmt, dpi=120, metadata=metadata)
        written.append(path)
    plt.close(fig)
    return written
