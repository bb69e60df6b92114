"""Command-line entry points: run, sweep, check, shapley-bench.

Exit codes: 0 ok, 1 config error, 2 data load error, 3 numeric failure,
4 invariant failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, parse_config
from .errors import InvariantFailure, RossError
from .models import ModelSpec, finite_diff_grad, init_params, loss_and_grad
from .rng import substream
from .runner import METRICS_COLUMNS, SHAPLEY_COLUMNS, run_experiment
from .shapley import TabularGame, exact_shapley, mc_shapley, random_tabular_game
from .topology import build_topology, metropolis_weights, verify_fact1

# Scenario presets for the sweep's attack axis. "longtail" is the skewed
# partition with no byzantine agents; the byzantine scenarios run on a
# near-uniform partition so the attack is the only challenge in the cell.
SCENARIOS = {
    "none": {"attack.kind": "none", "data.partition_mu": 1e6},
    "longtail": {"attack.kind": "none", "data.partition_mu": 0.25},
    "data_noise": {"attack.kind": "data_noise", "data.partition_mu": 1e6},
    "label_flip": {"attack.kind": "label_flip", "data.partition_mu": 1e6},
    "grad_poison": {"attack.kind": "grad_poison", "data.partition_mu": 1e6},
}


def _write_effective_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective-config.txt").write_text("\n".join(cfg.as_lines()) + "\n")


def _execute_run(cfg: ExperimentConfig, csv_path: Path) -> None:
    """Run one experiment, streaming metrics so partial output survives failures."""
    header = ",".join(METRICS_COLUMNS) + "\n"
    with open(csv_path, "w") as fh:
        fh.write(header)
        fh.flush()

        def flush_row(rec):
            fh.write(
                ",".join(
                    [
                        cfg.run_id,
                        cfg["train.algo"],
                        str(rec.round),
                        repr(rec.avg_train_loss),
                        repr(rec.grad_norm_sq),
                        repr(rec.consensus_dist),
                        repr(rec.test_acc),
                        str(rec.comm_bytes),
                        str(rec.wall_ms),
                    ]
                )
                + "\n"
            )
            fh.flush()

        result = run_experiment(cfg, on_metrics=flush_row)

    out_dir = csv_path.parent
    if result.diagnostics:
        with open(out_dir / f"{cfg.run_id}-diagnostics.jsonl", "w") as fh:
            for row in result.diagnostics:
                fh.write(json.dumps(row) + "\n")
    if result.shapley_rows:
        with open(out_dir / f"{cfg.run_id}-shapley.csv", "w") as fh:
            fh.write(",".join(SHAPLEY_COLUMNS) + "\n")
            for t, agent, member, phi, phi_hat, pi in result.shapley_rows:
                fh.write(f"{t},{agent},{member},{phi!r},{phi_hat!r},{pi!r}\n")


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out_dir = Path(cfg.out_dir)
    _write_effective_config(cfg, out_dir)
    _execute_run(cfg, out_dir / "metrics.csv")
    print(f"run {cfg.run_id}: {cfg['train.rounds']} rounds -> {out_dir / 'metrics.csv'}")
    return 0


def cmd_sweep(args) -> int:
    base = parse_config(args.config)
    out_dir = Path(base.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ns = args.n or [base["topology.n"]]
    topos = args.topo or [base["topology.kind"]]
    attacks = args.attack or ["longtail"]
    algos = args.algo or [base["train.algo"]]
    for name in attacks:
        if name not in SCENARIOS:
            raise RossError(f"unknown attack scenario {name!r}; choose from {sorted(SCENARIOS)}")

    manifest_rows = []
    for topo in topos:
        for n in ns:
            for attack in attacks:
                for algo in algos:
                    for rep in range(args.reps):
                        seed = base.seed + rep
                        run_id = f"{algo}_{topo}_n{n}_{attack}_r{rep}"
                        cfg = base.with_overrides(
                            **{
                                "run_id": run_id,
                                "seed": seed,
                                "topology.kind": topo,
                                "topology.n": n,
                                "train.algo": algo,
                                **SCENARIOS[attack],
                            }
                        )
                        csv_path = out_dir / f"{run_id}.csv"
                        _execute_run(cfg, csv_path)
                        manifest_rows.append(
                            (run_id, algo, topo, n, attack, seed, cfg["train.rounds"], csv_path.name)
                        )
                        print(f"sweep cell done: {run_id}")
    with open(out_dir / "manifest.csv", "w") as fh:
        fh.write("run_id,algo,topology,n,attack,seed,rounds,csv\n")
        for row in manifest_rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    print(f"sweep complete: {len(manifest_rows)} runs, manifest at {out_dir / 'manifest.csv'}")
    return 0


def _check_mixing_suite(report) -> None:
    for n in (4, 10, 20):
        for kind in ("full", "ring", "bipartite"):
            mixing = metropolis_weights(build_topology(kind, n))
            w = mixing.w
            ok = (
                np.abs(w.sum(axis=1) - 1.0).max() <= 1e-12
                and np.array_equal(w, w.T)
                and mixing.omega_min > 0
            )
            pattern_ok = all(
                (w[i, j] > 0) == (j in mixing.neighbors(i)) for i in range(n) for j in range(n)
            )
            fact1 = verify_fact1(w, 10)
            report(f"mixing {kind} n={n}", ok and pattern_ok and fact1["max_slack"] <= 1e-9,
                   f"rho={mixing.rho:.4g} slack={fact1['max_slack']:.2e}")


def _check_shapley_axioms(report, games: int = 40) -> None:
    rng = substream(20240101, "check-shapley")
    worst_eff = worst_lin = 0.0
    for _ in range(games):
        n = int(rng.integers(2, 9))
        game = random_tabular_game(n, rng)
        phi = exact_shapley(game)
        worst_eff = max(worst_eff, abs(phi.sum() - game.value(game.full_mask)))
        other = random_tabular_game(n, rng)
        combined = TabularGame(
            game.members, {m: game.table[m] + other.table[m] for m in game.table}
        )
        delta = exact_shapley(combined) - (phi + exact_shapley(other))
        worst_lin = max(worst_lin, float(np.abs(delta).max()))
    report("shapley efficiency", worst_eff <= 1e-12, f"max |sum phi - v(full)| = {worst_eff:.2e}")
    report("shapley linearity", worst_lin <= 1e-12, f"max componentwise gap = {worst_lin:.2e}")


def _check_gradients(report, draws: int = 10) -> None:
    rng = substream(20240101, "check-grad")
    for spec in (
        ModelSpec("logistic", input_dim=6, num_classes=3),
        ModelSpec("mlp", input_dim=6, num_classes=3, hidden=(5,)),
    ):
        worst = 0.0
        for k in range(draws):
            params = init_params(spec, int(rng.integers(1 << 30))) + 0.1 * rng.standard_normal(spec.dim)
            feats = rng.standard_normal((12, spec.input_dim))
            labs = rng.integers(0, spec.num_classes, size=12)
            _, g = loss_and_grad(spec, params, feats, labs)
            fd = finite_diff_grad(spec, params, feats, labs)
            scale = np.maximum(1.0, np.maximum(np.abs(g), np.abs(fd)))
            worst = max(worst, float((np.abs(g - fd) / scale).max()))
        report(f"gradient check {spec.kind}", worst <= 1e-4, f"max rel err = {worst:.2e}")


def _check_identities(report) -> None:
    from .config import default_config

    cfg = default_config().with_overrides(
        **{
            "topology.kind": "ring",
            "topology.n": 4,
            "data.train_samples": 240,
            "data.test_samples": 60,
            "train.rounds": 10,
            "train.batch": 16,
            "run_id": "check-smoke",
        }
    )
    result = run_experiment(cfg)
    worst_sbar = max(row["sbar_residual"] for row in result.diagnostics)
    worst_mean = max(max(row["mean_resid_u"], row["mean_resid_x"]) for row in result.diagnostics)
    report("auxiliary-sequence identity", worst_sbar <= 1e-8, f"max residual = {worst_sbar:.2e}")
    report("mean-preservation recursions", worst_mean <= 1e-9, f"max residual = {worst_mean:.2e}")


def cmd_check(args) -> int:
    del args
    failures = []

    def report(name, ok, detail=""):
        print(f"  {'PASS' if ok else 'FAIL'}  {name:<38} {detail}")
        if not ok:
            failures.append(name)

    print("invariant battery:")
    _check_mixing_suite(report)
    _check_shapley_axioms(report)
    _check_gradients(report)
    _check_identities(report)
    if failures:
        raise InvariantFailure(f"{len(failures)} checks failed: {', '.join(failures)}")
    print("all checks passed")
    return 0


def cmd_shapley_bench(args) -> int:
    players = args.players
    r_values = [int(part) for part in args.r.split(",")]
    rng = substream(args.seed, "bench-game")
    table = random_tabular_game(players, rng).table
    exact_game = TabularGame(list(range(players)), table)
    phi = exact_shapley(exact_game)
    print(f"{players}-player random game, exact evaluations: {exact_game.evaluations}")
    print(f"{'R':>8}  {'max |mc - exact|':>18}  {'coalition evals':>16}")
    for budget in r_values:
        game = TabularGame(list(range(players)), table)
        est = mc_shapley(game, budget, substream(args.seed, "bench-mc", budget))
        err = float(np.abs(est - phi).max())
        print(f"{budget:>8}  {err:>18.6f}  {game.evaluations:>16}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ross", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="cartesian sweep over scenario axes")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--n", type=int, nargs="+")
    p_sweep.add_argument("--topo", nargs="+", choices=("full", "ring", "bipartite"))
    p_sweep.add_argument("--attack", nargs="+", choices=sorted(SCENARIOS))
    p_sweep.add_argument("--algo", nargs="+", choices=("ross", "dpsgd", "dmsgd"))
    p_sweep.add_argument("--reps", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="run the invariant battery")
    p_check.add_argument("config", nargs="?")
    p_check.set_defaults(func=cmd_check)

    p_bench = sub.add_parser("shapley-bench", help="exact-vs-MC error by permutation budget")
    p_bench.add_argument("--players", type=int, default=8)
    p_bench.add_argument("--r", default="16,64,256,1024")
    p_bench.add_argument("--seed", type=int, default=42)
    p_bench.set_defaults(func=cmd_shapley_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
