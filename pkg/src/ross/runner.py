"""Config-driven experiment execution.

Builds the dataset, partition and attack state from one seed, runs T rounds
of the configured algorithm, and streams per-round metrics (plus optional
identity diagnostics and Shapley dumps) to the caller. Metrics are evaluated
at the network-mean model on the clean training set, so curves measure the
true objective even when malicious shards were rewritten.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .data import (
    Dataset,
    apply_data_noise,
    dirichlet_partition,
    flip_labels,
    gen_blobs,
    load_mnist_idx,
    make_validation,
    malicious_ids,
)
from .diagnostics import check_mean_preservation
from .engine import (
    AgentState,
    EngineConfig,
    MetricsRecord,
    compute_metrics,
    dmsgd_round,
    dpsgd_round,
    init_states,
    mean_model,
    ross_round,
)
from .models import init_params
from .rng import derive_seed
from .topology import build_topology, metropolis_weights

METRICS_COLUMNS = (
    "run_id",
    "algo",
    "round",
    "avg_train_loss",
    "grad_norm_sq",
    "consensus_dist",
    "test_acc",
    "comm_bytes",
    "wall_ms",
)

SHAPLEY_COLUMNS = ("round", "agent", "neighbor", "phi", "phi_hat", "pi")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    metrics: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    shapley_rows: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    states: list = field(default_factory=list)

    @property
    def final_metrics(self) -> MetricsRecord:
        return self.metrics[-1]


def load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """(train, raw test) according to data.source.

    Blobs are drawn as one pool and split, so train and test share the same
    class centers (the generator is already shuffled, making the head/tail
    split a uniform one)."""
    if cfg["data.source"] == "blobs":
        n_train = cfg["data.train_samples"]
        n_test = cfg["data.test_samples"]
        pool = gen_blobs(
            derive_seed(cfg.seed, "blobs"),
            n_train + n_test,
            cfg["data.input_dim"],
            cfg["data.classes"],
            cfg["data.spread"],
        )
        train = pool.subset(np.arange(n_train))
        test = pool.subset(np.arange(n_train, n_train + n_test))
        return train, test
    limit = cfg["data.limit"] or None
    train = load_mnist_idx(cfg["data.train_images"], cfg["data.train_labels"], limit)
    test = load_mnist_idx(cfg["data.test_images"], cfg["data.test_labels"])
    return train, test


def prepare_agent_data(
    train: Dataset, shards: list[np.ndarray], malicious: frozenset, cfg: ExperimentConfig
) -> list[Dataset]:
    """Materialize each agent's local view; data attacks rewrite only
    malicious agents' copies."""
    attack = cfg.attack
    out = []
    for i, shard in enumerate(shards):
        local = train.subset(shard)
        if i in malicious and attack.kind == "data_noise":
            local = apply_data_noise(local, attack.sigma, cfg.seed, i)
        elif i in malicious and attack.kind == "label_flip":
            local = flip_labels(local, train.num_classes)
        out.append(local)
    return out


def setup_experiment(cfg: ExperimentConfig):
    """Everything a run needs: mixing matrix, agent states, datasets, engine config."""
    train, test_raw = load_datasets(cfg)
    validation, test = make_validation(test_raw, cfg["data.validation_fraction"], cfg.seed)
    n = cfg["topology.n"]
    shards = dirichlet_partition(train, n, cfg["data.partition_mu"], cfg.seed)
    bad = malicious_ids(cfg.attack, n, cfg.seed)
    agent_data = prepare_agent_data(train, shards, bad, cfg)
    spec = cfg.model_spec(train.input_dim, train.num_classes)
    mixing = metropolis_weights(build_topology(cfg["topology.kind"], n))
    x0 = init_params(spec, cfg.seed)
    states = init_states(spec, shards, agent_data, bad, x0)
    ec = EngineConfig(
        spec=spec,
        gamma=cfg["train.lr"],
        alpha=cfg["train.momentum"],
        batch=cfg["train.batch"],
        attack=cfg.attack,
        shapley_mode=cfg["shapley.mode"],
        mc_rounds=cfg["shapley.mc_rounds"],
        validation_subsample=cfg["shapley.validation_subsample"],
    )
    return mixing, states, ec, train, validation, test


def run_experiment(
    cfg: ExperimentConfig,
    collect_traces: bool = False,
    on_metrics=None,
) -> ExperimentResult:
    """Run the configured algorithm for train.rounds rounds.

    `on_metrics(record)` fires after every round, letting the CLI flush
    partial CSV output before a numeric failure aborts the run.
    """
    algo = cfg["train.algo"]
    mixing, states, ec, train, validation, test = setup_experiment(cfg)
    result = ExperimentResult(config=cfg)

    diag_on = cfg["diagnostics.enabled"] and algo == "ross"
    alpha = ec.alpha
    xbar_prev = mean_model(states)
    ubar_prev = np.zeros_like(xbar_prev)
    sbar_prev = xbar_prev

    for t in range(1, cfg["train.rounds"] + 1):
        started = time.perf_counter()
        if algo == "ross":
            states, trace = ross_round(states, mixing, ec, validation, t, cfg.seed)
        elif algo == "dmsgd":
            states, trace = dmsgd_round(states, mixing, ec, t, cfg.seed)
        else:
            states, trace = dpsgd_round(states, mixing, ec, t, cfg.seed)

        if diag_on:
            gbar_sum = np.stack([a.gbar for a in trace.agents]).sum(axis=0)
            n = len(states)
            xbar = mean_model(states)
            ubar = np.stack([s.u for s in states]).mean(axis=0)
            resid_u, resid_x = check_mean_preservation(
                xbar, ubar, xbar_prev, ubar_prev, gbar_sum / n, ec.gamma, alpha
            )
            sbar = (xbar - alpha * xbar_prev) / (1.0 - alpha)
            rhs = (-ec.gamma / (n * (1.0 - alpha))) * gbar_sum
            sbar_resid = float(np.abs((sbar - sbar_prev) - rhs).max()) / (
                1.0 + float(np.abs(sbar).max())
            )
            result.diagnostics.append(
                {
                    "round": t,
                    "sbar_residual": sbar_resid,
                    "mean_resid_u": resid_u,
                    "mean_resid_x": resid_x,
                }
            )
            xbar_prev, ubar_prev, sbar_prev = xbar, ubar, sbar

        if cfg["shapley.dump"] and algo == "ross":
            for agent_id, info in enumerate(trace.agents):
                if info.shapley is None:
                    continue
                sv = info.shapley
                for m, member in enumerate(sv.members):
                    result.shapley_rows.append(
                        (t, agent_id, member, sv.raw[m], sv.normalized[m], sv.weights[m])
                    )

        wall_ms = int((time.perf_counter() - started) * 1000)
        record = compute_metrics(states, ec.spec, train, test, t, trace.comm_bytes, wall_ms)
        result.metrics.append(record)
        if collect_traces:
            result.traces.append(trace)
        if on_metrics is not None:
            on_metrics(record)

    result.states = states
    return result


def metrics_csv_rows(result: ExperimentResult) -> list[str]:
    """CSV body lines in the documented column order."""
    cfg = result.config
    rows = []
    for rec in result.metrics:
        rows.append(
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
        )
    return rows
