"""Synchronous round loops: Shapley-weighted cross-gradient learning plus
decentralized SGD and momentum-SGD baselines.

A round is a barrier-synchronized map over agents: every phase reads only the
previous phase's snapshot, so agents can be computed in any order with
bit-identical results (exercised via the `agent_order` hook). All randomness
comes from named substreams keyed by (seed, purpose, round, agent).
"""

from dataclasses import dataclass

import numpy as np

from .data import AttackConfig, Dataset, poison_gradient
from .errors import NumericFailure
from .models import ModelSpec, accuracy, loss_and_grad
from .rng import substream
from .shapley import ModelCoalitionGame, ShapleyVector, compute_shapley
from .topology import MixingMatrix

DOUBLE_BYTES = 8


@dataclass
class AgentState:
    """Per-agent model, momentum buffer and local data view."""

    x: np.ndarray
    u: np.ndarray
    shard: np.ndarray  # indices into the global training set
    data: Dataset  # materialized local samples (post data-attack)
    malicious: bool = False


@dataclass
class EngineConfig:
    spec: ModelSpec
    gamma: float
    alpha: float
    batch: int
    attack: AttackConfig
    shapley_mode: str = "auto"
    mc_rounds: int = 0  # 0 = default budget
    validation_subsample: int = 0  # 0 = full validation set


@dataclass
class AgentRound:
    """One agent's view of a completed round."""

    members: list
    local_grad: np.ndarray
    received: dict  # j -> gradient of x_i computed on j's batch
    candidates: list  # candidate model per member, aligned with `members`
    shapley: ShapleyVector | None
    gbar: np.ndarray
    u_hat: np.ndarray
    x_hat: np.ndarray
    coalition_evals: int


@dataclass
class RoundTrace:
    agents: list
    phase1_msgs: int
    phase1_doubles: int
    phase2_msgs: int
    phase2_doubles: int

    @property
    def comm_bytes(self) -> int:
        return (self.phase1_doubles + self.phase2_doubles) * DOUBLE_BYTES


@dataclass
class MetricsRecord:
    round: int
    avg_train_loss: float
    grad_norm_sq: float
    consensus_dist: float
    test_acc: float
    comm_bytes: int
    wall_ms: int


def init_states(
    spec: ModelSpec,
    shards: list[np.ndarray],
    agent_data: list[Dataset],
    malicious: frozenset,
    x0: np.ndarray,
) -> list[AgentState]:
    """All agents share one initial model; momentum buffers start at zero."""
    return [
        AgentState(
            x=x0.copy(),
            u=np.zeros_like(x0),
            shard=shards[i],
            data=agent_data[i],
            malicious=i in malicious,
        )
        for i in range(len(shards))
    ]


def draw_batch(ds: Dataset, batch: int, rng: np.random.Generator) -> Dataset:
    """Uniform mini-batch, indices sorted ascending; with replacement only
    when the shard is smaller than the batch."""
    idx = rng.choice(len(ds), size=batch, replace=batch > len(ds))
    return ds.subset(np.sort(idx))


def _grad_at(spec, params, batch, agent, phase):
    try:
        _, g = loss_and_grad(spec, params, batch.features, batch.labels)
    except NumericFailure as exc:
        raise NumericFailure(f"agent {agent}, phase {phase}: {exc}") from exc
    return g


def _check_finite(vec, agent, phase):
    if not np.all(np.isfinite(vec)):
        raise NumericFailure(f"agent {agent}, phase {phase}: non-finite value")


def _gossip(weights_row, neighbors, vectors):
    acc = weights_row[neighbors[0]] * vectors[neighbors[0]]
    for j in neighbors[1:]:
        acc = acc + weights_row[j] * vectors[j]
    return acc


def _all_gradients(states, mixing, ec, t, seed, order):
    """grads[i][j] = gradient of model x_j on agent i's batch (agent i sends
    it to j). Malicious senders scale every outgoing gradient by an
    independent (1 + beta) draw when gradient poisoning is on."""
    x_prev = [s.x for s in states]
    grads: dict[int, dict[int, np.ndarray]] = {}
    poisoning = ec.attack.kind == "grad_poison"
    for i in order:
        rng_batch = substream(seed, "batch", t, i)
        batch = draw_batch(states[i].data, ec.batch, rng_batch)
        rng_poison = substream(seed, "poison", t, i) if poisoning and states[i].malicious else None
        sent = {}
        for j in mixing.neighbors(i):
            g = _grad_at(ec.spec, x_prev[j], batch, i, "gradient")
            if rng_poison is not None:
                g = poison_gradient(g, ec.attack.beta_lo, ec.attack.beta_hi, rng_poison)
            sent[j] = g
        grads[i] = sent
    return grads


def _subsample_validation(validation, ec, t, i, seed):
    k = ec.validation_subsample
    if k <= 0 or k >= len(validation):
        return validation
    idx = substream(seed, "valsub", t, i).choice(len(validation), size=k, replace=False)
    return validation.subset(np.sort(idx))


def ross_round(
    states: list[AgentState],
    mixing: MixingMatrix,
    ec: EngineConfig,
    validation: Dataset,
    t: int,
    seed: int,
    agent_order=None,
    force_self_gradient: bool = False,
) -> tuple[list[AgentState], RoundTrace]:
    """One synchronous round of the Shapley-weighted algorithm.

    Per agent: draw one batch; compute the gradient of every neighbor model
    on that batch and send it over; build candidate models from the received
    gradients; score them with Shapley values on the validation set; take the
    weighted gradient aggregate; momentum step; gossip the intermediate
    (u_hat, x_hat) pair with the mixing weights.

    `force_self_gradient` bypasses the aggregation (gbar_i = own gradient),
    which must reproduce the momentum baseline exactly.
    """
    n = len(states)
    order = list(agent_order) if agent_order is not None else list(range(n))
    w = mixing.w
    x_prev = [s.x for s in states]
    u_prev = [s.u for s in states]

    grads = _all_gradients(states, mixing, ec, t, seed, order)

    infos: dict[int, AgentRound] = {}
    for i in order:
        members = mixing.neighbors(i)
        candidates = [x_prev[i] - ec.gamma * grads[j][i] for j in members]
        if force_self_gradient:
            shap = None
            gbar = grads[i][i].copy()
            evals = 0
        else:
            val_ds = _subsample_validation(validation, ec, t, i, seed)
            game = ModelCoalitionGame(members, candidates, ec.spec, val_ds)
            shap = compute_shapley(
                game,
                ec.shapley_mode,
                ec.mc_rounds,
                substream(seed, "shapley", t, i),
                w[i, members],
            )
            gbar = shap.weights[0] * grads[members[0]][i]
            for m, j in enumerate(members[1:], start=1):
                gbar = gbar + shap.weights[m] * grads[j][i]
            evals = game.evaluations
        _check_finite(gbar, i, "aggregate")
        u_hat = ec.alpha * u_prev[i] + gbar
        x_hat = x_prev[i] - ec.gamma * u_hat
        _check_finite(x_hat, i, "local-step")
        infos[i] = AgentRound(
            members=members,
            local_grad=grads[i][i],
            received={j: grads[j][i] for j in members},
            candidates=candidates,
            shapley=shap,
            gbar=gbar,
            u_hat=u_hat,
            x_hat=x_hat,
            coalition_evals=evals,
        )

    u_hats = {i: infos[i].u_hat for i in range(n)}
    x_hats = {i: infos[i].x_hat for i in range(n)}
    new_states = []
    for i in range(n):
        nbrs = mixing.neighbors(i)
        u_new = _gossip(w[i], nbrs, u_hats)
        x_new = _gossip(w[i], nbrs, x_hats)
        _check_finite(x_new, i, "gossip")
        new_states.append(
            AgentState(x=x_new, u=u_new, shard=states[i].shard, data=states[i].data, malicious=states[i].malicious)
        )

    edges = mixing.num_edges
    d = ec.spec.dim
    trace = RoundTrace(
        agents=[infos[i] for i in range(n)],
        phase1_msgs=2 * edges,
        phase1_doubles=2 * edges * d,
        phase2_msgs=2 * edges,
        phase2_doubles=2 * edges * 2 * d,
    )
    return new_states, trace


def dpsgd_round(
    states: list[AgentState],
    mixing: MixingMatrix,
    ec: EngineConfig,
    t: int,
    seed: int,
) -> tuple[list[AgentState], RoundTrace]:
    """Gossip-averaging SGD: mix neighbor models, then step along the local
    gradient taken at the pre-mix model."""
    n = len(states)
    w = mixing.w
    x_prev = [s.x for s in states]
    poisoning = ec.attack.kind == "grad_poison"
    local = {}
    for i in range(n):
        batch = draw_batch(states[i].data, ec.batch, substream(seed, "batch", t, i))
        g = _grad_at(ec.spec, x_prev[i], batch, i, "gradient")
        if poisoning and states[i].malicious:
            g = poison_gradient(g, ec.attack.beta_lo, ec.attack.beta_hi, substream(seed, "poison", t, i))
        local[i] = g
    xs = {i: x_prev[i] for i in range(n)}
    new_states = []
    for i in range(n):
        mixed = _gossip(w[i], mixing.neighbors(i), xs)
        x_new = mixed - ec.gamma * local[i]
        _check_finite(x_new, i, "gossip")
        new_states.append(
            AgentState(x=x_new, u=states[i].u, shard=states[i].shard, data=states[i].data, malicious=states[i].malicious)
        )
    edges = mixing.num_edges
    d = ec.spec.dim
    trace = RoundTrace(agents=[], phase1_msgs=2 * edges, phase1_doubles=2 * edges * d, phase2_msgs=0, phase2_doubles=0)
    return new_states, trace


def dmsgd_round(
    states: list[AgentState],
    mixing: MixingMatrix,
    ec: EngineConfig,
    t: int,
    seed: int,
) -> tuple[list[AgentState], RoundTrace]:
    """Momentum baseline: local momentum step, then gossip (u_hat, x_hat)."""
    n = len(states)
    w = mixing.w
    x_prev = [s.x for s in states]
    u_prev = [s.u for s in states]
    poisoning = ec.attack.kind == "grad_poison"
    u_hats, x_hats = {}, {}
    for i in range(n):
        batch = draw_batch(states[i].data, ec.batch, substream(seed, "batch", t, i))
        g = _grad_at(ec.spec, x_prev[i], batch, i, "gradient")
        if poisoning and states[i].malicious:
            g = poison_gradient(g, ec.attack.beta_lo, ec.attack.beta_hi, substream(seed, "poison", t, i))
        u_hats[i] = ec.alpha * u_prev[i] + g
        x_hats[i] = x_prev[i] - ec.gamma * u_hats[i]
        _check_finite(x_hats[i], i, "local-step")
    new_states = []
    for i in range(n):
        nbrs = mixing.neighbors(i)
        u_new = _gossip(w[i], nbrs, u_hats)
        x_new = _gossip(w[i], nbrs, x_hats)
        _check_finite(x_new, i, "gossip")
        new_states.append(
            AgentState(x=x_new, u=u_new, shard=states[i].shard, data=states[i].data, malicious=states[i].malicious)
        )
    edges = mixing.num_edges
    d = ec.spec.dim
    trace = RoundTrace(agents=[], phase1_msgs=0, phase1_doubles=0, phase2_msgs=2 * edges, phase2_doubles=2 * edges * 2 * d)
    return new_states, trace


def mean_model(states: list[AgentState]) -> np.ndarray:
    return np.stack([s.x for s in states]).mean(axis=0)


def compute_metrics(
    states: list[AgentState],
    spec: ModelSpec,
    train: Dataset,
    test: Dataset,
    round_t: int,
    comm_bytes: int = 0,
    wall_ms: int = 0,
) -> MetricsRecord:
    """Deterministic full-dataset metrics at the network-mean model."""
    xbar = mean_model(states)
    loss, grad = loss_and_grad(spec, xbar, train.features, train.labels)
    consensus = float(np.mean([np.dot(s.x - xbar, s.x - xbar) for s in states]))
    return MetricsRecord(
        round=round_t,
        avg_train_loss=loss,
        grad_norm_sq=float(np.dot(grad, grad)),
        consensus_dist=consensus,
        test_acc=accuracy(spec, xbar, test.features, test.labels),
        comm_bytes=comm_bytes,
        wall_ms=wall_ms,
    )
