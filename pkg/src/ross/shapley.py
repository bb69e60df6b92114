"""Coalition games over neighbor candidate models and Shapley weighting.

Each agent scores subsets of its neighborhood by the validation accuracy of
the subset-averaged candidate model. Shapley values of that game (exact by
subset enumeration, or Monte-Carlo over random permutations) are min-max
normalized and turned into aggregation weights for the received gradients.

Coalition values are memoized by member bitmask: a permutation touches only
its prefix coalitions, so the cache makes large Monte-Carlo budgets cheap.
"""

import math
from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, accuracy

EXACT_PLAYER_LIMIT = 12


class CoalitionGame:
    """Characteristic function over subsets of `members`, cached by bitmask.

    Subclasses implement `_evaluate(mask)` for non-empty masks; the empty
    coalition is worth exactly 0 by definition. The cache is write-once, so
    repeated queries return the identical float.
    """

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ValueError("coalition game needs at least one member")
        if len(members) > 63:
            raise ValueError("bitmask representation supports at most 63 members")
        self.members = members
        self._cache: dict[int, float] = {}

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def evaluations(self) -> int:
        """Distinct coalition evaluations performed so far."""
        return len(self._cache)

    def value(self, mask: int) -> float:
        if mask & ~self.full_mask:
            raise ValueError(f"mask {mask:b} not a subset of the member set")
        if mask == 0:
            return 0.0
        got = self._cache.get(mask)
        if got is None:
            got = float(self._evaluate(mask))
            self._cache[mask] = got
        return got

    def _evaluate(self, mask: int) -> float:
        raise NotImplementedError


class ModelCoalitionGame(CoalitionGame):
    """Value of a coalition = validation accuracy of its averaged candidate model."""

    def __init__(self, members, candidates, spec: ModelSpec, validation):
        super().__init__(members)
        if len(candidates) != len(self.members):
            raise ValueError("one candidate model per member required")
        self.candidates = [np.asarray(c) for c in candidates]
        self.spec = spec
        self.validation = validation

    def _evaluate(self, mask: int) -> float:
        picked = [self.candidates[k] for k in range(self.n) if mask >> k & 1]
        avg = picked[0].copy()
        for other in picked[1:]:
            avg += other
        avg /= len(picked)
        return accuracy(self.spec, avg, self.validation.features, self.validation.labels)


class TabularGame(CoalitionGame):
    """Game backed by an explicit mask -> value table (tests, benchmarks)."""

    def __init__(self, members, table):
        super().__init__(members)
        self.table = dict(table)

    def _evaluate(self, mask: int) -> float:
        return self.table[mask]


@dataclass
class ShapleyVector:
    """Raw and normalized per-member values plus the derived weights."""

    members: list
    raw: np.ndarray
    normalized: np.ndarray
    degenerate: bool
    weights: np.ndarray


def random_tabular_game(n_players: int, rng: np.random.Generator) -> TabularGame:
    """Uniform[0, 1] value per non-empty coalition; for tests and benchmarks."""
    table = {mask: float(rng.uniform()) for mask in range(1, 1 << n_players)}
    return TabularGame(list(range(n_players)), table)


def exact_shapley(game: CoalitionGame) -> np.ndarray:
    """Exact Shapley values by enumeration over all coalitions.

    phi_j = sum over S not containing j of
            (v(S + j) - v(S)) / (n * C(n-1, |S|))
    """
    n = game.n
    if n > EXACT_PLAYER_LIMIT:
        raise ValueError(
            f"{n} players exceeds the exact-mode limit {EXACT_PLAYER_LIMIT}; use mc_shapley"
        )
    phi = np.zeros(n)
    for j in range(n):
        bit = 1 << j
        rest = game.full_mask ^ bit
        sub = rest
        while True:
            size = sub.bit_count()
            weight = 1.0 / (n * math.comb(n - 1, size))
            phi[j] += weight * (game.value(sub | bit) - game.value(sub))
            if sub == 0:
                break
            sub = (sub - 1) & rest
    return phi


def mc_shapley(game: CoalitionGame, rounds: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo Shapley estimate from `rounds` random member permutations.

    Each permutation contributes the marginal gain of every member over its
    predecessors, scaled by 1/rounds. Coalition values are shared through the
    game's cache across permutations.
    """
    if rounds < 1:
        raise ValueError("need at least one permutation")
    phi = np.zeros(game.n)
    for _ in range(rounds):
        perm = rng.permutation(game.n)
        mask = 0
        prev = game.value(0)
        for j in perm:
            mask |= 1 << int(j)
            cur = game.value(mask)
            phi[j] += (cur - prev) / rounds
            prev = cur
    return phi


def normalize_minmax(raw: np.ndarray) -> tuple[np.ndarray, bool]:
    """Rescale to [0, 1]; an (almost) constant vector maps to all ones.

    The all-ones fallback keeps the weight formula on a single code path:
    equal Shapley values then mean plain neighborhood averaging.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        raise ValueError("need at least one member")
    lo = float(raw.min())
    hi = float(raw.max())
    if hi - lo < 1e-12:
        return np.ones_like(raw), True
    return (raw - lo) / (hi - lo), False


def aggregation_weights(phi_hat: np.ndarray, omega_row: np.ndarray) -> np.ndarray:
    """pi_j = phi_hat_j / (omega_j * sum(phi_hat)); satisfies sum(omega*pi) = 1."""
    phi_hat = np.asarray(phi_hat, dtype=np.float64)
    omega_row = np.asarray(omega_row, dtype=np.float64)
    if np.any(omega_row <= 0.0):
        raise ValueError("omega entries for members must be positive")
    total = phi_hat.sum()
    if total <= 0.0:
        raise ValueError("sum of normalized Shapley values must be positive")
    return phi_hat / (omega_row * total)


def compute_shapley(
    game: CoalitionGame,
    mode: str,
    mc_rounds: int,
    rng: np.random.Generator,
    omega_row: np.ndarray,
) -> ShapleyVector:
    """Full per-agent pipeline: raw values, normalization, weights.

    mode "auto" uses exact enumeration up to 8 players and Monte-Carlo above;
    an unset Monte-Carlo budget defaults to max(2n, 16) permutations.
    """
    if mode not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown shapley mode {mode!r}")
    use_exact = mode == "exact" or (mode == "auto" and game.n <= 8)
    if use_exact:
        raw = exact_shapley(game)
    else:
        budget = mc_rounds if mc_rounds > 0 else max(2 * game.n, 16)
        raw = mc_shapley(game, budget, rng)
    normalized, degenerate = normalize_minmax(raw)
    weights = aggregation_weights(normalized, omega_row)
    return ShapleyVector(
        members=list(game.members),
        raw=raw,
        normalized=normalized,
        degenerate=degenerate,
        weights=weights,
    )
