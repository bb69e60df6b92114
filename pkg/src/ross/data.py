"""Datasets, non-IID partitioning, validation splits and attack injection.

A Dataset is a dense float64 feature matrix plus integer labels. Agents hold
index shards into one shared training set; data-level attacks (feature noise,
label flips) rewrite only the malicious agents' shard copies, and gradient
poisoning is applied at send time in the round engine.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataLoadError
from .rng import substream

ATTACK_KINDS = ("none", "data_noise", "label_flip", "grad_poison")

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray  # (n, input_dim) float64
    labels: np.ndarray  # (n,) int64 in [0, num_classes)
    num_classes: int

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("features/labels length mismatch")
        if len(self.labels) and int(self.labels.max()) >= self.num_classes:
            raise ValueError("label out of range")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "none"
    fraction: float = 0.3
    sigma: float = 1.0
    beta_lo: float = -0.5
    beta_hi: float = 0.5

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ConfigError(f"attack kind {self.kind!r} not one of {ATTACK_KINDS}")
        if not 0.0 <= self.fraction < 1.0:
            raise ConfigError("attack fraction must lie in [0, 1)")
        if self.sigma < 0:
            raise ConfigError("noise sigma must be non-negative")
        if self.beta_lo > self.beta_hi:
            raise ConfigError("beta range must satisfy lo <= hi")


def malicious_ids(attack: AttackConfig, n_agents: int, seed: int) -> frozenset:
    """First floor(fraction*N) ids of a seed-derived permutation."""
    if attack.kind == "none":
        return frozenset()
    count = int(attack.fraction * n_agents)
    perm = substream(seed, "malicious").permutation(n_agents)
    return frozenset(int(a) for a in perm[:count])


def gen_blobs(seed: int, n_samples: int, input_dim: int, num_classes: int, spread: float) -> Dataset:
    """Gaussian class clusters around unit-norm centers scaled by `spread`.

    Class counts are as equal as possible (first n % Y classes get one extra).
    """
    if num_classes < 2 or n_samples < num_classes:
        raise ConfigError("need num_classes >= 2 and n_samples >= num_classes")
    rng = substream(seed, "blobs")
    raw = rng.standard_normal((num_classes, input_dim))
    centers = spread * raw / np.linalg.norm(raw, axis=1, keepdims=True)
    base, extra = divmod(n_samples, num_classes)
    feats, labs = [], []
    for c in range(num_classes):
        count = base + (1 if c < extra else 0)
        feats.append(centers[c] + rng.standard_normal((count, input_dim)))
        labs.append(np.full(count, c, dtype=np.int64))
    features = np.concatenate(feats)
    labels = np.concatenate(labs)
    order = rng.permutation(n_samples)
    return Dataset(features[order], labels[order], num_classes)


def _read_exact(fh, count: int, path, what: str) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise DataLoadError(
            f"{path}: truncated while reading {what} at byte {fh.tell() - len(buf)}"
        )
    return buf


def load_mnist_idx(images_path, labels_path, limit: int | None = None) -> Dataset:
    """Standard big-endian IDX image/label pair, pixels scaled to [0, 1]."""
    with open(images_path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path, "image header"))
        if magic != IDX_IMAGES_MAGIC:
            raise DataLoadError(
                f"{images_path}: wrong magic for images 0x{magic:08x} at byte 0"
            )
        count = n if limit is None else min(limit, n)
        pixels = np.frombuffer(
            _read_exact(fh, count * rows * cols, images_path, "pixel data"), dtype=np.uint8
        )
    with open(labels_path, "rb") as fh:
        magic, n_lab = struct.unpack(">II", _read_exact(fh, 8, labels_path, "label header"))
        if magic != IDX_LABELS_MAGIC:
            raise DataLoadError(
                f"{labels_path}: wrong magic for labels 0x{magic:08x} at byte 0"
            )
        if n_lab != n:
            raise DataLoadError(f"{labels_path}: {n_lab} labels for {n} images")
        labels = np.frombuffer(_read_exact(fh, count, labels_path, "label data"), dtype=np.uint8)
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64), num_classes=10)


def dirichlet_partition(dataset: Dataset, n_agents: int, mu: float, seed: int) -> list[np.ndarray]:
    """Shard indices per agent from Dirichlet(mu * ones) label proportions.

    Each class's indices are split across agents proportionally to the agents'
    drawn probability for that class, with largest-remainder rounding so the
    shards partition the index set exactly. Empty shards are repaired by
    moving one sample from the currently largest shard.
    """
    if mu <= 0:
        raise ConfigError("dirichlet mu must be positive")
    if n_agents < 2:
        raise ConfigError("need at least 2 agents")
    if len(dataset) < n_agents:
        raise ConfigError("dataset smaller than agent count")
    rng = substream(seed, "partition")
    props = rng.dirichlet(np.full(dataset.num_classes, mu), size=n_agents)
    shards: list[list[int]] = [[] for _ in range(n_agents)]
    for c in range(dataset.num_classes):
        idx_c = np.flatnonzero(dataset.labels == c)
        if len(idx_c) == 0:
            continue
        idx_c = rng.permutation(idx_c)
        weights = props[:, c]
        total = weights.sum()
        quotas = weights / total * len(idx_c)
        counts = np.floor(quotas).astype(int)
        remainder = quotas - counts
        shortfall = len(idx_c) - counts.sum()
        # ties on remainders resolve to the lower agent id
        for a in np.lexsort((np.arange(n_agents), -remainder))[:shortfall]:
            counts[a] += 1
        at = 0
        for a in range(n_agents):
            shards[a].extend(int(i) for i in idx_c[at : at + counts[a]])
            at += counts[a]
    while any(len(s) == 0 for s in shards):
        empty = min(a for a in range(n_agents) if len(shards[a]) == 0)
        donor = max(range(n_agents), key=lambda a: (len(shards[a]), -a))
        shards[empty].append(shards[donor].pop())
    return [np.array(sorted(s), dtype=np.int64) for s in shards]


def make_validation(test_set: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Uniform split of the test set into (validation, remaining_test)."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError("validation fraction must lie in (0, 1)")
    n = len(test_set)
    k = round(fraction * n)
    perm = substream(seed, "validation").permutation(n)
    val_idx = np.sort(perm[:k])
    rest_idx = np.sort(perm[k:])
    return test_set.subset(val_idx), test_set.subset(rest_idx)


def apply_data_noise(samples: Dataset, sigma: float, seed: int, shard_id: int) -> Dataset:
    """Additive iid N(0, sigma^2) on features; labels untouched."""
    if sigma < 0:
        raise ConfigError("sigma must be non-negative")
    if sigma == 0.0:
        return Dataset(samples.features.copy(), samples.labels.copy(), samples.num_classes)
    rng = substream(seed, "data_noise", shard_id)
    noise = sigma * rng.standard_normal(samples.features.shape)
    return Dataset(samples.features + noise, samples.labels.copy(), samples.num_classes)


def flip_labels(samples: Dataset, num_classes: int) -> Dataset:
    """Cyclic label shift y -> (y + 1) % Y."""
    return Dataset(samples.features.copy(), (samples.labels + 1) % num_classes, num_classes)


def poison_gradient(grad: np.ndarray, beta_lo: float, beta_hi: float, rng: np.random.Generator) -> np.ndarray:
    """Scale by (1 + beta), beta uniform in [beta_lo, beta_hi] per call."""
    if beta_lo > beta_hi:
        raise ConfigError("beta range must satisfy lo <= hi")
    beta = rng.uniform(beta_lo, beta_hi)
    return (1.0 + beta) * grad


def save_dataset(path, ds: Dataset) -> None:
    """Cache format: one text header line, then little-endian doubles."""
    with open(path, "wb") as fh:
        fh.write(f"ross-data v1 {len(ds)} {ds.input_dim} {ds.num_classes}\n".encode())
        fh.write(ds.features.astype("<f8").tobytes())
        fh.write(ds.labels.astype(np.float64).astype("<f8").tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        header = fh.readline().decode().split()
        if len(header) != 5 or header[0] != "ross-data" or header[1] != "v1":
            raise DataLoadError(f"{path}: bad cache header {' '.join(header)!r}")
        n, dim, classes = (int(v) for v in header[2:])
        body = fh.read()
    need = (n * dim + n) * 8
    if len(body) != need:
        raise DataLoadError(f"{path}: expected {need} payload bytes, found {len(body)}")
    feats = np.frombuffer(body[: n * dim * 8], dtype="<f8").reshape(n, dim)
    labels = np.frombuffer(body[n * dim * 8 :], dtype="<f8").astype(np.int64)
    return Dataset(feats.copy(), labels, classes)
