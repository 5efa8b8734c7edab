"""RBM training: contrastive divergence with an adaptive-moment optimizer.

Plain CD (negative chains restart at the data every update), gradient ascent
on the log-likelihood.  Training is seed-deterministic end to end.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .domains import DomainSpec, embed_all
from .energies import RbmFreeEnergy, load_rbm_params, save_rbm_params
from .errors import DomainError
from .rng import SALT_DATA, substream


@dataclass(frozen=True)
class RbmTrainConfig:
    hidden: int
    cd_k: int = 10
    learning_rate: float = 0.001
    iterations: int = 1000
    batch_size: int = 128
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.hidden < 1 or self.cd_k < 1 or self.iterations < 0 or self.batch_size < 1:
            raise DomainError("hidden, cd_k, batch_size must be positive; iterations nonnegative")
        if self.learning_rate <= 0:
            raise DomainError("learning rate must be positive")


@dataclass(frozen=True)
class BinaryDataset:
    """Rows of equal-length binary vectors."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise DomainError("dataset must be a nonempty 2-d array")
        if rows.min() < 0 or rows.max() > 1:
            raise DomainError("dataset entries must be 0/1")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def synth_bernoulli_mixture(dim: int, modes: int, per_mode: int, flip_prob: float, seed: int) -> BinaryDataset:
    """`modes` random prototype bit-vectors, each emitted per_mode times with bit flips."""
    if modes < 1 or per_mode < 1:
        raise DomainError("modes and per_mode must be positive")
    if not 0.0 <= flip_prob < 0.5:
        raise DomainError(f"flip_prob must be in [0, 0.5), got {flip_prob}")
    rng = substream(seed, SALT_DATA)
    protos = rng.integers(0, 2, size=(modes, dim))
    rows = np.repeat(protos, per_mode, axis=0)
    flips = rng.random(rows.shape) < flip_prob
    return BinaryDataset(rows=np.where(flips, 1 - rows, rows))


def _gibbs_negative_phase(rbm: RbmFreeEnergy, batch: np.ndarray, k: int, rng: np.random.Generator):
    """k block-Gibbs sweeps started at the batch; returns final visible samples."""
    v = batch.astype(float)
    for _ in range(k):
        h = (rng.random((v.shape[0], rbm.hidden)) < rbm.hidden_means(v)).astype(float)
        v = (rng.random(v.shape) < rbm.visible_means(h)).astype(float)
    return v


def _cd_terms(rbm: RbmFreeEnergy, batch: np.ndarray, k: int, rng: np.random.Generator):
    n = batch.shape[0]
    h_data = rbm.hidden_means(batch)
    v_model = batch if k == 0 else _gibbs_negative_phase(rbm, batch, k, rng)
    h_model = rbm.hidden_means(v_model)
    dW = (h_data.T @ batch - h_model.T @ v_model) / n
    dc = h_data.mean(axis=0) - h_model.mean(axis=0)
    db = batch.mean(axis=0) - v_model.mean(axis=0)
    return (dW, dc, db), v_model


def cd_gradient(rbm: RbmFreeEnergy, batch: np.ndarray, k: int, rng: np.random.Generator):
    """Contrastive-divergence ascent direction (dW, dc, db), averaged over the batch.

    Positive phase uses the exact hidden means at the data; the negative
    phase runs k Gibbs sweeps from the data (k = 0 is a degenerate identity
    allowed for tests: both phases cancel exactly).
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] == 0:
        raise DomainError("cd_gradient needs a nonempty batch")
    grads, _ = _cd_terms(rbm, batch, k, rng)
    return grads


def exact_log_likelihood(rbm: RbmFreeEnergy, rows: np.ndarray, capacity: int = 1 << 20) -> float:
    """Mean log-likelihood by enumerating the visible partition function."""
    xs = embed_all(rbm.domain, capacity)
    u = rbm.value_batch(xs)
    m = u.max()
    log_z = m + np.log(np.exp(u - m).sum())
    return float(np.mean(rbm.value_batch(np.asarray(rows, dtype=float))) - log_z)


def train_rbm(dataset: BinaryDataset, config: RbmTrainConfig):
    """Train by CD-k with Adam-style updates; returns (model, loss_trace).

    The loss trace is the free-energy gap proxy, mean U(data batch) minus
    mean U(negative samples); it hovers near zero once the model matches the
    data.  iterations = 0 returns the initialization untouched.
    """
    if config.batch_size > dataset.size:
        raise DomainError(f"batch_size {config.batch_size} exceeds dataset size {dataset.size}")
    rng = substream(config.seed, SALT_DATA)
    d = dataset.dim
    m = config.hidden
    W = rng.normal(0.0, 0.01, size=(m, d))
    c = np.zeros(m)
    b = np.zeros(d)
    mom = [np.zeros_like(W), np.zeros_like(c), np.zeros_like(b)]
    vel = [np.zeros_like(W), np.zeros_like(c), np.zeros_like(b)]
    losses = np.empty(config.iterations)
    dom = DomainSpec.binary01(d)
    for it in range(config.iterations):
        idx = rng.integers(0, dataset.size, size=config.batch_size)
        batch = dataset.rows[idx].astype(float)
        model = RbmFreeEnergy(domain=dom, W=W, c=c, b=b)
        grads, v_neg = _cd_terms(model, batch, config.cd_k, rng)
        losses[it] = model.value_batch(batch).mean() - model.value_batch(v_neg).mean()
        t = it + 1
        params = [W, c, b]
        for j in range(3):
            mom[j] = config.beta1 * mom[j] + (1 - config.beta1) * grads[j]
            vel[j] = config.beta2 * vel[j] + (1 - config.beta2) * grads[j] ** 2
            m_hat = mom[j] / (1 - config.beta1**t)
            v_hat = vel[j] / (1 - config.beta2**t)
            params[j] = params[j] + config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
        W, c, b = params
    return RbmFreeEnergy(domain=dom, W=W, c=c, b=b), losses


def save_rbm(model: RbmFreeEnergy, path) -> None:
    """Bit-exact round-trip persistence of (W, c, b)."""
    save_rbm_params(path, model.W, model.c, model.b)


def load_rbm(path) -> RbmFreeEnergy:
    W, c, b = load_rbm_params(path)
    return RbmFreeEnergy(domain=DomainSpec.binary01(W.shape[1]), W=W, c=c, b=b)


_MAGIC_DATA = b"DREXDATA"


def save_dataset(dataset: BinaryDataset, path) -> None:
    """Write rows as: magic, u32 rows, u32 dim, then rows*dim bytes of 0/1."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC_DATA)
        fh.write(struct.pack("<II", dataset.size, dataset.dim))
        fh.write(dataset.rows.astype(np.uint8).tobytes(order="C"))


def load_dataset(path) -> BinaryDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _MAGIC_DATA:
        raise DomainError(f"bad magic {blob[:8]!r}, expected {_MAGIC_DATA!r}")
    if len(blob) < 16:
        raise DomainError("truncated header")
    rows, dim = struct.unpack("<II", blob[8:16])
    if len(blob) != 16 + rows * dim:
        raise DomainError(f"payload is {len(blob) - 16} bytes, header implies {rows * dim}")
    data = np.frombuffer(blob, dtype=np.uint8, offset=16).reshape(rows, dim)
    return BinaryDataset(rows=data.astype(np.int64))
