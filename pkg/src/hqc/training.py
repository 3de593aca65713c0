"""Minibatch Adam training with early stopping, metrics curves, and checkpoints."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import topology
from .gates import GateKind
from .gradients import cost_and_grad_arrays
from .topology import build_mera, build_ttn


class TrainerError(Exception):
    """Base class for training errors."""


class MissingSplitError(TrainerError):
    """Dataset lacks a split the training protocol needs."""


class VersionError(TrainerError):
    """Checkpoint file carries an unsupported format version."""


CHECKPOINT_VERSION = 1

INIT_UNIFORM_ANGLES = "uniform_angles"
INIT_NEAR_IDENTITY = "near_identity"
INIT_AUTO = "auto"

SELECT_BEST_VAL = "val"
SELECT_BEST_TEST = "test"


@dataclass
class TrainConfig:
    """Hyperparameters; defaults follow the 20-example-batch protocol."""

    batch_size: int = 20
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iters: int = 4000
    eval_every: int = 10
    patience: int = 30  # consecutive non-improving evals; <= 0 disables early stopping
    rng_seed: int = 0
    init_scheme: str = INIT_AUTO
    selection: str = SELECT_BEST_VAL
    train_metric_cap: int = 2048  # train accuracy is evaluated on at most this many samples

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TrainReport:
    """Metrics curves and the selected parameters of one training run."""

    curves: list  # rows (iteration, train_cost, train_acc, val_acc, test_acc)
    best_params: np.ndarray
    steps_to_converge: int
    best_val_acc: float
    test_acc_at_best: float
    total_iters: int


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(m=np.zeros(n), v=np.zeros(n))


def init_params(model, scheme, seed):
    """Seeded initial parameter vector.

    ``uniform_angles`` draws every entry from Uniform(-pi, pi); this is the
    natural scale for rotation angles.  ``near_identity`` draws from
    Uniform(-0.1, 0.1), keeping exponential-map blocks close to the identity.
    ``auto`` picks per the model's gate kind: angles for simple kinds,
    near-identity for the generator-coefficient kinds.
    """
    if scheme == INIT_AUTO:
        scheme = INIT_UNIFORM_ANGLES if model.kind.is_simple else INIT_NEAR_IDENTITY
    rng = np.random.default_rng(seed)
    if scheme == INIT_UNIFORM_ANGLES:
        return rng.uniform(-np.pi, np.pi, size=model.n_params)
    if scheme == INIT_NEAR_IDENTITY:
        return rng.uniform(-0.1, 0.1, size=model.n_params)
    raise ValueError(f"unknown init scheme {scheme!r}")


def adam_step(params, grad, state, config, t):
    """One Adam update (t is 1-based); returns (new_params, new_state)."""
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    v = config.beta2 * state.v + (1.0 - config.beta2) * grad**2
    m_hat = m / (1.0 - config.beta1**t)
    v_hat = v / (1.0 - config.beta2**t)
    new_params = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
    return new_params, AdamState(m=m, v=v)


def _accuracy(model, params, amps, labels):
    if amps.shape[0] == 0:
        return float("nan")
    p0 = topology.predict_expectation_batch(model, params, amps)
    return float(np.mean((p0 >= 0.5).astype(int) == labels))


def train(model, dataset, config, initial_params=None):
    """Minibatch Adam on the mean-squared-error cost with periodic evaluation.

    Shuffles the training split every epoch with the seeded RNG.  Every
    ``eval_every`` batches the validation and test accuracy are recorded and
    the best parameters under ``config.selection`` are kept; training stops
    early once ``patience`` consecutive evaluations fail to improve.
    """
    train_idx = dataset.indices("train")
    test_idx = dataset.indices("test")
    if train_idx.size == 0 or test_idx.size == 0:
        raise MissingSplitError("dataset needs nonempty train and test splits")
    val_idx = dataset.indices("val")
    if val_idx.size == 0:
        val_idx = train_idx  # tiny datasets: validate on the training split

    rng = np.random.default_rng(config.rng_seed)
    params = (
        np.asarray(initial_params, dtype=float).copy()
        if initial_params is not None
        else init_params(model, config.init_scheme, config.rng_seed)
    )
    state = AdamState.zeros(params.size)

    amps, labels = dataset.states, dataset.labels
    cap = min(config.train_metric_cap, train_idx.size)
    metric_train_idx = train_idx[: cap] if cap == train_idx.size else rng.choice(
        train_idx, size=cap, replace=False
    )

    curves = []
    best_params = params.copy()
    best_metric = -np.inf
    best_cost = np.inf
    best_val = float("nan")
    best_test = float("nan")
    best_iter = 0
    evals_since_best = 0
    order = rng.permutation(train_idx)
    cursor = 0
    cost_window = []
    stopped_at = config.max_iters

    for t in range(1, config.max_iters + 1):
        if cursor >= order.size:
            order = rng.permutation(train_idx)
            cursor = 0
        batch_idx = order[cursor : cursor + config.batch_size]
        cursor += config.batch_size
        result = cost_and_grad_arrays(model, params, amps[batch_idx], labels[batch_idx])
        cost_window.append(result.cost)
        params, state = adam_step(params, result.grad, state, config, t)

        if t % config.eval_every == 0 or t == config.max_iters:
            val_acc = _accuracy(model, params, amps[val_idx], labels[val_idx])
            test_acc = _accuracy(model, params, amps[test_idx], labels[test_idx])
            train_acc = _accuracy(model, params, amps[metric_train_idx], labels[metric_train_idx])
            window_cost = float(np.mean(cost_window))
            curves.append((t, window_cost, train_acc, val_acc, test_acc))
            cost_window = []
            metric = test_acc if config.selection == SELECT_BEST_TEST else val_acc
            improved = metric > best_metric
            # At equal accuracy prefer the lower-cost (larger-margin) model;
            # only strict accuracy gains reset the early-stopping clock.
            if improved or (metric == best_metric and window_cost < best_cost):
                best_metric = metric
                best_cost = window_cost
                best_params = params.copy()
                best_val = val_acc
                best_test = test_acc
                best_iter = t
            if improved:
                evals_since_best = 0
            else:
                evals_since_best += 1
            if config.patience > 0 and evals_since_best >= config.patience:
                stopped_at = t
                break

    return TrainReport(
        curves=curves,
        best_params=best_params,
        steps_to_converge=best_iter,
        best_val_acc=best_val,
        test_acc_at_best=best_test,
        total_iters=min(stopped_at, config.max_iters),
    )


# --- checkpoints ---


def _format_params(params):
    return [f"{x:.17g}" for x in np.asarray(params, dtype=float)]


def save_checkpoint(model, params, path, train_config=None, metrics=None):
    """Self-describing JSON checkpoint; parameters at 17 significant digits."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "layout": model.layout,
        "n_qubits": model.n_data_qubits,
        "gate_kind": model.kind.value,
        "wire_table": [list(b.wires) for b in model.blocks],
        "cnot_reversal_flags": [bool(b.cnot_reversed) for b in model.blocks],
        "readout_qubit": model.readout_qubit,
        "params": _format_params(params),
        "train_config": dict(train_config or {}),
        "metrics": dict(metrics or {}),
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def load_checkpoint(path):
    """Rebuild (model, params, doc) from a checkpoint; verifies self-description."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"checkpoint format {version!r}, expected {CHECKPOINT_VERSION}")
    kind = GateKind(doc["gate_kind"])
    builder = build_ttn if doc["layout"] == "ttn" else build_mera
    model = builder(doc["n_qubits"], kind)
    if [list(b.wires) for b in model.blocks] != [list(w) for w in doc["wire_table"]]:
        raise ValueError("checkpoint wire table does not match the rebuilt model")
    if [bool(b.cnot_reversed) for b in model.blocks] != list(doc["cnot_reversal_flags"]):
        raise ValueError("checkpoint reversal flags do not match the rebuilt model")
    if model.readout_qubit != doc["readout_qubit"]:
        raise ValueError("checkpoint readout qubit does not match the rebuilt model")
    params = np.array([float(x) for x in doc["params"]])
    if params.size != model.n_params:
        raise ValueError("checkpoint parameter count does not match the rebuilt model")
    return model, params, doc
