"""Exact cost gradients via a reverse adjoint sweep, plus a finite-difference oracle.

The cost is the mean squared error between readout expectations and binary
labels.  The gradient walks the circuit once forward (storing pre-gate
states), projects the final state onto the readout |0> subspace, and sweeps
backward; each gate's parameter derivatives reduce to a small "environment"
contraction of the backward and forward states on that gate's wires, so the
per-parameter cost is independent of the register size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sim
from .topology import gate_sequence


class GradientError(Exception):
    """Base class for gradient-evaluation errors."""


class EmptyBatchError(GradientError):
    """Cost of an empty batch is undefined."""


class LabelOutOfRangeError(GradientError):
    """Labels must be 0 or 1."""


@dataclass(frozen=True)
class GradientResult:
    grad: np.ndarray
    cost: float


def _check_batch_arrays(model, amps, labels):
    amps = np.asarray(amps, dtype=complex)
    labels = np.asarray(labels, dtype=float)
    if amps.ndim != 2 or amps.shape[0] == 0:
        raise EmptyBatchError("batch must contain at least one sample")
    if labels.shape != (amps.shape[0],):
        raise ValueError("labels must align with the batch rows")
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise LabelOutOfRangeError("labels must be in {0, 1}")
    if amps.shape[1] != 2**model.n_data_qubits:
        raise ValueError(f"input dim {amps.shape[1]} != 2^{model.n_data_qubits}")
    return amps, labels


def _gather(arr, wires, n_qubits):
    """(B, 2^n) -> ((B, 2^k, rest) copy with gate wires leading, axis order)."""
    batch = arr.shape[0]
    k = len(wires)
    axes = [0] + [1 + w for w in wires] + [1 + q for q in range(n_qubits) if q not in wires]
    t = np.transpose(arr.reshape((batch,) + (2,) * n_qubits), axes)
    return np.ascontiguousarray(t).reshape(batch, 2**k, -1), axes


def _scatter(t, axes, n_qubits):
    batch = t.shape[0]
    t = t.reshape((batch,) + (2,) * n_qubits)
    return np.transpose(t, np.argsort(axes)).reshape(batch, 2**n_qubits)


def cost_arrays(model, params, amps, labels):
    """Mean squared error of the readout expectation over a stacked batch."""
    amps, labels = _check_batch_arrays(model, amps, labels)
    _, final, width = _run_forward(model, params, amps)
    p0 = sim.prob0_batch(final, model.readout_qubit, width)
    return float(np.mean((p0 - labels) ** 2))


def _run_forward(model, params, amps, seq=None, keep=False):
    if seq is None:
        seq = gate_sequence(model, params)
    width = model.n_data_qubits
    pre = [] if keep else None
    for u, _, wires, grows, _ in seq:
        if grows:
            amps = sim.append_zero_qubit_batch(amps)
            width += 1
        if keep:
            pre.append((amps, width))
        amps = sim.apply_matrix_batch(amps, u, wires, width)
    return pre, amps, width


def cost_and_grad_arrays(model, params, amps, labels):
    """Cost and its exact gradient for a stacked (B, 2^n) batch.

    Adjoint sweep: the backward state is kept conjugated so the per-gate
    environment E[b, a, c] = sum_rest conj(back)[a, rest] state[c, rest] is a
    plain batched matmul, and the gather for E is reused for the U† step.
    """
    amps, labels = _check_batch_arrays(model, amps, labels)
    params = np.asarray(params, dtype=float)
    seq = gate_sequence(model, params, with_grads=True)
    pre, final, width = _run_forward(model, params, amps, seq=seq, keep=True)

    p0 = sim.prob0_batch(final, model.readout_qubit, width)
    resid = p0 - labels
    cost = float(np.mean(resid**2))

    grad = np.zeros(model.n_params)
    back_c = np.conj(sim.project0_batch(final, model.readout_qubit, width))
    for (u, du, wires, grows, (lo, hi)), (s_pre, w) in zip(reversed(seq), reversed(pre)):
        sg, axes = _gather(s_pre, wires, w)
        bg, _ = _gather(back_c, wires, w)
        env = np.matmul(bg, sg.transpose(0, 2, 1))
        # dM/dtheta_p per sample, then chain through the squared residual.
        dm = 2.0 * np.real(np.einsum("pac,bac->bp", du, env))
        grad[lo:hi] = np.mean(2.0 * resid[:, None] * dm, axis=0)
        # conj(U† back) = embed(u)^T conj(back), applied in gathered form.
        back_c = _scatter(np.matmul(u.T, bg), axes, w)
        if grows:
            back_c = sim.slice_last_qubit0_batch(back_c)
    return GradientResult(grad=grad, cost=cost)


def _stack_batch(batch):
    if len(batch) == 0:
        raise EmptyBatchError("batch must contain at least one sample")
    amps = np.stack([state.amps for state, _ in batch])
    labels = np.array([label for _, label in batch], dtype=float)
    return amps, labels


def cost_and_grad(model, params, batch):
    """Cost and gradient for a sequence of (Statevector, label) pairs."""
    amps, labels = _stack_batch(batch)
    return cost_and_grad_arrays(model, params, amps, labels)


def finite_diff_grad(model, params, batch, step=1e-6):
    """Central-difference gradient of the batch cost; O(P) cost evaluations."""
    amps, labels = _stack_batch(batch)
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    for i in range(params.size):
        shift = np.zeros_like(params)
        shift[i] = step
        c_plus = cost_arrays(model, params + shift, amps, labels)
        c_minus = cost_arrays(model, params - shift, amps, labels)
        grad[i] = (c_plus - c_minus) / (2.0 * step)
    return grad
