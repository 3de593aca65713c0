"""Tree and entanglement-renormalization classifier circuits.

A tree classifier on N = 2^L qubits applies one two-qubit block per adjacent
pair, keeps one output wire of each block and discards the other, and repeats
until a single readout wire survives (N-1 blocks).  The renormalization
variant additionally places a "disentangler" block across each pair of
adjacent tree blocks before every layer.

Surviving-wire rule: within each layer, the block at an even pair position
keeps its higher-indexed wire and the block at an odd pair position keeps its
lower-indexed wire, funnelling toward the center of the register.  For 8
qubits this makes wire 5 the readout and, for the simple CNOT-based blocks,
reverses the CNOT direction on the second, fourth and sixth blocks (a block
whose surviving wire is its lower-indexed wire carries its CNOT reversed so
the target is the survivor).

Ancilla-kind circuits allocate one fresh ancilla wire per block, appended
after the data wires in block order and prepared in |0>.  Ancillas are never
reused after their block; leaving them untouched in the statevector is
equivalent to tracing them out before the readout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gates, sim
from .gates import GateKind, MeasurementRotation, UnitaryBlock, meas_param_count


class TopologyError(Exception):
    """Base class for circuit-construction errors."""


class UnsupportedSizeError(TopologyError):
    """Qubit count is not a supported power of two."""


class DimensionMismatchError(TopologyError):
    """Input state does not match the model's data qubit count."""


@dataclass(frozen=True)
class ModelBlock:
    """Structural slot for one block: wires, kind, and its slice of the flat params."""

    kind: GateKind
    wires: tuple
    param_slice: tuple
    cnot_reversed: bool = False
    is_disentangler: bool = False
    layer: int = 0
    survivor: int | None = None

    def bind(self, params):
        """Materialize a UnitaryBlock with this block's parameters from ``params``."""
        lo, hi = self.param_slice
        return UnitaryBlock(self.kind, params[lo:hi], self.wires, self.cnot_reversed)


@dataclass(frozen=True)
class ClassifierModel:
    """Ordered gate list plus readout; parameters live in a separate flat vector."""

    layout: str  # "ttn" or "mera"
    kind: GateKind
    n_data_qubits: int
    n_total_qubits: int
    blocks: tuple
    readout_qubit: int
    meas_slice: tuple
    n_params: int

    def meas(self, params):
        lo, hi = self.meas_slice
        return MeasurementRotation(params[lo:hi], self.readout_qubit, self.kind.is_real)

    def param_slices(self):
        """Offset table: one (lo, hi) per block, then the measurement slice."""
        return [b.param_slice for b in self.blocks] + [self.meas_slice]


def _tree_plan(n_qubits):
    """Layered (low_wire, high_wire, survivor) triples and the readout wire."""
    wires = list(range(n_qubits))
    layers = []
    while len(wires) > 1:
        layer = []
        nxt = []
        for pos in range(len(wires) // 2):
            a, b = wires[2 * pos], wires[2 * pos + 1]
            keep = b if pos % 2 == 0 else a
            layer.append((a, b, keep))
            nxt.append(keep)
        layers.append(layer)
        wires = nxt
    return layers, wires[0]


def _check_size(n_qubits):
    if n_qubits < 4 or n_qubits & (n_qubits - 1) != 0:
        raise UnsupportedSizeError(f"need a power-of-two qubit count >= 4, got {n_qubits}")
    if n_qubits > sim.MAX_QUBITS:
        raise UnsupportedSizeError(f"{n_qubits} data qubits exceeds the simulator limit")


def _assemble(layout, kind, n_qubits, slots):
    """Assign parameter slices and ancilla wires to the planned (wires, flags) slots."""
    blocks = []
    offset = 0
    n_total = n_qubits
    for wires, reversed_, is_dis, layer, survivor in slots:
        if kind.n_wires == 3:
            wires = wires + (n_total,)
            n_total += 1
        blocks.append(
            ModelBlock(
                kind=kind,
                wires=wires,
                param_slice=(offset, offset + kind.param_count),
                cnot_reversed=reversed_ and kind.is_simple,
                is_disentangler=is_dis,
                layer=layer,
                survivor=survivor,
            )
        )
        offset += kind.param_count
    meas_slice = (offset, offset + meas_param_count(kind.is_real))
    layers, readout = _tree_plan(n_qubits)
    return ClassifierModel(
        layout=layout,
        kind=kind,
        n_data_qubits=n_qubits,
        n_total_qubits=n_total,
        blocks=tuple(blocks),
        readout_qubit=readout,
        meas_slice=meas_slice,
        n_params=meas_slice[1],
    )


def build_ttn(n_qubits, kind):
    """Tree classifier: N-1 blocks in layer order, readout at the center survivor."""
    _check_size(n_qubits)
    layers, _ = _tree_plan(n_qubits)
    slots = []
    for li, layer in enumerate(layers):
        for a, b, keep in layer:
            slots.append(((a, b), keep == min(a, b), False, li, keep))
    return _assemble("ttn", kind, n_qubits, slots)


def build_mera(n_qubits, kind):
    """Tree classifier with a disentangler across each adjacent block pair per layer."""
    _check_size(n_qubits)
    layers, _ = _tree_plan(n_qubits)
    slots = []
    for li, layer in enumerate(layers):
        for (a0, b0, _), (a1, b1, _) in zip(layer, layer[1:]):
            slots.append(((b0, a1), False, True, li, None))
        for a, b, keep in layer:
            slots.append(((a, b), keep == min(a, b), False, li, keep))
    return _assemble("mera", kind, n_qubits, slots)


def hybrid_init(ttn_model, ttn_params):
    """Turn a trained tree model into an equivalent renormalization model.

    Tree block and measurement parameters are copied; disentanglers start at
    the zero point of the exponential map, i.e. exact identities, so the new
    model predicts identically to the source until further training.  Simple
    kinds have no identity setting (zero angles leave a bare CNOT) and are
    rejected.
    """
    kind = ttn_model.kind
    if kind.is_simple:
        raise gates.UnsupportedKindError("hybrid init needs an exponential-map kind")
    if ttn_model.layout != "ttn":
        raise TopologyError("hybrid init expects a ttn source model")
    mera = build_mera(ttn_model.n_data_qubits, kind)
    params = np.zeros(mera.n_params)
    tree_blocks = [b for b in mera.blocks if not b.is_disentangler]
    for src, dst in zip(ttn_model.blocks, tree_blocks):
        lo, hi = src.param_slice
        dlo, dhi = dst.param_slice
        params[dlo:dhi] = ttn_params[lo:hi]
    mlo, mhi = mera.meas_slice
    slo, shi = ttn_model.meas_slice
    params[mlo:mhi] = ttn_params[slo:shi]
    return mera, params


# --- evaluation engine ---


def gate_sequence(model, params, with_grads=False):
    """Bound gate list: (matrix, grads or None, wires, grows, param_slice) per gate.

    Blocks come first, the measurement rotation last.  ``grows`` marks gates
    whose last wire is a fresh ancilla to be appended in |0> on first use.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (model.n_params,):
        raise gates.ParamCountMismatchError(
            f"model has {model.n_params} params, got {params.shape}"
        )
    seq = []
    for blk in model.blocks:
        lo, hi = blk.param_slice
        if with_grads:
            u, du = gates.unitary_and_grads(blk.kind, params[lo:hi], blk.cnot_reversed)
        else:
            u, du = gates.unitary_matrix(blk.kind, params[lo:hi], blk.cnot_reversed), None
        seq.append((u, du, blk.wires, blk.kind.n_wires == 3, blk.param_slice))
    meas = model.meas(params)
    if with_grads:
        mu, mdu = gates.measurement_rotation_and_grads(meas)
    else:
        mu, mdu = gates.measurement_rotation_matrix(meas), None
    seq.append((mu, mdu, (model.readout_qubit,), False, model.meas_slice))
    return seq


def forward_batch(model, params, amps, keep_states=False):
    """Run the circuit on a (B, 2^n_data) amplitude batch; returns p0 per row.

    With ``keep_states`` also returns the pre-gate state for every gate and
    the final state, as needed by the adjoint gradient sweep.
    """
    if amps.shape[1] != 2**model.n_data_qubits:
        raise DimensionMismatchError(
            f"input dim {amps.shape[1]} != 2^{model.n_data_qubits}"
        )
    seq = gate_sequence(model, params)
    width = model.n_data_qubits
    pre_states = [] if keep_states else None
    for u, _, wires, grows, _ in seq:
        if grows:
            amps = sim.append_zero_qubit_batch(amps)
            width += 1
        if keep_states:
            pre_states.append((amps, width))
        amps = sim.apply_matrix_batch(amps, u, wires, width)
    p0 = sim.prob0_batch(amps, model.readout_qubit, width)
    if keep_states:
        return p0, pre_states, (amps, width)
    return p0


def effective_observable(model, params):
    """Collapse the whole circuit to one 2^n x 2^n observable on the data wires.

    Pulls the readout projector backward through the gate list (Heisenberg
    picture).  An ancilla block contributes <0|U† (O x I) U|0> on its ancilla
    wire, which is the top-left ancilla block of the conjugated operator, so
    ancillas never appear in the result.  The readout probability of input
    |psi> is then <psi|O|psi>, one matrix-vector product per sample.
    """
    n = model.n_data_qubits
    dim = 2**n
    seq = gate_sequence(model, params)
    # Seed with R† P0 R on the readout wire, embedded over the data register.
    mu = seq[-1][0]
    seed = mu.conj().T @ np.diag([1.0, 0.0]).astype(complex) @ mu
    obs = _embed_on_wires(seed, (model.readout_qubit,), n)
    for u, _, wires, grows, _ in reversed(seq[:-1]):
        if grows:
            # O <- <0_anc| U† (O x I_anc) U |0_anc>, ancilla as the last wire.
            wide = np.kron(obs, np.eye(2, dtype=complex))
            wide = _conjugate_on_wires(wide, u, wires[:2] + (n,), n + 1)
            obs = np.ascontiguousarray(wide.reshape(dim, 2, dim, 2)[:, 0, :, 0])
        else:
            obs = _conjugate_on_wires(obs, u, wires, n)
    return obs


# apply_matrix_batch treats rows as states: apply(X, u) = X @ embed(u)^T.
# The helpers below build on that identity.


def _embed_on_wires(op, wires, n_qubits):
    """op on the given wires, identity elsewhere, as a dense 2^n x 2^n matrix."""
    eye = np.eye(2**n_qubits, dtype=complex)
    return sim.apply_matrix_batch(eye, op.T, wires, n_qubits)


def _conjugate_on_wires(obs, u, wires, n_qubits):
    """U† obs U with U acting on the given wires of the register."""
    m = sim.apply_matrix_batch(obs.T, u.conj().T, wires, n_qubits).T  # U† obs
    return sim.apply_matrix_batch(m, u.T, wires, n_qubits)  # (U† obs) U


def predict_expectation_batch(model, params, amps):
    """Readout |0> probability for every row of a stacked input batch.

    Uses the effective-observable route: one conjugation sweep independent of
    the batch size, then a single dense contraction per sample.
    """
    amps = np.asarray(amps, dtype=complex)
    if amps.shape[1] != 2**model.n_data_qubits:
        raise DimensionMismatchError(
            f"input dim {amps.shape[1]} != 2^{model.n_data_qubits}"
        )
    obs = effective_observable(model, np.asarray(params, dtype=float))
    return np.einsum("bi,ij,bj->b", amps.conj(), obs, amps, optimize=True).real


def predict_expectation(model, params, state):
    """Expectation of the readout projector for a single encoded input."""
    if state.n_qubits != model.n_data_qubits:
        raise DimensionMismatchError(
            f"state has {state.n_qubits} qubits, model encodes {model.n_data_qubits}"
        )
    return float(predict_expectation_batch(model, params, state.amps[None, :])[0])


def predict_label(model, params, state):
    """Binary label: 1 iff the readout expectation is >= 0.5 (ties go to 1)."""
    return 1 if predict_expectation(model, params, state) >= 0.5 else 0


def predict_label_sampled(model, params, state, shots, seed):
    """Majority-vote label from a finite shot budget (deterministic per seed)."""
    p0 = predict_expectation(model, params, state)
    rng = np.random.default_rng(seed)
    count0 = rng.binomial(shots, min(max(p0, 0.0), 1.0))
    return 1 if count0 / shots >= 0.5 else 0


# --- native-gate view and OpenQASM emission (simple/real circuits only) ---


def native_gate_list(model, params):
    """Flatten a SIMPLE_REAL model to [('ry', wire, angle) | ('cx', ctrl, tgt)] ops.

    Includes the final measurement rotation as a trailing 'ry'.
    """
    if model.kind is not GateKind.SIMPLE_REAL:
        raise gates.UnsupportedKindError("native gate view needs the simple/real kind")
    params = np.asarray(params, dtype=float)
    ops = []
    for blk in model.blocks:
        ops.extend(gates.decompose_simple_to_native(blk.bind(params)))
    meas = model.meas(params)
    ops.append(("ry", model.readout_qubit, float(meas.params[0])))
    return ops


def export_qasm(model, params):
    """OpenQASM 2.0 text for a SIMPLE_REAL model, measuring the readout qubit."""
    ops = native_gate_list(model, params)
    lines = [
        "OPENQASM 2.0;",
        'include "qelib1.inc";',
        f"qreg q[{model.n_total_qubits}];",
        "creg c[1];",
    ]
    for op in ops:
        if op[0] == "ry":
            lines.append(f"ry({op[2]:.17g}) q[{op[1]}];")
        else:
            lines.append(f"cx q[{op[1]}],q[{op[2]}];")
    lines.append(f"measure q[{model.readout_qubit}] -> c[0];")
    return "\n".join(lines) + "\n"


def parse_qasm(text):
    """Parse the subset of OpenQASM 2.0 emitted by :func:`export_qasm`.

    Returns (n_qubits, ops, measured_qubit) with ops in native-gate form.
    """
    n_qubits = None
    measured = None
    ops = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(("OPENQASM", "include", "creg", "//")):
            continue
        if line.startswith("qreg"):
            n_qubits = int(line.split("[")[1].split("]")[0])
        elif line.startswith("ry"):
            angle = float(line[line.index("(") + 1 : line.index(")")])
            wire = int(line.split("q[")[1].split("]")[0])
            ops.append(("ry", wire, angle))
        elif line.startswith("cx"):
            a, b = (int(part.split("]")[0]) for part in line.split("q[")[1:])
            ops.append(("cx", a, b))
        elif line.startswith("measure"):
            measured = int(line.split("q[")[1].split("]")[0])
        else:
            raise ValueError(f"unsupported qasm line: {line!r}")
    return n_qubits, ops, measured


def replay_native_ops(ops, state):
    """Apply a native-gate op list to a Statevector (round-trip check helper)."""
    out = state
    for op in ops:
        if op[0] == "ry":
            out = sim.apply_unitary(out, gates.ry(op[2]), (op[1],))
        else:
            out = sim.apply_unitary(out, gates.CNOT, (op[1], op[2]))
    return out
