"""Independent brute-force oracles for the test suite.

Everything here recomputes quantities through a different code path than the
package: full 2^n x 2^n matrix embeddings via explicit bit arithmetic,
double-sum partial traces, truncated Taylor series for matrix exponentials.
Slow on purpose; used only at small sizes.
"""

import numpy as np

from hqc import gates
from hqc.topology import gate_sequence


def embed_unitary(u, wires, n_qubits):
    """Dense 2^n x 2^n embedding of a k-wire gate, by explicit index arithmetic."""
    dim = 2**n_qubits
    k = len(wires)
    full = np.zeros((dim, dim), dtype=complex)
    shifts = [n_qubits - 1 - w for w in wires]

    def sub_index(basis):
        s = 0
        for pos, shift in enumerate(shifts):
            s |= ((basis >> shift) & 1) << (k - 1 - pos)
        return s

    for col in range(dim):
        sub_col = sub_index(col)
        rest = col
        for shift in shifts:
            rest &= ~(1 << shift)
        for sub_row in range(2**k):
            row = rest
            for pos, shift in enumerate(shifts):
                row |= ((sub_row >> (k - 1 - pos)) & 1) << shift
            full[row, col] = u[sub_row, sub_col]
    return full


def circuit_matrix(ops, n_qubits):
    """Product of embedded gates applied left to right (first op acts first)."""
    dim = 2**n_qubits
    full = np.eye(dim, dtype=complex)
    for u, wires in ops:
        full = embed_unitary(u, wires, n_qubits) @ full
    return full


def model_expectation_dense(model, params, input_amps):
    """Expectation via one dense matrix chain over the full register (data + ancillas)."""
    n = model.n_total_qubits
    state = np.asarray(input_amps, dtype=complex)
    for _ in range(n - model.n_data_qubits):
        state = np.kron(state, np.array([1.0, 0.0]))
    ops = [(u, wires) for u, _, wires, _, _ in gate_sequence(model, params)]
    full = circuit_matrix(ops, n)
    final = full @ state
    p0 = 0.0
    shift = n - 1 - model.readout_qubit
    for idx, amp in enumerate(final):
        if (idx >> shift) & 1 == 0:
            p0 += abs(amp) ** 2
    return p0


def partial_trace_bruteforce(rho, keep, n_qubits):
    """Reduced matrix by explicit double sum over the traced subsystem."""
    traced = [q for q in range(n_qubits) if q not in keep]
    m = len(keep)
    out = np.zeros((2**m, 2**m), dtype=complex)
    for row_keep in range(2**m):
        for col_keep in range(2**m):
            total = 0.0j
            for env in range(2 ** len(traced)):
                row = col = 0
                for pos, q in enumerate(keep):
                    bit = (row_keep >> (m - 1 - pos)) & 1
                    row |= bit << (n_qubits - 1 - q)
                    bit = (col_keep >> (m - 1 - pos)) & 1
                    col |= bit << (n_qubits - 1 - q)
                for pos, q in enumerate(traced):
                    bit = (env >> (len(traced) - 1 - pos)) & 1
                    row |= bit << (n_qubits - 1 - q)
                    col |= bit << (n_qubits - 1 - q)
                total += rho[row, col]
            out[row_keep, col_keep] = total
    return out


def taylor_expm(a, terms=30):
    """Truncated power series of the matrix exponential."""
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ a / k
        out = out + term
    return out


def entropy_bits(probabilities):
    p = np.asarray(probabilities, dtype=float)
    p = p[p > 1e-15]
    return float(-np.sum(p * np.log2(p)))


def random_block(kind, rng, wires=None, cnot_reversed=False):
    """UnitaryBlock with random parameters at the natural scale for its kind."""
    scale = np.pi if kind.is_simple else 0.7
    theta = rng.uniform(-scale, scale, size=kind.param_count)
    if wires is None:
        wires = tuple(range(kind.n_wires))
    return gates.UnitaryBlock(kind, theta, wires, cnot_reversed)
