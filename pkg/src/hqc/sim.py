"""Dense statevector and density-matrix simulation of few-qubit circuits.

Conventions used throughout the package:

* Qubit 0 is the most significant bit of the basis-state index, so basis
  index ``k`` carries qubit ``q``'s value at bit ``n - 1 - q``.  Reshaping an
  amplitude vector to shape ``(2,) * n`` therefore puts qubit ``q`` on axis
  ``q``.
* Entropies are in bits (log base 2).
* All operations are pure: they return new objects and never mutate inputs.
"""

from __future__ import annotations

import itertools

import numpy as np

ATOL_UNITARY = 1e-10
MAX_QUBITS = 12


class SimError(Exception):
    """Base class for simulator errors."""


class NonUnitaryMatrixError(SimError):
    """Gate matrix failed the u†u = I check."""


class WireOutOfRangeError(SimError):
    """Qubit index out of range or repeated."""


class NoiseOutOfRangeError(SimError):
    """Depolarizing strength outside [0, 1]."""


class InvalidPartitionError(SimError):
    """Partial-trace keep set empty, full, or out of range."""


class TooManyQubitsError(SimError):
    """Operation exceeds the supported qubit count."""


def check_wires(wires, n_qubits):
    """Validate a wire tuple against an n-qubit register; returns it as a tuple."""
    wires = tuple(int(w) for w in wires)
    if len(set(wires)) != len(wires):
        raise WireOutOfRangeError(f"duplicate wires in {wires}")
    for w in wires:
        if not 0 <= w < n_qubits:
            raise WireOutOfRangeError(f"wire {w} out of range for {n_qubits} qubits")
    return wires


def _check_unitary(u):
    u = np.asarray(u, dtype=complex)
    dim = u.shape[0]
    if u.ndim != 2 or u.shape != (dim, dim) or dim not in (2, 4, 8):
        raise NonUnitaryMatrixError(f"expected 2/4/8-dim square matrix, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(dim)))
    if err > ATOL_UNITARY:
        raise NonUnitaryMatrixError(f"u†u deviates from I by {err:.3e}")
    return u


class Statevector:
    """Normalized pure state of ``n_qubits`` qubits as a dense complex vector."""

    __slots__ = ("n_qubits", "amps")

    def __init__(self, amps):
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size)))
        if 2**n != amps.size:
            raise ValueError(f"amplitude length {amps.size} is not a power of 2")
        if not 1 <= n <= MAX_QUBITS:
            raise TooManyQubitsError(f"{n} qubits outside supported range 1..{MAX_QUBITS}")
        norm_err = abs(np.sum(np.abs(amps) ** 2) - 1.0)
        if norm_err > 1e-10:
            raise ValueError(f"state norm deviates from 1 by {norm_err:.3e}")
        self.n_qubits = n
        self.amps = amps

    @classmethod
    def zero(cls, n_qubits):
        """|0...0> on ``n_qubits`` qubits."""
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def random(cls, n_qubits, rng):
        """Haar-ish random state: complex normal amplitudes, normalized."""
        a = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
        return cls(a / np.linalg.norm(a))

    def __eq__(self, other):
        return (
            isinstance(other, Statevector)
            and self.n_qubits == other.n_qubits
            and np.array_equal(self.amps, other.amps)
        )


class DensityMatrix:
    """Trace-1 Hermitian positive semidefinite matrix over ``n_qubits`` qubits."""

    __slots__ = ("n_qubits", "rho")

    def __init__(self, rho):
        rho = np.asarray(rho, dtype=complex)
        dim = rho.shape[0]
        n = int(round(np.log2(dim)))
        if rho.ndim != 2 or rho.shape != (dim, dim) or 2**n != dim:
            raise ValueError(f"expected square 2^n x 2^n matrix, got shape {rho.shape}")
        if abs(np.trace(rho).real - 1.0) > 1e-10 or abs(np.trace(rho).imag) > 1e-10:
            raise ValueError(f"trace(rho) = {np.trace(rho):.6g}, expected 1")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValueError("rho is not Hermitian within 1e-10")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ValueError("rho has an eigenvalue below -1e-9")
        self.n_qubits = n
        self.rho = rho

    @classmethod
    def maximally_mixed(cls, n_qubits):
        dim = 2**n_qubits
        return cls(np.eye(dim, dtype=complex) / dim)


# --- batched kernels (rows of `amps` are independent states) ---


def apply_matrix_batch(amps, u, wires, n_qubits):
    """Apply ``u`` (2^k x 2^k) to ``wires`` of every row of ``amps`` (B x 2^n).

    The first wire listed is the most significant index of ``u``.  This is the
    vectorized substrate behind :func:`apply_unitary`; it does not re-validate
    unitarity.
    """
    batch = amps.shape[0]
    k = len(wires)
    rest = [1 + q for q in range(n_qubits) if q not in wires]
    axes = [0] + [1 + w for w in wires] + rest
    t = amps.reshape((batch,) + (2,) * n_qubits)
    t = np.transpose(t, axes).reshape(batch, 2**k, -1)
    t = np.matmul(u, t)
    t = t.reshape((batch,) + (2,) * n_qubits)
    return np.transpose(t, np.argsort(axes)).reshape(batch, 2**n_qubits)


def prob0_batch(amps, qubit, n_qubits):
    """P(qubit -> 0) for every row of ``amps``; returns a (B,) real array."""
    batch = amps.shape[0]
    t = amps.reshape(batch, 2**qubit, 2, -1)
    return np.sum(np.abs(t[:, :, 0, :]) ** 2, axis=(1, 2))


def project0_batch(amps, qubit, n_qubits):
    """Apply |0><0| on ``qubit`` to every row (unnormalized projection)."""
    batch = amps.shape[0]
    t = amps.reshape(batch, 2**qubit, 2, -1).copy()
    t[:, :, 1, :] = 0.0
    return t.reshape(batch, 2**n_qubits)


def append_zero_qubit_batch(amps):
    """Tensor a fresh |0> qubit onto every row as the new least significant wire."""
    batch, dim = amps.shape
    out = np.zeros((batch, 2 * dim), dtype=amps.dtype)
    out[:, 0::2] = amps
    return out


def slice_last_qubit0_batch(amps):
    """Keep only the components where the last (least significant) wire is |0>."""
    return np.ascontiguousarray(amps[:, 0::2])


# --- public single-state operations ---


def apply_unitary(state, u, wires):
    """Apply a small unitary to the given wires of a pure state."""
    u = _check_unitary(u)
    wires = check_wires(wires, state.n_qubits)
    if len(wires) != int(round(np.log2(u.shape[0]))):
        raise WireOutOfRangeError(f"{len(wires)} wires for a {u.shape[0]}-dim matrix")
    out = apply_matrix_batch(state.amps[None, :], u, wires, state.n_qubits)[0]
    return Statevector(out)


def expectation_projector0(state, qubit):
    """<psi| |0><0|_qubit |psi>, the probability of measuring 0 on ``qubit``."""
    (qubit,) = check_wires((qubit,), state.n_qubits)
    return float(prob0_batch(state.amps[None, :], qubit, state.n_qubits)[0])


def sample_shots(state, qubit, shots, rng_seed):
    """Number of 0 outcomes in ``shots`` computational-basis measurements of ``qubit``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p0 = expectation_projector0(state, qubit)
    rng = np.random.default_rng(rng_seed)
    return int(rng.binomial(shots, min(max(p0, 0.0), 1.0)))


def to_density(state):
    """Rank-1 density matrix |psi><psi|."""
    return DensityMatrix(np.outer(state.amps, state.amps.conj()))


def apply_unitary_dm(dm, u, wires):
    """Conjugation U rho U† on the given wires of a density matrix."""
    u = _check_unitary(u)
    wires = check_wires(wires, dm.n_qubits)
    if len(wires) != int(round(np.log2(u.shape[0]))):
        raise WireOutOfRangeError(f"{len(wires)} wires for a {u.shape[0]}-dim matrix")
    n = dm.n_qubits
    # U rho: act on columns; (U rho) U† = (U (U rho)†)†.
    m = apply_matrix_batch(dm.rho.T, u, wires, n).T
    out = np.conj(apply_matrix_batch(np.conj(m), u, wires, n))
    return DensityMatrix(out)


def depolarize(dm, noise):
    """Mix with the maximally mixed state: (1 - noise) rho + noise I / 2^n."""
    if not 0.0 <= noise <= 1.0:
        raise NoiseOutOfRangeError(f"noise strength {noise} outside [0, 1]")
    dim = 2**dm.n_qubits
    out = (1.0 - noise) * dm.rho + noise * np.eye(dim) / dim
    return DensityMatrix(out)


def partial_trace(dm, keep):
    """Reduced density matrix over ``keep``, in the order the wires are listed."""
    n = dm.n_qubits
    keep = check_wires(keep, n)
    if not keep or len(keep) >= n:
        raise InvalidPartitionError("keep must be a nonempty proper subset of the wires")
    traced = [q for q in range(n) if q not in keep]
    t = dm.rho.reshape((2,) * (2 * n))
    # Pair up row/column axes of every traced qubit.
    for q in sorted(traced, reverse=True):
        t = np.trace(t, axis1=q, axis2=q + (t.ndim // 2))
    # Remaining axes follow ascending wire order; reorder to the listed order.
    kept_sorted = sorted(keep)
    perm = [kept_sorted.index(q) for q in keep]
    m = len(keep)
    t = np.transpose(t, perm + [m + p for p in perm])
    return DensityMatrix(t.reshape(2**m, 2**m))


def von_neumann_entropy(dm):
    """-sum p log2 p over the eigenvalues, in bits; 0 log 0 := 0."""
    evals = np.clip(np.linalg.eigvalsh(dm.rho), 0.0, 1.0)
    return _entropy_of_probs(evals)


def _entropy_of_probs(p):
    p = p[p > 1e-15]
    return float(-np.sum(p * np.log2(p)))


def bipartition_entropy(state, part_a):
    """Entanglement entropy of a pure state across the cut (part_a | rest), in bits."""
    n = state.n_qubits
    part_a = check_wires(part_a, n)
    if not part_a or len(part_a) >= n:
        raise InvalidPartitionError("part_a must be a nonempty proper subset of the wires")
    rest = [q for q in range(n) if q not in part_a]
    t = state.amps.reshape((2,) * n)
    m = np.transpose(t, list(part_a) + rest).reshape(2 ** len(part_a), -1)
    # Schmidt spectrum = eigenvalues of the smaller Gram matrix.
    if m.shape[0] <= m.shape[1]:
        gram = m @ m.conj().T
    else:
        gram = m.conj().T @ m
    evals = np.clip(np.linalg.eigvalsh(gram), 0.0, 1.0)
    return _entropy_of_probs(evals)


def max_bipartite_entropy(state):
    """Maximum bipartite entanglement entropy over all cuts, in bits.

    By entropy symmetry only subsets of size <= n/2 are scanned, and for even
    n the half-size subsets are deduplicated by pinning qubit 0.
    """
    n = state.n_qubits
    if n > MAX_QUBITS:
        raise TooManyQubitsError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")
    if n < 2:
        raise InvalidPartitionError("need at least 2 qubits for a bipartition")
    best = 0.0
    for size in range(1, n // 2 + 1):
        for part_a in itertools.combinations(range(n), size):
            if 2 * size == n and 0 not in part_a:
                continue
            best = max(best, bipartition_entropy(state, part_a))
    return best
