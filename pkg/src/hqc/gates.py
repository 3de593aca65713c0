"""Parameterized two- and three-qubit unitary blocks and their derivatives.

Three block families, each in a real (special orthogonal) and a complex
(special unitary) variant:

* simple    -- one rotation per qubit followed by a CNOT (2 or 6 params);
* general   -- arbitrary two-qubit gate, exp of a Lie-algebra element
               (6 params for SO(4), 15 for SU(4));
* ancilla   -- arbitrary three-qubit gate where the third wire is an
               ancilla prepared in |0> (28 params for SO(8), 63 for SU(8)).

Generator bases are fixed and documented below; gradients are exact
(eigendecomposition-based for the exponential-map kinds, product rule for
the rotation-composition kinds).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class GateError(Exception):
    """Base class for gate construction errors."""


class ParamCountMismatchError(GateError):
    """Parameter vector length does not match the gate kind."""


class UnsupportedKindError(GateError):
    """Operation not defined for this gate kind."""


class GateKind(enum.Enum):
    SIMPLE_REAL = "simple_real"
    SIMPLE_COMPLEX = "simple_complex"
    GENERAL_REAL = "general_real"
    GENERAL_COMPLEX = "general_complex"
    ANCILLA_REAL = "ancilla_real"
    ANCILLA_COMPLEX = "ancilla_complex"

    @property
    def param_count(self):
        return _PARAM_COUNTS[self]

    @property
    def is_real(self):
        return self in (GateKind.SIMPLE_REAL, GateKind.GENERAL_REAL, GateKind.ANCILLA_REAL)

    @property
    def is_simple(self):
        return self in (GateKind.SIMPLE_REAL, GateKind.SIMPLE_COMPLEX)

    @property
    def n_wires(self):
        return 3 if self in (GateKind.ANCILLA_REAL, GateKind.ANCILLA_COMPLEX) else 2

    @classmethod
    def from_names(cls, kind, field_name):
        """Map ('simple'|'general'|'ancilla', 'real'|'complex') to a GateKind."""
        try:
            return cls[f"{kind}_{field_name}".upper()]
        except KeyError:
            raise UnsupportedKindError(f"no gate kind {kind!r}/{field_name!r}") from None


# Lie-algebra dimensions: so(4)=6, su(4)=15, so(8)=28, su(8)=63.
_PARAM_COUNTS = {
    GateKind.SIMPLE_REAL: 2,
    GateKind.SIMPLE_COMPLEX: 6,
    GateKind.GENERAL_REAL: 6,
    GateKind.GENERAL_COMPLEX: 15,
    GateKind.ANCILLA_REAL: 28,
    GateKind.ANCILLA_COMPLEX: 63,
}


def meas_param_count(is_real):
    """Measurement rotation: one Y angle if real, ZYZ Euler angles if complex."""
    return 1 if is_real else 3


@dataclass(frozen=True)
class UnitaryBlock:
    """One parameterized block: kind, flat parameter vector, wire assignment."""

    kind: GateKind
    params: np.ndarray
    wires: tuple
    cnot_reversed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.params.shape != (self.kind.param_count,):
            raise ParamCountMismatchError(
                f"{self.kind.value} needs {self.kind.param_count} params, got {self.params.shape}"
            )
        if len(self.wires) != self.kind.n_wires:
            raise ValueError(f"{self.kind.value} acts on {self.kind.n_wires} wires, got {self.wires}")
        if self.cnot_reversed and not self.kind.is_simple:
            raise ValueError("cnot_reversed only applies to simple kinds")


@dataclass(frozen=True)
class MeasurementRotation:
    """Single-qubit rotation before the |0><0| readout."""

    params: np.ndarray
    qubit: int
    is_real: bool = True

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))
        expect = meas_param_count(self.is_real)
        if self.params.shape != (expect,):
            raise ParamCountMismatchError(f"measurement rotation needs {expect} params")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("measurement rotation params must be finite")


# --- elementary rotations ---


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def dry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return 0.5 * np.array([[-s, -c], [c, -s]], dtype=complex)


def rz(theta):
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def drz(theta):
    return np.array(
        [[-0.5j * np.exp(-0.5j * theta), 0], [0, 0.5j * np.exp(0.5j * theta)]], dtype=complex
    )


def euler_zyz(a, b, c):
    return rz(a) @ ry(b) @ rz(c)


CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
# Control and target swapped (first wire is the target).
CNOT_REVERSED = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)


# --- generator bases ---


def so_basis(dim):
    """Antisymmetric generators E_ij - E_ji for i<j, row-major over the strict upper triangle."""
    basis = []
    for i in range(dim):
        for j in range(i + 1, dim):
            g = np.zeros((dim, dim))
            g[i, j] = 1.0
            g[j, i] = -1.0
            basis.append(g)
    return np.array(basis)


def gell_mann_basis(dim):
    """Generalized Gell-Mann matrices: symmetric, then antisymmetric, then diagonal.

    Off-diagonal generators run row-major over i<j; the l-th diagonal generator
    is sqrt(2/(l(l+1))) (sum_{m<=l} E_mm - l E_{l+1,l+1}).  All are Hermitian
    and traceless, dim^2 - 1 in total.
    """
    basis = []
    for i in range(dim):
        for j in range(i + 1, dim):
            g = np.zeros((dim, dim), dtype=complex)
            g[i, j] = g[j, i] = 1.0
            basis.append(g)
    for i in range(dim):
        for j in range(i + 1, dim):
            g = np.zeros((dim, dim), dtype=complex)
            g[i, j] = -1.0j
            g[j, i] = 1.0j
            basis.append(g)
    for l in range(1, dim):
        g = np.zeros((dim, dim), dtype=complex)
        g[np.arange(l), np.arange(l)] = 1.0
        g[l, l] = -l
        basis.append(g * np.sqrt(2.0 / (l * (l + 1))))
    return np.array(basis)


_SO_BASIS = {4: so_basis(4), 8: so_basis(8)}
_GM_BASIS = {4: gell_mann_basis(4), 8: gell_mann_basis(8)}


def _expm_hermitian(h, directions=None):
    """exp(iH) for Hermitian H, optionally with directional derivatives.

    ``directions`` is a stack of skew-Hermitian matrices D_k; the returned
    gradients are d/dt exp(iH + t D_k) at t=0 via the eigendecomposition
    (Daleckii-Krein) formula, exact for all parameter values.
    """
    lam, v = np.linalg.eigh(h)
    elam = np.exp(1j * lam)
    u = (v * elam) @ v.conj().T
    if directions is None:
        return u
    diff = 1j * (lam[:, None] - lam[None, :])
    num = elam[:, None] - elam[None, :]
    small = np.abs(diff) < 1e-12
    phi = np.where(small, elam[:, None], num / np.where(small, 1.0, diff))
    w = np.einsum("ab,kbc,cd->kad", v.conj().T, directions, v)
    grads = np.einsum("ab,kbc,cd->kad", v, w * phi, v.conj().T)
    return u, grads


def _exp_map_parts(kind, theta):
    dim = 4 if kind.n_wires == 2 else 8
    if kind in (GateKind.GENERAL_REAL, GateKind.ANCILLA_REAL):
        basis = _SO_BASIS[dim]
        a = np.tensordot(theta, basis, axes=1)  # real antisymmetric
        h = -1j * a
        directions = basis.astype(complex)
    else:
        basis = _GM_BASIS[dim]
        h = np.tensordot(theta, basis, axes=1)  # Hermitian
        directions = 1j * basis
    return h, directions


def _simple_parts(kind, theta, cnot_reversed):
    cx = CNOT_REVERSED if cnot_reversed else CNOT
    if kind is GateKind.SIMPLE_REAL:
        factors = [ry(theta[0]), ry(theta[1])]
        dfactors = [[dry(theta[0])], [dry(theta[1])]]
    else:
        factors = [euler_zyz(*theta[:3]), euler_zyz(*theta[3:])]
        dfactors = [
            [
                drz(theta[0]) @ ry(theta[1]) @ rz(theta[2]),
                rz(theta[0]) @ dry(theta[1]) @ rz(theta[2]),
                rz(theta[0]) @ ry(theta[1]) @ drz(theta[2]),
            ],
            [
                drz(theta[3]) @ ry(theta[4]) @ rz(theta[5]),
                rz(theta[3]) @ dry(theta[4]) @ rz(theta[5]),
                rz(theta[3]) @ ry(theta[4]) @ drz(theta[5]),
            ],
        ]
    return cx, factors, dfactors


def unitary_matrix(kind, theta, cnot_reversed=False):
    """Gate matrix (4x4 or 8x8) for a kind and flat parameter vector."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (kind.param_count,):
        raise ParamCountMismatchError(f"{kind.value} needs {kind.param_count} params")
    if kind.is_simple:
        cx, factors, _ = _simple_parts(kind, theta, cnot_reversed)
        return cx @ np.kron(factors[0], factors[1])
    h, _ = _exp_map_parts(kind, theta)
    return _expm_hermitian(h)


def unitary_and_grads(kind, theta, cnot_reversed=False):
    """Gate matrix plus dU/dtheta_k for every parameter, stacked (P, dim, dim)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (kind.param_count,):
        raise ParamCountMismatchError(f"{kind.value} needs {kind.param_count} params")
    if kind.is_simple:
        cx, factors, dfactors = _simple_parts(kind, theta, cnot_reversed)
        u = cx @ np.kron(factors[0], factors[1])
        grads = [cx @ np.kron(d, factors[1]) for d in dfactors[0]]
        grads += [cx @ np.kron(factors[0], d) for d in dfactors[1]]
        return u, np.array(grads)
    h, directions = _exp_map_parts(kind, theta)
    return _expm_hermitian(h, directions)


def build_unitary(block):
    """Unitary matrix of a block (first wire = most significant index)."""
    return unitary_matrix(block.kind, block.params, block.cnot_reversed)


def build_unitary_and_grads(block):
    """Block matrix and its per-parameter derivative matrices."""
    return unitary_and_grads(block.kind, block.params, block.cnot_reversed)


def measurement_rotation_matrix(meas):
    """2x2 rotation applied to the readout qubit before the |0><0| projector."""
    if meas.is_real:
        return ry(meas.params[0])
    return euler_zyz(*meas.params)


def measurement_rotation_and_grads(meas):
    if meas.is_real:
        return ry(meas.params[0]), np.array([dry(meas.params[0])])
    a, b, c = meas.params
    u = euler_zyz(a, b, c)
    grads = np.array(
        [drz(a) @ ry(b) @ rz(c), rz(a) @ dry(b) @ rz(c), rz(a) @ ry(b) @ drz(c)]
    )
    return u, grads


def decompose_simple_to_native(block):
    """Rewrite a SIMPLE_REAL block as [('ry', wire, angle)...] + [('cx', ctrl, tgt)].

    Other kinds would require a compilation pass and are rejected.
    """
    if block.kind is not GateKind.SIMPLE_REAL:
        raise UnsupportedKindError(f"cannot decompose {block.kind.value} to native gates")
    w0, w1 = block.wires
    ctrl, tgt = (w1, w0) if block.cnot_reversed else (w0, w1)
    return [
        ("ry", w0, float(block.params[0])),
        ("ry", w1, float(block.params[1])),
        ("cx", ctrl, tgt),
    ]
