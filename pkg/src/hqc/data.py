"""Dataset loading, binary task extraction, PCA, qubit encoding, and baselines.

Classical features are encoded one per qubit: a feature value x (rescaled to
[0, pi/2] using training-split extrema) becomes the single-qubit state
cos(x)|0> + sin(x)|1>, and a sample is the tensor product over its features.
Synthetic quantum data is generated by stacked "building blocks": one random
single-qubit rotation on every wire followed by the full cascade of
CNOT(i, j) for i < j in lexicographic order, applied to |0...0>; the class
label counts the stacked blocks.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .sim import Statevector

SPLIT_TRAIN, SPLIT_VAL, SPLIT_TEST = 0, 1, 2
_SPLIT_CODES = {"train": SPLIT_TRAIN, "val": SPLIT_VAL, "test": SPLIT_TEST}

HQCD_MAGIC = b"HQCD"
HQCD_VERSION = 1


class DataError(Exception):
    """Base class for dataset errors."""


class ParseError(DataError):
    """Malformed text dataset."""


class MagicMismatchError(DataError):
    """Binary file does not start with the expected magic number."""


class TruncatedFileError(DataError):
    """Binary file ends before the declared payload."""


class RankDeficientError(DataError):
    """Requested more principal components than the data's rank."""


class DegenerateFeatureWarning(UserWarning):
    """A feature was constant on the training split and has been dropped."""


@dataclass
class RawDataset:
    """Feature matrix with integer labels; ``split`` tags rows once assigned."""

    features: np.ndarray  # (D, N) float
    labels: np.ndarray  # (D,) int
    source: str
    split: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or Inf")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with feature rows")


@dataclass
class EncodedDataset:
    """Stacked encoded states with binary labels and split tags."""

    states: np.ndarray  # (D, 2^n) complex
    labels: np.ndarray  # (D,) int in {0, 1}
    split: np.ndarray  # (D,) int8 codes
    n_qubits: int

    def indices(self, which):
        return np.flatnonzero(self.split == _SPLIT_CODES[which])

    def state(self, i):
        return Statevector(self.states[i])

    def subset(self, which):
        idx = self.indices(which)
        return self.states[idx], self.labels[idx]


# --- loaders ---


def default_iris_path():
    """The canonical 150-row CSV bundled with the package."""
    return resources.files("hqc").joinpath("datasets/iris.csv")


_IRIS_CLASSES = {"Iris-setosa": 1, "Iris-versicolor": 2, "Iris-virginica": 3}


def load_iris(path=None):
    """150 x 4 flower measurements with labels 1/2/3, from a CSV file."""
    path = default_iris_path() if path is None else path
    features, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ParseError(f"line {lineno}: expected 4 values and a class name")
            try:
                features.append([float(v) for v in parts[:4]])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            if parts[4] not in _IRIS_CLASSES:
                raise ParseError(f"line {lineno}: unknown class {parts[4]!r}")
            labels.append(_IRIS_CLASSES[parts[4]])
    return RawDataset(np.array(features), np.array(labels), source="iris")


_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _read_idx(path, magic, n_dims):
    with open(path, "rb") as fh:
        blob = fh.read()
    header = 4 * (1 + n_dims)
    if len(blob) < header:
        raise TruncatedFileError(f"{path}: shorter than its header")
    got = int.from_bytes(blob[:4], "big")
    if got != magic:
        raise MagicMismatchError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = [int.from_bytes(blob[4 * (1 + i) : 4 * (2 + i)], "big") for i in range(n_dims)]
    count = int(np.prod(dims))
    if len(blob) < header + count:
        raise TruncatedFileError(f"{path}: payload shorter than {dims}")
    data = np.frombuffer(blob, dtype=np.uint8, count=count, offset=header)
    return data.reshape(dims)


def load_mnist(images_path, labels_path):
    """One images/labels IDX pair; pixels flattened to 784 and scaled to [0, 1]."""
    images = _read_idx(images_path, _IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, _IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise ParseError("image and label counts differ")
    features = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return RawDataset(features, labels.astype(int), source="mnist")


def load_mnist_dataset(data_dir):
    """Concatenate the canonical train and t10k pairs: rows 0..59999 then 60000..69999."""
    from pathlib import Path

    d = Path(data_dir)
    train = load_mnist(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    test = load_mnist(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte")
    return RawDataset(
        np.vstack([train.features, test.features]),
        np.concatenate([train.labels, test.labels]),
        source="mnist",
    )


# --- binary tasks ---

TASK_ZERO_OR_ONE = "zero_or_one"
TASK_TWO_OR_SEVEN = "two_or_seven"
TASK_IS_EVEN = "is_even"
TASK_IS_GREATER_THAN_4 = "is_greater_than_4"
TASK_IRIS_12 = "iris_12"
TASK_IRIS_23 = "iris_23"
TASK_IRIS_13 = "iris_13"

_KEEP_TASKS = {
    TASK_ZERO_OR_ONE: (0, 1),
    TASK_TWO_OR_SEVEN: (2, 7),
    TASK_IRIS_12: (1, 2),
    TASK_IRIS_23: (2, 3),
    TASK_IRIS_13: (1, 3),
}


def make_binary_task(raw, task):
    """Restrict or relabel a dataset to a binary task with labels {0, 1}.

    Class-pair tasks keep only the two named classes and map the lower
    original class to 0; the parity and threshold tasks relabel all rows.
    Split tags, when present, follow the surviving rows.
    """
    if task in _KEEP_TASKS:
        lo, hi = _KEEP_TASKS[task]
        mask = (raw.labels == lo) | (raw.labels == hi)
        labels = (raw.labels[mask] == hi).astype(int)
        split = raw.split[mask] if raw.split is not None else None
        return RawDataset(raw.features[mask], labels, source=raw.source, split=split)
    if task == TASK_IS_EVEN:
        labels = (raw.labels % 2 == 0).astype(int)
    elif task == TASK_IS_GREATER_THAN_4:
        labels = (raw.labels > 4).astype(int)
    else:
        raise ValueError(f"unknown task {task!r}")
    return RawDataset(raw.features, labels, source=raw.source, split=raw.split)


# --- splits ---


def split_dataset(raw, scheme, seed=0):
    """Attach split tags; returns a new RawDataset.

    ``mnist``: positional, rows 0..54999 train / 55000..59999 val / rest test.
    ``iris``: per class, a seeded third (rounded) goes to test, rest to train.
    ``quantum``: per class, 1000 test and 500 val held out, rest train.
    """
    d = raw.labels.size
    split = np.full(d, SPLIT_TRAIN, dtype=np.int8)
    if scheme == "mnist":
        if d != 70000:
            raise ValueError(f"mnist scheme expects 70000 rows, got {d}")
        split[55000:60000] = SPLIT_VAL
        split[60000:] = SPLIT_TEST
    elif scheme == "iris":
        rng = np.random.default_rng(seed)
        for cls in np.unique(raw.labels):
            idx = np.flatnonzero(raw.labels == cls)
            idx = rng.permutation(idx)
            n_test = max(1, round(idx.size / 3))
            split[idx[:n_test]] = SPLIT_TEST
    elif scheme == "quantum":
        rng = np.random.default_rng(seed)
        for cls in np.unique(raw.labels):
            idx = np.flatnonzero(raw.labels == cls)
            if idx.size < 1500:
                raise ValueError("quantum scheme needs >= 1500 samples per class")
            idx = rng.permutation(idx)
            split[idx[:1000]] = SPLIT_TEST
            split[idx[1000:1500]] = SPLIT_VAL
    else:
        raise ValueError(f"unknown split scheme {scheme!r}")
    return replace(raw, split=split)


# --- PCA ---


@dataclass(frozen=True)
class PcaTransform:
    mean: np.ndarray
    components: np.ndarray  # (k, N), orthonormal rows

    def __post_init__(self):
        gram = self.components @ self.components.T
        if np.max(np.abs(gram - np.eye(self.components.shape[0]))) > 1e-8:
            raise ValueError("components are not orthonormal")


def fit_pca(train_features, k=8):
    """Top-k principal directions of the mean-centered training matrix."""
    x = np.asarray(train_features, dtype=float)
    mean = x.mean(axis=0)
    centered = x - mean
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    rank = int(np.sum(s > s[0] * 1e-12)) if s.size else 0
    if k > rank:
        raise RankDeficientError(f"requested {k} components, data rank is {rank}")
    components = vt[:k]
    # Deterministic sign: make the largest-magnitude entry of each row positive.
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaTransform(mean=mean, components=components)


def apply_pca(transform, features):
    return (np.asarray(features, dtype=float) - transform.mean) @ transform.components.T


# --- qubit encoding ---


def encode_features(features):
    """Product-state amplitudes for rows of angle-valued features in [0, pi/2]."""
    x = np.asarray(features, dtype=float)
    amps = np.ones((x.shape[0], 1), dtype=complex)
    for q in range(x.shape[1]):
        col = np.stack([np.cos(x[:, q]), np.sin(x[:, q])], axis=1)
        amps = np.einsum("da,db->dab", amps.reshape(x.shape[0], -1), col).reshape(
            x.shape[0], -1
        )
    return amps


def encode_sample(features):
    """Single feature vector (already in [0, pi/2]) to a product Statevector."""
    return Statevector(encode_features(np.asarray(features, dtype=float)[None, :])[0])


def rescale_and_encode(raw):
    """Rescale features to [0, pi/2] angles using train-split extrema, then encode.

    Values outside the training range (possible on val/test rows) are clipped.
    Features constant on the training split carry no information at any angle
    and are dropped with a DegenerateFeatureWarning.
    """
    if raw.split is None:
        raise ValueError("assign splits before encoding (rescaling fits on train)")
    train_rows = raw.features[raw.split == SPLIT_TRAIN]
    lo = train_rows.min(axis=0)
    hi = train_rows.max(axis=0)
    keep = hi > lo
    if not np.all(keep):
        dropped = np.flatnonzero(~keep).tolist()
        warnings.warn(
            f"dropping constant training features {dropped}", DegenerateFeatureWarning
        )
    feats = raw.features[:, keep]
    lo, hi = lo[keep], hi[keep]
    angles = (feats - lo) / (hi - lo) * (np.pi / 2)
    angles = np.clip(angles, 0.0, np.pi / 2)
    states = encode_features(angles)
    return EncodedDataset(
        states=states,
        labels=raw.labels.copy(),
        split=raw.split.copy(),
        n_qubits=int(keep.sum()),
    )


# --- synthetic quantum data ---


def _cnot_cascade_permutation(n_qubits):
    """Basis permutation of the full CNOT(i, j), i<j cascade, applied in order."""
    dim = 2**n_qubits
    perm = np.arange(dim)
    idx = np.arange(dim)
    for i in range(n_qubits):
        for j in range(i + 1, n_qubits):
            control = (idx >> (n_qubits - 1 - i)) & 1
            flipped = idx ^ (control << (n_qubits - 1 - j))
            perm = perm[flipped]
    return perm


def gen_quantum_class(n_qubits, depth, count, seed):
    """Stacked-building-block states: (count, 2^n) amplitudes, one row per sample.

    Each sample uses an independent RNG derived from (seed, sample index), so
    the dataset is reproducible regardless of generation order.  Rotation
    angles are ZYZ Euler triples drawn uniformly from (-pi, pi).
    """
    if depth < 1 or count < 1:
        raise ValueError("depth and count must be >= 1")
    dim = 2**n_qubits
    angles = np.empty((count, depth, n_qubits, 3))
    for d in range(count):
        rng = np.random.default_rng([seed, d])
        angles[d] = rng.uniform(-np.pi, np.pi, size=(depth, n_qubits, 3))
    amps = np.zeros((count, dim), dtype=complex)
    amps[:, 0] = 1.0
    cascade = _cnot_cascade_permutation(n_qubits)
    for blk in range(depth):
        for q in range(n_qubits):
            a, b, c = angles[:, blk, q, 0], angles[:, blk, q, 1], angles[:, blk, q, 2]
            # Per-sample Rz(a) Ry(b) Rz(c), assembled entrywise.
            cos_b, sin_b = np.cos(b / 2), np.sin(b / 2)
            mats = np.empty((count, 2, 2), dtype=complex)
            mats[:, 0, 0] = np.exp(-0.5j * (a + c)) * cos_b
            mats[:, 0, 1] = -np.exp(-0.5j * (a - c)) * sin_b
            mats[:, 1, 0] = np.exp(0.5j * (a - c)) * sin_b
            mats[:, 1, 1] = np.exp(0.5j * (a + c)) * cos_b
            t = amps.reshape(count, 2**q, 2, -1)
            amps = np.einsum("dij,dpjq->dpiq", mats, t).reshape(count, dim)
        amps = amps[:, cascade]
    return amps


def build_quantum_task(depth_a, depth_b, per_class, n_qubits=8, seed=0):
    """Two-class entangled-state dataset with balanced held-out splits.

    The lower depth maps to label 0.  Generation seeds are offset by the
    depth so the two classes draw independent circuits.
    """
    lo, hi = sorted((depth_a, depth_b))
    states_lo = gen_quantum_class(n_qubits, lo, per_class, seed * 1000 + lo)
    states_hi = gen_quantum_class(n_qubits, hi, per_class, seed * 1000 + hi)
    states = np.vstack([states_lo, states_hi])
    labels = np.concatenate([np.zeros(per_class, dtype=int), np.ones(per_class, dtype=int)])
    raw_labels = np.concatenate(
        [np.full(per_class, lo, dtype=int), np.full(per_class, hi, dtype=int)]
    )
    tagged = split_dataset(
        RawDataset(np.zeros((labels.size, 1)), raw_labels, source="quantum"),
        "quantum",
        seed=seed,
    )
    return EncodedDataset(states=states, labels=labels, split=tagged.split, n_qubits=n_qubits)


def save_quantum_states(path, states, n_qubits, depth, seed):
    """Persist generated states: HQCD header then little-endian (re, im) float64 pairs."""
    states = np.asarray(states, dtype=complex)
    count = states.shape[0]
    header = struct.pack("<4sIIQIq", HQCD_MAGIC, HQCD_VERSION, n_qubits, count, depth, seed)
    interleaved = np.empty((count, 2 ** n_qubits, 2), dtype="<f8")
    interleaved[:, :, 0] = states.real
    interleaved[:, :, 1] = states.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


def load_quantum_states(path):
    """Read an HQCD file; returns (states, header dict)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head_size = struct.calcsize("<4sIIQIq")
    if len(blob) < head_size:
        raise TruncatedFileError(f"{path}: shorter than its header")
    magic, version, n_qubits, count, depth, seed = struct.unpack("<4sIIQIq", blob[:head_size])
    if magic != HQCD_MAGIC:
        raise MagicMismatchError(f"{path}: magic {magic!r}, expected {HQCD_MAGIC!r}")
    if version != HQCD_VERSION:
        raise ParseError(f"{path}: unsupported HQCD version {version}")
    payload = count * 2**n_qubits * 16
    if len(blob) < head_size + payload:
        raise TruncatedFileError(f"{path}: payload shorter than declared")
    flat = np.frombuffer(blob, dtype="<f8", count=count * 2**n_qubits * 2, offset=head_size)
    pairs = flat.reshape(count, 2**n_qubits, 2)
    states = pairs[:, :, 0] + 1j * pairs[:, :, 1]
    header = {
        "n_qubits": n_qubits,
        "count": count,
        "depth": depth,
        "seed": seed,
        "version": version,
    }
    return states, header


# --- logistic-regression baseline ---


def logistic_baseline(features, labels, split, max_iters=100_000, tol=1e-6):
    """Binary logistic regression by full-batch gradient descent; test accuracy.

    Features are standardized with training-split statistics for conditioning;
    the step size is set from the standardized design matrix's spectral norm
    (the Lipschitz bound of the logistic loss gradient).  Deterministic: zero
    initialization, fixed iteration order.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    train = split == SPLIT_TRAIN
    test = split == SPLIT_TEST
    mean = features[train].mean(axis=0)
    std = features[train].std(axis=0)
    std[std == 0.0] = 1.0
    x = (features - mean) / std
    x = np.hstack([x, np.ones((x.shape[0], 1))])
    xt, yt = x[train], labels[train]
    d = xt.shape[0]

    # Spectral norm via power iteration (deterministic start).
    v = np.ones(xt.shape[1]) / np.sqrt(xt.shape[1])
    for _ in range(50):
        v = xt.T @ (xt @ v)
        v /= np.linalg.norm(v)
    lipschitz = (v @ (xt.T @ (xt @ v))) / (4.0 * d)
    lr = 1.0 / lipschitz

    w = np.zeros(xt.shape[1])
    for _ in range(max_iters):
        z = xt @ w
        p = 1.0 / (1.0 + np.exp(-z))
        grad = xt.T @ (p - yt) / d
        if np.linalg.norm(grad) < tol:
            break
        w -= lr * grad
    preds = (x[test] @ w >= 0.0).astype(int)
    return float(np.mean(preds == labels[test]))
