import struct

import numpy as np
import pytest

from hqc import data as hdata
from hqc import gates, sim
from hqc.data import (
    DegenerateFeatureWarning,
    MagicMismatchError,
    ParseError,
    RankDeficientError,
    RawDataset,
    TruncatedFileError,
    apply_pca,
    build_quantum_task,
    encode_sample,
    fit_pca,
    gen_quantum_class,
    load_iris,
    load_mnist,
    load_quantum_states,
    logistic_baseline,
    make_binary_task,
    rescale_and_encode,
    save_quantum_states,
    split_dataset,
)
from hqc.sim import Statevector, max_bipartite_entropy

import oracles


class TestIris:
    def test_canonical_file_shape(self):
        raw = load_iris()
        assert raw.features.shape == (150, 4)
        assert sorted(np.unique(raw.labels)) == [1, 2, 3]

    def test_class_balance(self):
        raw = load_iris()
        counts = np.bincount(raw.labels)[1:]
        np.testing.assert_array_equal(counts, [50, 50, 50])

    def test_malformed_rows_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("5.1,3.5,1.4,Iris-setosa\n")
        with pytest.raises(ParseError):
            load_iris(bad)
        bad.write_text("5.1,3.5,1.4,x,Iris-nope\n")
        with pytest.raises(ParseError):
            load_iris(bad)


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, labels.size))
        fh.write(labels.tobytes())


class TestMnistParser:
    def test_roundtrip_small_file(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(5, 28, 28), dtype=np.uint8)
        labels = np.array([5, 0, 4, 1, 9], dtype=np.uint8)
        ip, lp = tmp_path / "img", tmp_path / "lab"
        write_idx_images(ip, images)
        write_idx_labels(lp, labels)
        raw = load_mnist(ip, lp)
        assert raw.features.shape == (5, 784)
        np.testing.assert_array_equal(raw.labels, labels)
        np.testing.assert_allclose(raw.features[0], images[0].reshape(-1) / 255.0)

    def test_magic_mismatch(self, tmp_path):
        p = tmp_path / "img"
        with open(p, "wb") as fh:
            fh.write(struct.pack(">IIII", 0x00000804, 1, 28, 28))
            fh.write(bytes(784))
        with pytest.raises(MagicMismatchError):
            load_mnist(p, p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "img"
        lp = tmp_path / "lab"
        with open(p, "wb") as fh:
            fh.write(struct.pack(">IIII", 0x00000803, 2, 28, 28))
            fh.write(bytes(784))  # one image short
        write_idx_labels(lp, [1, 2])
        with pytest.raises(TruncatedFileError):
            load_mnist(p, lp)

    def test_canonical_first_training_label(self):
        # Independent minimal reader against the canonical file, when present.
        import os

        from hqc.experiments import default_data_dir, mnist_files_present

        data_dir = default_data_dir()
        if not mnist_files_present(data_dir):
            pytest.skip("canonical MNIST files not present")
        lp = os.path.join(data_dir, "train-labels-idx1-ubyte")
        with open(lp, "rb") as fh:
            blob = fh.read(9)
        assert blob[8] == 5  # first training label of the canonical file
        raw = load_mnist(
            os.path.join(data_dir, "train-images-idx3-ubyte"), lp
        )
        assert raw.labels[0] == 5
        assert raw.labels.size == 60000


class TestBinaryTasks:
    def test_iris_pair_task_keeps_100_rows(self):
        raw = load_iris()
        task = make_binary_task(raw, hdata.TASK_IRIS_12)
        assert task.labels.size == 100
        assert set(task.labels) == {0, 1}
        assert task.labels.sum() == 50  # class 2 -> 1

    def test_zero_or_one_keeps_only_those_digits(self):
        raw = RawDataset(np.zeros((6, 2)), np.array([0, 1, 2, 3, 1, 0]), source="mnist")
        task = make_binary_task(raw, hdata.TASK_ZERO_OR_ONE)
        assert task.labels.size == 4
        np.testing.assert_array_equal(task.labels, [0, 1, 1, 0])

    def test_is_even_maps_three_to_zero(self):
        raw = RawDataset(np.zeros((3, 2)), np.array([3, 4, 6]), source="mnist")
        task = make_binary_task(raw, hdata.TASK_IS_EVEN)
        np.testing.assert_array_equal(task.labels, [0, 1, 1])

    def test_greater_than_four(self):
        raw = RawDataset(np.zeros((10, 1)), np.arange(10), source="mnist")
        task = make_binary_task(raw, hdata.TASK_IS_GREATER_THAN_4)
        np.testing.assert_array_equal(task.labels, [0] * 5 + [1] * 5)

    def test_split_tags_follow_surviving_rows(self):
        raw = RawDataset(np.zeros((4, 1)), np.array([0, 7, 1, 7]), source="mnist",
                         split=np.array([0, 1, 2, 0], dtype=np.int8))
        task = make_binary_task(raw, hdata.TASK_ZERO_OR_ONE)
        np.testing.assert_array_equal(task.split, [0, 2])


class TestSplits:
    def test_mnist_positional_split(self):
        raw = RawDataset(np.zeros((70000, 1)), np.zeros(70000, dtype=int), source="mnist")
        tagged = split_dataset(raw, "mnist")
        assert (tagged.split == hdata.SPLIT_TRAIN).sum() == 55000
        assert (tagged.split == hdata.SPLIT_VAL).sum() == 5000
        assert (tagged.split == hdata.SPLIT_TEST).sum() == 10000
        assert np.all(tagged.split[:55000] == hdata.SPLIT_TRAIN)

    def test_iris_thirds_test_size(self):
        raw = make_binary_task(load_iris(), hdata.TASK_IRIS_12)
        tagged = split_dataset(raw, "iris", seed=0)
        assert (tagged.split == hdata.SPLIT_TEST).sum() == 34
        for lab in (0, 1):
            assert ((tagged.split == hdata.SPLIT_TEST) & (tagged.labels == lab)).sum() == 17

    def test_iris_split_deterministic_per_seed(self):
        raw = make_binary_task(load_iris(), hdata.TASK_IRIS_23)
        a = split_dataset(raw, "iris", seed=5).split
        b = split_dataset(raw, "iris", seed=5).split
        np.testing.assert_array_equal(a, b)
        c = split_dataset(raw, "iris", seed=6).split
        assert not np.array_equal(a, c)

    def test_quantum_split_holds_out_1000_per_class(self):
        labels = np.repeat([1, 10], 2000)
        raw = RawDataset(np.zeros((4000, 1)), labels, source="quantum")
        tagged = split_dataset(raw, "quantum", seed=1)
        for lab in (1, 10):
            cls = tagged.labels == lab
            assert (cls & (tagged.split == hdata.SPLIT_TEST)).sum() == 1000
            assert (cls & (tagged.split == hdata.SPLIT_VAL)).sum() == 500

    def test_stratified_ratio_within_one_sample(self):
        raw = make_binary_task(load_iris(), hdata.TASK_IRIS_13)
        tagged = split_dataset(raw, "iris", seed=2)
        test = tagged.labels[tagged.split == hdata.SPLIT_TEST]
        assert abs((test == 0).sum() - (test == 1).sum()) <= 1


class TestPca:
    def test_axis_aligned_data_recovers_axes(self):
        rng = np.random.default_rng(3)
        scales = np.array([9, 7, 5, 4, 3, 2.5, 2, 1.5])
        x = rng.normal(size=(400, 8)) * scales
        t = fit_pca(x, k=8)
        # Each component should align with one coordinate axis.
        for row in t.components:
            assert np.max(np.abs(row)) > 0.95
        proj = apply_pca(t, x)
        assert proj.shape == (400, 8)

    def test_orthonormal_components(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(50, 12))
        t = fit_pca(x, k=8)
        np.testing.assert_allclose(t.components @ t.components.T, np.eye(8), atol=1e-8)

    def test_beats_random_projections_at_reconstruction(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(20, 12)) * np.linspace(3, 0.5, 12)
        t = fit_pca(x, k=8)
        centered = x - t.mean
        best = np.linalg.norm(centered - (centered @ t.components.T) @ t.components) ** 2
        for _ in range(1000):
            q, _ = np.linalg.qr(rng.normal(size=(12, 8)))
            err = np.linalg.norm(centered - (centered @ q) @ q.T) ** 2
            assert best <= err + 1e-9

    def test_explained_variance_nonincreasing(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(100, 10)) * np.linspace(5, 1, 10)
        t = fit_pca(x, k=6)
        variances = np.var(apply_pca(t, x), axis=0)
        assert np.all(np.diff(variances) <= 1e-9)

    def test_rank_deficient_rejected(self):
        x = np.outer(np.arange(10.0), np.ones(5))  # rank 1 after centering
        with pytest.raises(RankDeficientError):
            fit_pca(x, k=3)


class TestEncoding:
    def test_boundary_angles(self):
        np.testing.assert_allclose(encode_sample([0.0]).amps, [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(encode_sample([np.pi / 2]).amps, [0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(
            encode_sample([np.pi / 4]).amps, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12
        )

    def test_product_state_norm(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            state = encode_sample(rng.uniform(0, np.pi / 2, size=8))
            assert abs(np.sum(np.abs(state.amps) ** 2) - 1.0) < 1e-12

    def test_rescale_maps_train_extremes_to_0_and_pi_half(self):
        features = np.array([[2.0], [4.0], [3.0], [10.0]])
        split = np.array([0, 0, 0, 2], dtype=np.int8)
        raw = RawDataset(features, np.array([0, 1, 0, 1]), source="iris", split=split)
        ds = rescale_and_encode(raw)
        np.testing.assert_allclose(ds.states[0], [1.0, 0.0], atol=1e-12)  # min -> |0>
        np.testing.assert_allclose(ds.states[1], [0.0, 1.0], atol=1e-12)  # max -> |1>
        np.testing.assert_allclose(ds.states[3], [0.0, 1.0], atol=1e-12)  # clipped

    def test_degenerate_feature_dropped_with_warning(self):
        features = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        raw = RawDataset(features, np.array([0, 1, 0]), source="iris",
                         split=np.zeros(3, dtype=np.int8))
        with pytest.warns(DegenerateFeatureWarning):
            ds = rescale_and_encode(raw)
        assert ds.n_qubits == 1


class TestQuantumGeneration:
    def test_cascade_permutation_matches_gate_application(self):
        # Cross-check the composed permutation against step-by-step CNOTs.
        n = 4
        rng = np.random.default_rng(8)
        state = Statevector.random(n, rng)
        via_perm = state.amps[hdata._cnot_cascade_permutation(n)]
        stepped = state
        for i in range(n):
            for j in range(i + 1, n):
                stepped = sim.apply_unitary(stepped, gates.CNOT, (i, j))
        np.testing.assert_allclose(via_perm, stepped.amps, atol=1e-12)

    def test_zero_rotation_block_fixes_all_zero_state(self):
        # With every rotation at zero the building block reduces to the CNOT
        # cascade, which leaves |0...0> unchanged.
        assert hdata._cnot_cascade_permutation(8)[0] == 0
        np.testing.assert_allclose(gates.euler_zyz(0, 0, 0), np.eye(2), atol=1e-15)

    def test_fixed_seed_reproduces_dataset(self):
        a = gen_quantum_class(4, depth=2, count=7, seed=42)
        b = gen_quantum_class(4, depth=2, count=7, seed=42)
        np.testing.assert_array_equal(a, b)
        c = gen_quantum_class(4, depth=2, count=7, seed=43)
        assert not np.allclose(a, c)

    def test_states_normalized(self):
        for depth in (1, 3, 10):
            states = gen_quantum_class(8, depth=depth, count=5, seed=1)
            norms = np.sum(np.abs(states) ** 2, axis=1)
            np.testing.assert_allclose(norms, 1.0, atol=1e-10)

    def test_sample_matches_unvectorized_oracle(self):
        # Rebuild one sample gate by gate through the public simulator.
        n, depth, seed, idx = 4, 2, 9, 3
        states = gen_quantum_class(n, depth=depth, count=5, seed=seed)
        rng = np.random.default_rng([seed, idx])
        angles = rng.uniform(-np.pi, np.pi, size=(depth, n, 3))
        state = Statevector.zero(n)
        for blk in range(depth):
            for q in range(n):
                state = sim.apply_unitary(state, gates.euler_zyz(*angles[blk, q]), (q,))
            for i in range(n):
                for j in range(i + 1, n):
                    state = sim.apply_unitary(state, gates.CNOT, (i, j))
        np.testing.assert_allclose(states[idx], state.amps, atol=1e-12)

    def test_entropy_histograms_separate_shallow_from_deep(self):
        count = 150
        shallow = gen_quantum_class(8, depth=1, count=count, seed=11)
        deep = gen_quantum_class(8, depth=10, count=count, seed=12)
        ent_shallow = np.array([max_bipartite_entropy(Statevector(s)) for s in shallow])
        ent_deep = np.array([max_bipartite_entropy(Statevector(s)) for s in deep])
        bins = np.linspace(0, 4, 65)
        h1, _ = np.histogram(ent_shallow, bins=bins)
        h2, _ = np.histogram(ent_deep, bins=bins)
        overlap = np.minimum(h1 / count, h2 / count).sum()
        assert overlap < 0.25
        assert np.median(ent_shallow) < np.median(ent_deep)

    def test_depth10_entropy_distribution_stable_across_seeds(self):
        # Two independently seeded 500-sample batches of the deepest class
        # concentrate at the same mean entropy (within a tenth of a bit).
        means = []
        for seed in (21, 22):
            states = gen_quantum_class(8, depth=10, count=500, seed=seed)
            ents = [max_bipartite_entropy(Statevector(s)) for s in states]
            means.append(np.mean(ents))
        assert abs(means[0] - means[1]) < 0.1
        assert means[0] > 2.0  # deep circuits are strongly entangled

    def test_build_quantum_task_layout(self):
        ds = build_quantum_task(1, 10, per_class=1500, n_qubits=4, seed=0)
        assert ds.states.shape == (3000, 16)
        assert (ds.labels == 0).sum() == 1500
        assert ds.indices("test").size == 2000
        np.testing.assert_array_equal(np.sort(np.unique(ds.labels)), [0, 1])


class TestHqcdFormat:
    def test_roundtrip(self, tmp_path):
        states = gen_quantum_class(4, depth=2, count=9, seed=3)
        path = tmp_path / "states.hqcd"
        save_quantum_states(path, states, n_qubits=4, depth=2, seed=3)
        loaded, header = load_quantum_states(path)
        np.testing.assert_array_equal(loaded, states)
        assert header == {"n_qubits": 4, "count": 9, "depth": 2, "seed": 3, "version": 1}

    def test_magic_mismatch(self, tmp_path):
        path = tmp_path / "bad.hqcd"
        path.write_bytes(b"NOPE" + bytes(28))
        with pytest.raises(MagicMismatchError):
            load_quantum_states(path)

    def test_truncated(self, tmp_path):
        states = gen_quantum_class(4, depth=1, count=4, seed=0)
        path = tmp_path / "cut.hqcd"
        save_quantum_states(path, states, n_qubits=4, depth=1, seed=0)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 8])
        with pytest.raises(TruncatedFileError):
            load_quantum_states(path)


class TestLogisticBaseline:
    def test_separable_toy_reaches_perfect_accuracy(self):
        rng = np.random.default_rng(13)
        n = 300
        x = rng.normal(size=(n, 3))
        y = (x[:, 0] + 2 * x[:, 1] > 0.5).astype(int)
        x += 0.01 * rng.normal(size=x.shape)
        split = np.zeros(n, dtype=np.int8)
        split[200:] = hdata.SPLIT_TEST
        acc = logistic_baseline(x, y, split, max_iters=5000)
        assert acc >= 0.99

    def test_deterministic(self):
        rng = np.random.default_rng(14)
        x = rng.normal(size=(100, 4))
        y = (x[:, 0] > 0).astype(int)
        split = np.zeros(100, dtype=np.int8)
        split[70:] = hdata.SPLIT_TEST
        a = logistic_baseline(x, y, split, max_iters=500)
        b = logistic_baseline(x, y, split, max_iters=500)
        assert a == b
