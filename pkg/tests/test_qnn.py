import csv
import math

import numpy as np
import pytest

from qfairdeploy.circuits import Circuit, cnot_count, gate
from qfairdeploy.partition import partition, recombine
from qfairdeploy.qnn import (
    Dataset,
    DatasetSchema,
    accuracy,
    build_qnn,
    encode,
    fit_params,
    full_circuit,
    load_dataset,
    load_params,
    load_schema,
    params_length,
    predict,
    ring_edges,
    save_params,
    synthetic_dataset,
)
from qfairdeploy.quantum import simulate_state, trace_distance_pure, zero_state
from qfairdeploy.toys import toy_device, toy_model


class TestEncode:
    def test_all_zeros(self):
        state = simulate_state(encode([0.0, 0.0, 0.0]))
        np.testing.assert_allclose(state, zero_state(3), atol=1e-12)

    def test_feature_one_gives_excited_qubit(self):
        state = simulate_state(encode([1.0]))
        np.testing.assert_allclose(np.abs(state) ** 2, [0.0, 1.0], atol=1e-12)

    def test_half_gives_plus(self):
        state = simulate_state(encode([0.5]))
        np.testing.assert_allclose(state, [1, 1] / np.sqrt(2), atol=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            encode([1.2])

    def test_injectivity(self, rng):
        for _ in range(20):
            x = rng.uniform(0, 1, size=3)
            y = x.copy()
            y[rng.integers(0, 3)] = rng.uniform(0, 1)
            if np.allclose(x, y):
                continue
            d = trace_distance_pure(simulate_state(encode(x)), simulate_state(encode(y)))
            assert d > 0.0


class TestBuildQnn:
    def test_zero_layers_is_encoder_only(self):
        model = build_qnn("c14", 3, 0, [])
        assert len(model.circuit.gates) == 0
        x = [0.2, 0.4, 0.8]
        assert full_circuit(model, x).gates == encode(x).gates

    def test_date22_ring_cnot_count(self):
        model = build_qnn("date22", 4, 1, np.zeros(12))
        assert cnot_count(model.circuit) == 4

    def test_c14_params_length(self):
        assert params_length("c14", 4, 1) == 16  # 3 per qubit + 1 per ring edge

    def test_two_qubit_ring_is_one_edge(self):
        assert ring_edges(2) == [(0, 1)]
        assert params_length("qmlp", 2, 1) == 7

    def test_param_length_mismatch(self):
        with pytest.raises(ValueError):
            build_qnn("c14", 4, 1, np.zeros(15))

    def test_unknown_arch(self):
        with pytest.raises(ValueError):
            build_qnn("resnet", 4, 1, np.zeros(16))

    def test_entangler_kinds(self):
        c14 = build_qnn("c14", 3, 1, np.arange(12, dtype=float))
        date = build_qnn("date22", 3, 1, np.arange(9, dtype=float))
        assert {g.kind.value for g in c14.circuit.gates} == {"u3", "rzz"}
        assert {g.kind.value for g in date.circuit.gates} == {"u3", "cnot"}


class TestPredict:
    def test_deterministic_flip_scores_one(self):
        # ansatz X on the measured qubit, x = 0: P(1) = 1
        model = build_qnn("c14", 1, 0, [])
        model = model.with_circuit(Circuit(1, (gate("x", 0),)))
        label, score = predict(model, [0.0], None)
        assert (label, score) == (1, pytest.approx(1.0, abs=1e-12))

    def test_fully_depolarized_scores_half(self, rng):
        dev = toy_device(2, edge_error=0.0, uniform_depolarizing=1.0)
        model = toy_model(2)
        for _ in range(3):
            label, score = predict(model, rng.uniform(0, 1, 2), dev)
            assert score == pytest.approx(0.5, abs=1e-12)
            assert label == 1  # ties go to label 1

    def test_zero_gate_model_on_zero_input(self):
        model = build_qnn("c14", 2, 0, [])
        label, score = predict(model, [0.0, 0.0], None)
        assert (label, score) == (0, 0.0)


class TestAccuracy:
    def _constant_dataset(self, label: int) -> Dataset:
        feats = np.full((6, 1), 0.0)
        labels = np.full(6, label, dtype=int)
        return Dataset(feats, labels, ("f0",), {"f0": (0,)}, (0, 1, 2), (3, 4, 5))

    def test_constant_correct(self):
        model = build_qnn("c14", 1, 0, [])
        model = model.with_circuit(Circuit(1, (gate("x", 0),)))  # always predicts 1
        assert accuracy(model, self._constant_dataset(1), "test", None) == 1.0

    def test_constant_wrong(self):
        model = build_qnn("c14", 1, 0, [])
        model = model.with_circuit(Circuit(1, (gate("x", 0),)))
        assert accuracy(model, self._constant_dataset(0), "test", None) == 0.0

    def test_fully_depolarized_equals_majority_rate(self):
        # score 0.5 -> label 1 everywhere, so accuracy = fraction of 1-labels
        data = synthetic_dataset(rows=40, num_features=2, seed=3)
        dev = toy_device(2, edge_error=0.0, uniform_depolarizing=1.0)
        model = toy_model(2)
        expected = float(np.mean([data.labels[i] for i in data.test_idx]))
        assert accuracy(model, data, "test", dev) == pytest.approx(expected, abs=1e-12)

    def test_exact_mode_deterministic(self):
        data = synthetic_dataset(rows=20, num_features=2, seed=4)
        dev = toy_device(2, edge_error=0.02)
        model = toy_model(2)
        assert accuracy(model, data, "test", dev) == accuracy(model, data, "test", dev)

    def test_recombined_originals_match_exactly(self):
        data = synthetic_dataset(rows=20, num_features=2, seed=5)
        dev = toy_device(2, edge_error=0.03)
        model = toy_model(2, layers=1)
        parts = partition(model.circuit, 2)
        rebuilt = recombine(parts, [p.sub_circuit for p in parts], 2)
        assert rebuilt.gates == model.circuit.gates
        same = model.with_circuit(rebuilt)
        assert accuracy(same, data, "test", dev) == accuracy(model, data, "test", dev)

    def test_empty_split_rejected(self):
        data = synthetic_dataset(rows=10, num_features=2, seed=6, train_fraction=1.0)
        with pytest.raises(ValueError):
            accuracy(toy_model(2), data, "test", None)


class TestSyntheticDataset:
    def test_shapes_and_ranges(self):
        data = synthetic_dataset(rows=50, num_features=3, seed=7)
        assert data.features.shape == (50, 3)
        assert set(np.unique(data.labels)) <= {0, 1}
        assert len(data.train_idx) + len(data.test_idx) == 50

    def test_deterministic(self):
        a = synthetic_dataset(rows=30, num_features=2, seed=8)
        b = synthetic_dataset(rows=30, num_features=2, seed=8)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_groups_partition_features(self):
        data = synthetic_dataset(rows=10, num_features=4, seed=9)
        covered = sorted(i for idxs in data.groups.values() for i in idxs)
        assert covered == [0, 1, 2, 3]


def _write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


class TestLoadDataset:
    def _schema(self, **kw):
        defaults = dict(
            feature_columns=("a", "b", "c", "d", "e", "f", "g", "h"),
            label_column="y",
            label_positive="yes",
            train_size=800,
            test_size=300,
        )
        defaults.update(kw)
        return DatasetSchema(**defaults)

    def test_eight_attributes_and_split_sizes(self, tmp_path, rng):
        rows = []
        for i in range(1200):
            feats = rng.uniform(0, 10, size=8)
            rows.append([*feats, "yes" if rng.uniform() < 0.5 else "no"])
        path = tmp_path / "data.csv"
        _write_csv(path, rows, ["a", "b", "c", "d", "e", "f", "g", "h", "y"])
        data = load_dataset(path, self._schema(), seed=1)
        assert data.num_features == 8
        assert len(data.train_idx) == 800
        assert len(data.test_idx) == 300
        assert data.features.min() >= 0.0 and data.features.max() <= 1.0

    def test_constant_column_normalizes_to_zero(self, tmp_path, rng):
        rows = [[5.0, rng.uniform(), "yes" if i % 2 else "no"] for i in range(20)]
        path = tmp_path / "data.csv"
        _write_csv(path, rows, ["a", "b", "y"])
        schema = self._schema(feature_columns=("a", "b"), train_size=10, test_size=5)
        data = load_dataset(path, schema, seed=2)
        np.testing.assert_allclose(data.features[:, 0], 0.0, atol=1e-15)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "data.csv"
        _write_csv(path, [[1, "yes"]], ["a", "y"])
        with pytest.raises(ValueError, match="missing columns"):
            load_dataset(path, self._schema(feature_columns=("a", "b"), train_size=1, test_size=0))

    def test_unparseable_rows_reported_with_line_numbers(self, tmp_path):
        path = tmp_path / "data.csv"
        _write_csv(path, [[1.0, "yes"], ["oops", "no"], [2.0, "yes"]], ["a", "y"])
        with pytest.raises(ValueError, match=r"lines \[3\]"):
            load_dataset(path, self._schema(feature_columns=("a",), train_size=2, test_size=1))

    def test_unmapped_label_value(self, tmp_path):
        path = tmp_path / "data.csv"
        _write_csv(path, [[1.0, "maybe"]], ["a", "y"])
        schema = self._schema(feature_columns=("a",), label_negative="no",
                              train_size=1, test_size=0)
        with pytest.raises(ValueError, match="unmapped label"):
            load_dataset(path, schema)

    def test_too_few_rows(self, tmp_path):
        path = tmp_path / "data.csv"
        _write_csv(path, [[1.0, "yes"]] * 5, ["a", "y"])
        with pytest.raises(ValueError, match="usable rows"):
            load_dataset(path, self._schema(feature_columns=("a",), train_size=5, test_size=5))

    def test_group_map_resolution(self, tmp_path, rng):
        rows = [[rng.uniform(), rng.uniform(), "yes" if i % 2 else "no"] for i in range(20)]
        path = tmp_path / "data.csv"
        _write_csv(path, rows, ["a", "b", "y"])
        schema = self._schema(feature_columns=("a", "b"), groups={"g1": ("a",), "g2": ("b",)},
                              train_size=10, test_size=5)
        data = load_dataset(path, schema, seed=3)
        assert data.groups == {"g1": (0,), "g2": (1,)}


class TestSchemaFile:
    def test_parse(self, tmp_path):
        text = (
            "features a,b,c\n"
            "label y\n"
            "label_positive >50K\n"
            "label_negative <=50K\n"
            "group demo a,b\n"
            "group work c\n"
            "train_size 10\n"
            "test_size 5\n"
        )
        p = tmp_path / "schema.txt"
        p.write_text(text)
        schema = load_schema(p)
        assert schema.feature_columns == ("a", "b", "c")
        assert schema.label_positive == ">50K"
        assert schema.groups == {"demo": ("a", "b"), "work": ("c",)}
        assert (schema.train_size, schema.test_size) == (10, 5)

    def test_missing_required_keys(self, tmp_path):
        p = tmp_path / "schema.txt"
        p.write_text("label y\n")
        with pytest.raises(ValueError):
            load_schema(p)


class TestParamsIO:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        params = rng.uniform(0, 2 * math.pi, size=12)
        save_params(params, tmp_path / "p.txt")
        np.testing.assert_array_equal(load_params(tmp_path / "p.txt"), params)

    def test_fit_params_beats_chance(self):
        data = synthetic_dataset(rows=30, num_features=2, seed=10)
        params = fit_params("c14", data, layers=1, seed=10, sweeps=1)
        model = build_qnn("c14", 2, 1, params)
        assert accuracy(model, data, "train", None) >= 0.6
