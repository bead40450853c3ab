"""QNN classifier construction and evaluation: angle encoder, the four
variational ansatz families, tabular dataset ingestion, and noisy accuracy.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .circuits import Circuit, Gate, GateKind, concat
from .device import DeviceModel, mitigate_readout, simulate_noisy
from .quantum import measure, simulate_state
from .seeding import spawn

ARCHS = ("c14", "qmlp", "date22", "dac22")


# --- datasets -----------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Feature rows in [0,1], binary labels, named feature groups, and a
    train/test row split."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    groups: dict[str, tuple[int, ...]]
    train_idx: tuple[int, ...]
    test_idx: tuple[int, ...]

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be rows x d")
        if self.features.min() < -1e-12 or self.features.max() > 1.0 + 1e-12:
            raise ValueError("features must lie in [0, 1]")
        if not set(np.unique(self.labels)) <= {0, 1}:
            raise ValueError("labels must be binary")
        covered = sorted(i for idxs in self.groups.values() for i in idxs)
        if covered != list(range(self.num_features)):
            raise ValueError("feature groups must partition the feature indices")

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def split(self, which: str) -> tuple[int, ...]:
        if which == "train":
            return self.train_idx
        if which == "test":
            return self.test_idx
        raise ValueError(f"unknown split {which!r}")


@dataclass(frozen=True)
class DatasetSchema:
    """Column selection and label mapping for a CSV file."""

    feature_columns: tuple[str, ...]
    label_column: str
    label_positive: str
    label_negative: str | None = None
    groups: dict[str, tuple[str, ...]] | None = None  # group name -> column names
    train_size: int = 800
    test_size: int = 300


def load_schema(path: str | Path) -> DatasetSchema:
    features: tuple[str, ...] = ()
    label, positive, negative = "", "", None
    groups: dict[str, tuple[str, ...]] = {}
    train_size, test_size = 800, 300
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "features":
            features = tuple(c.strip() for c in rest.split(","))
        elif key == "label":
            label = rest
        elif key == "label_positive":
            positive = rest
        elif key == "label_negative":
            negative = rest
        elif key == "group":
            name, _, cols = rest.partition(" ")
            groups[name] = tuple(c.strip() for c in cols.split(","))
        elif key == "train_size":
            train_size = int(rest)
        elif key == "test_size":
            test_size = int(rest)
        else:
            raise ValueError(f"unknown schema key {key!r}")
    if not features or not label or not positive:
        raise ValueError("schema needs 'features', 'label', and 'label_positive'")
    return DatasetSchema(features, label, positive, negative, groups or None, train_size, test_size)


def load_dataset(path: str | Path, schema: DatasetSchema, seed: int = 0) -> Dataset:
    """Read a CSV, min-max normalize the selected features over the retained
    rows, binarize the label, and draw a seeded train/test split."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty CSV")
        missing = [c for c in (*schema.feature_columns, schema.label_column) if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        rows, labels, bad_rows = [], [], []
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append([float(rec[c]) for c in schema.feature_columns])
            except (TypeError, ValueError):
                bad_rows.append(lineno)
                continue
            raw = (rec[schema.label_column] or "").strip()
            if raw == schema.label_positive:
                labels.append(1)
            elif schema.label_negative is None or raw == schema.label_negative:
                labels.append(0)
            else:
                raise ValueError(f"{path}: line {lineno}: unmapped label value {raw!r}")
    if bad_rows:
        raise ValueError(f"{path}: unparseable rows at lines {bad_rows}")

    need = schema.train_size + schema.test_size
    if len(rows) < need:
        raise ValueError(f"{path}: {len(rows)} usable rows < train+test = {need}")
    rng = spawn(seed, "dataset-split", str(path))
    chosen = rng.choice(len(rows), size=need, replace=False)
    feats = np.array([rows[i] for i in chosen], dtype=float)
    labs = np.array([labels[i] for i in chosen], dtype=int)

    lo, hi = feats.min(axis=0), feats.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    feats = np.where(hi > lo, (feats - lo) / span, 0.0)  # constant column -> 0

    groups = _resolve_groups(schema, schema.feature_columns)
    return Dataset(
        features=feats,
        labels=labs,
        feature_names=schema.feature_columns,
        groups=groups,
        train_idx=tuple(range(schema.train_size)),
        test_idx=tuple(range(schema.train_size, need)),
    )


def _resolve_groups(schema: DatasetSchema, columns: tuple[str, ...]) -> dict[str, tuple[int, ...]]:
    if schema.groups is None:
        return {name: (i,) for i, name in enumerate(columns)}
    col_index = {c: i for i, c in enumerate(columns)}
    out = {}
    for name, cols in schema.groups.items():
        try:
            out[name] = tuple(col_index[c] for c in cols)
        except KeyError as exc:
            raise ValueError(f"group {name!r} names unknown column {exc}")
    return out


def synthetic_dataset(
    rows: int,
    num_features: int,
    seed: int = 0,
    flip: float = 0.0,
    train_fraction: float = 0.6,
) -> Dataset:
    """Seeded linearly separable data with optional label noise; one feature
    group per feature. Bundled so tests need no external download."""
    rng = spawn(seed, "synthetic-dataset", rows, num_features)
    feats = rng.uniform(0.0, 1.0, size=(rows, num_features))
    w = rng.normal(size=num_features)
    labels = ((feats - 0.5) @ w > 0.0).astype(int)
    if flip > 0.0:
        flips = rng.uniform(size=rows) < flip
        labels = np.where(flips, 1 - labels, labels)
    n_train = int(round(rows * train_fraction))
    return Dataset(
        features=feats,
        labels=labels,
        feature_names=tuple(f"f{i}" for i in range(num_features)),
        groups={f"f{i}": (i,) for i in range(num_features)},
        train_idx=tuple(range(n_train)),
        test_idx=tuple(range(n_train, rows)),
    )


# --- model construction ----------------------------------------------------------


@dataclass(frozen=True)
class QnnModel:
    arch: str
    num_qubits: int
    layers: int
    params: np.ndarray
    measure_qubit: int
    circuit: Circuit  # the variational ansatz; the encoder is per-input

    def with_circuit(self, circuit: Circuit) -> "QnnModel":
        return replace(self, circuit=circuit)


def ring_edges(num_qubits: int) -> list[tuple[int, int]]:
    """Entangler edges: nearest-neighbour ring, single edge when d == 2."""
    if num_qubits < 2:
        return []
    if num_qubits == 2:
        return [(0, 1)]
    return [(q, (q + 1) % num_qubits) for q in range(num_qubits)]


def params_length(arch: str, num_qubits: int, layers: int) -> int:
    n_edges = len(ring_edges(num_qubits))
    per_layer = 3 * num_qubits + (0 if arch == "date22" else n_edges)
    return layers * per_layer


def encode(x) -> Circuit:
    """Angle encoder: RY(pi * x_k) on qubit k for each feature."""
    x = np.asarray(x, dtype=float)
    if x.min() < -1e-12 or x.max() > 1.0 + 1e-12:
        raise ValueError("features must lie in [0, 1]")
    gates = tuple(Gate(GateKind.RY, (k,), (math.pi * float(v),)) for k, v in enumerate(x))
    return Circuit(len(x), gates)


def build_qnn(
    arch: str,
    num_qubits: int,
    layers: int,
    params,
    measure_qubit: int = 0,
) -> QnnModel:
    """Assemble the ansatz: per layer a U3 on every qubit, then ring
    entanglers (parameterized rotations, or plain CNOTs for date22-style)."""
    if arch not in ARCHS:
        raise ValueError(f"unknown arch {arch!r}; choose from {ARCHS}")
    params = np.asarray(params, dtype=float)
    expected = params_length(arch, num_qubits, layers)
    if params.shape != (expected,):
        raise ValueError(f"{arch} with {num_qubits} qubits x {layers} layers takes "
                         f"{expected} params, got {params.shape}")
    if not 0 <= measure_qubit < num_qubits:
        raise ValueError("measure_qubit out of range")
    gates: list[Gate] = []
    i = 0
    for _ in range(layers):
        for q in range(num_qubits):
            gates.append(Gate(GateKind.U3, (q,), tuple(params[i:i + 3])))
            i += 3
        for a, b in ring_edges(num_qubits):
            if arch == "date22":
                gates.append(Gate(GateKind.CNOT, (a, b)))
            else:
                gates.append(Gate(GateKind.RZZ, (a, b), (float(params[i]),)))
                i += 1
    return QnnModel(arch, num_qubits, layers, params, measure_qubit, Circuit(num_qubits, tuple(gates)))


def full_circuit(model: QnnModel, x) -> Circuit:
    return concat(encode(x), model.circuit)


# --- evaluation -------------------------------------------------------------------


def output_distribution(
    model: QnnModel,
    x,
    device: DeviceModel | None,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Distribution over the measured qubit; noisy path mitigates readout."""
    circuit = full_circuit(model, x)
    if device is None:
        state = simulate_state(circuit)
        return measure(state, (model.measure_qubit,), shots=shots, rng=rng)
    dist = simulate_noisy(circuit, device, qubits=(model.measure_qubit,), shots=shots, rng=rng)
    if device.readout_confusion:
        dist = mitigate_readout(dist, device, (model.measure_qubit,))
    return dist


def predict(
    model: QnnModel,
    x,
    device: DeviceModel | None,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[int, float]:
    """(label, score) with score = P(measure_qubit = 1); ties go to label 1."""
    score = float(output_distribution(model, x, device, shots, rng)[1])
    return (1 if score >= 0.5 else 0), score


def accuracy(
    model: QnnModel,
    data: Dataset,
    split: str,
    device: DeviceModel | None,
    shots: int | None = None,
    seed: int = 0,
) -> float:
    rows = data.split(split)
    if not rows:
        raise ValueError(f"empty {split} split")
    hits = 0
    for i in rows:
        rng = spawn(seed, "accuracy-shots", split, i) if shots is not None else None
        label, _ = predict(model, data.features[i], device, shots, rng)
        hits += int(label == int(data.labels[i]))
    return hits / len(rows)


# --- parameter files and the fixture fitter ------------------------------------------


def save_params(params, path: str | Path) -> None:
    lines = ["%.17g" % p for p in np.asarray(params, dtype=float)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_params(path: str | Path) -> np.ndarray:
    values = [float(ln) for ln in Path(path).read_text().split()]
    return np.array(values, dtype=float)


def fit_params(
    arch: str,
    data: Dataset,
    layers: int = 1,
    seed: int = 0,
    sweeps: int = 2,
    measure_qubit: int = 0,
) -> np.ndarray:
    """Coordinate descent on noiseless training accuracy. Produces desk-scale
    parameter fixtures only; deployment treats trained parameters as input."""
    d = data.num_features
    rng = spawn(seed, "fit-params", arch, layers)
    params = rng.uniform(0.0, 2.0 * math.pi, size=params_length(arch, d, layers))

    def score(p) -> float:
        model = build_qnn(arch, d, layers, p, measure_qubit)
        return accuracy(model, data, "train", None)

    best = score(params)
    offsets = (-0.8, -0.4, 0.4, 0.8)
    for _ in range(sweeps):
        for j in range(params.size):
            for off in offsets:
                trial = params.copy()
                trial[j] += off
                s = score(trial)
                if s > best:
                    best, params = s, trial
    return params
