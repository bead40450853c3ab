"""Individual-fairness analysis of a classifier under device noise.

Input similarity is the trace distance between encoded states; output
difference is the total-variation distance between measured outcome
distributions. The empirical Lipschitz constant is the maximum output/input
ratio over dataset pairs, a documented lower bound on the true constant.
The device error rate p doubles as the fairness proxy score: under pure
depolarizing noise the noisy constant contracts to (1 - p) times the
noiseless one, so p controls how much the device flattens output gaps.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .device import DeviceModel
from .qnn import Dataset, QnnModel, encode, output_distribution
from .quantum import simulate_state, total_variation, trace_distance_pure

DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class BiasPair:
    i: int
    j: int
    input_distance: float
    output_distance: float


@dataclass(frozen=True)
class LipschitzEstimate:
    k_hat: float
    argmax_pair: tuple[int, int] | None
    pairs_examined: int
    degenerate_pairs: int


def _encoded_states(data: Dataset, rows) -> dict[int, np.ndarray]:
    return {i: simulate_state(encode(data.features[i])) for i in rows}


def _output_dists(
    model: QnnModel, device: DeviceModel | None, data: Dataset, rows,
    shots: int | None = None, rng=None,
) -> dict[int, np.ndarray]:
    return {
        i: output_distribution(model, data.features[i], device, shots=shots, rng=rng)
        for i in rows
    }


def _all_pairs(rows) -> list[tuple[int, int]]:
    return list(itertools.combinations(sorted(rows), 2))


def find_bias_pairs(
    model: QnnModel,
    device: DeviceModel | None,
    data: Dataset,
    eps: float,
    delta: float,
    rows=None,
) -> list[BiasPair]:
    """All unordered row pairs whose encoded states are within eps while their
    output distributions differ by at least delta. Exact-measurement mode, so
    the result is deterministic."""
    if not (0.0 < eps <= 1.0 and 0.0 < delta <= 1.0):
        raise ValueError("eps and delta must lie in (0, 1]")
    rows = tuple(rows) if rows is not None else tuple(range(len(data.labels)))
    if len(rows) < 2:
        raise ValueError("need at least 2 rows")
    states = _encoded_states(data, rows)
    dists = _output_dists(model, device, data, rows)
    out = []
    for i, j in _all_pairs(rows):
        d_in = trace_distance_pure(states[i], states[j])
        if d_in > eps:
            continue
        d_out = total_variation(dists[i], dists[j])
        if d_out >= delta:
            out.append(BiasPair(i, j, d_in, d_out))
    return out


def estimate_lipschitz(
    model: QnnModel,
    device: DeviceModel | None,
    data: Dataset,
    pairs="exhaustive",
    rows=None,
) -> LipschitzEstimate:
    """Empirical constant: max over pairs of output/input distance, clamped to
    1. Degenerate pairs (identical encodings) are skipped and counted."""
    rows = tuple(rows) if rows is not None else tuple(range(len(data.labels)))
    pair_list = _all_pairs(rows) if isinstance(pairs, str) and pairs == "exhaustive" else list(pairs)
    if not pair_list:
        raise ValueError("no pairs to examine")
    needed = sorted({i for p in pair_list for i in p})
    states = _encoded_states(data, needed)
    dists = _output_dists(model, device, data, needed)
    k_hat, argmax, degenerate = 0.0, None, 0
    for i, j in pair_list:
        d_in = trace_distance_pure(states[i], states[j])
        if d_in <= DEGENERATE_TOL:
            degenerate += 1
            continue
        ratio = total_variation(dists[i], dists[j]) / d_in
        if ratio > k_hat:
            k_hat, argmax = ratio, (i, j)
    return LipschitzEstimate(min(k_hat, 1.0), argmax, len(pair_list), degenerate)


def noisy_lipschitz(k_star: float, p: float) -> float:
    """Constant of the depolarized model: (1 - p) * k_star."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p outside [0, 1]")
    if not 0.0 < k_star <= 1.0:
        raise ValueError("k_star outside (0, 1]")
    return (1.0 - p) * k_star


def is_fair(k_star: float, eps: float, delta: float) -> bool:
    """Whether outputs can differ by delta only when inputs differ beyond eps."""
    if not (0.0 < eps <= 1.0 and 0.0 < delta <= 1.0):
        raise ValueError("thresholds must lie in (0, 1]")
    return delta >= k_star * eps


def fairness_score(p: float) -> float:
    """The deployment fairness proxy: the measured error rate itself."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p outside [0, 1]")
    return p


# --- feature-group reporting view ------------------------------------------------


def group_disparity(
    model: QnnModel,
    device: DeviceModel | None,
    data: Dataset,
    reference_group: str | None = None,
    rows=None,
) -> dict[str, float]:
    """Mean output distance over row pairs that differ in exactly one feature
    group, normalized to the reference group (first group by default).

    Groups with no qualifying pairs are omitted; a reporting view only.
    """
    rows = tuple(rows) if rows is not None else tuple(range(len(data.labels)))
    dists = _output_dists(model, device, data, rows)
    sums: dict[str, list[float]] = {name: [] for name in data.groups}
    for i, j in _all_pairs(rows):
        diff = np.flatnonzero(~np.isclose(data.features[i], data.features[j]))
        if diff.size == 0:
            continue
        touched = [name for name, idxs in data.groups.items() if set(diff) & set(idxs)]
        if len(touched) != 1:
            continue
        sums[touched[0]].append(total_variation(dists[i], dists[j]))
    means = {name: float(np.mean(v)) for name, v in sums.items() if v}
    if not means:
        return {}
    if reference_group is None:
        reference_group = next(iter(data.groups))
    ref = means.get(reference_group)
    if ref is None or ref <= 0.0:
        raise ValueError(f"reference group {reference_group!r} has no usable pairs")
    return {name: v / ref for name, v in means.items()}


# --- CSV reports -----------------------------------------------------------------


def write_bias_pairs_csv(pairs: list[BiasPair], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "input_distance", "output_distance"])
        for p in pairs:
            writer.writerow([p.i, p.j, "%.12g" % p.input_distance, "%.12g" % p.output_distance])


def write_lipschitz_csv(est: LipschitzEstimate, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k_hat", "argmax_i", "argmax_j", "pairs_examined", "degenerate_pairs"])
        i, j = est.argmax_pair if est.argmax_pair else ("", "")
        writer.writerow(["%.12g" % est.k_hat, i, j, est.pairs_examined, est.degenerate_pairs])
