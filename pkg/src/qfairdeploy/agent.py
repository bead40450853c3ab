"""Deep-Q-learning search over per-partition candidate selections.

States are partial deployments encoded as the real/imaginary channels of the
partial circuit's unitary. The value network is a fully connected ReLU stack
whose output width is the total candidate count across all partitions; each
state only ever reads its own partition's slice of that output. Rewards blend
the measured device error rate (the fairness proxy) with classification
accuracy, weighted per scheme.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuits import Circuit
from .device import DeviceModel, estimate_p
from .fairness import fairness_score
from .partition import Partition, recombine
from .qnn import Dataset, QnnModel, accuracy
from .quantum import circuit_unitary
from .seeding import spawn
from .synthesis import CandidateList


@dataclass(frozen=True)
class RewardWeights:
    alpha: float  # fairness weight
    beta: float   # accuracy weight

    def __post_init__(self):
        if self.alpha < 0.0 or self.beta < 0.0 or (self.alpha == 0.0 and self.beta == 0.0):
            raise ValueError("weights must be non-negative and not both zero")


def compute_reward(fairness: float, acc: float, w: RewardWeights) -> float:
    """Weighted blend alpha * fairness + beta * accuracy."""
    if not (0.0 <= fairness <= 1.0 and 0.0 <= acc <= 1.0):
        raise ValueError("reward inputs must lie in [0, 1]")
    return w.alpha * fairness + w.beta * acc


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 1000          # episodes; one complete deployment each
    learning_rate: float = 1e-3
    gamma: float = 0.99
    epsilon_start: float = 0.05
    epsilon_final: float = 0.01
    target_sync_period: int = 10
    replay_capacity: int = 1000
    batch_size: int = 32
    hidden_sizes: tuple[int, ...] = (256, 128)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not (0.0 <= self.epsilon_start <= 1.0 and 0.0 <= self.epsilon_final <= 1.0):
            raise ValueError("epsilons must lie in [0, 1]")

    def epsilon_at(self, episode: int) -> float:
        """Linear anneal from epsilon_start to epsilon_final over iterations."""
        if self.iterations <= 1:
            return self.epsilon_final
        frac = min(episode / (self.iterations - 1), 1.0)
        return self.epsilon_start + frac * (self.epsilon_final - self.epsilon_start)


# --- states and the action space ------------------------------------------------


@dataclass(frozen=True)
class AgentState:
    """Partial deployment: chosen candidate ordinal per completed partition
    plus the unitary of the partial circuit (identity when blank)."""

    selections: tuple[int, ...]
    partial_unitary: np.ndarray

    @property
    def next_partition(self) -> int:
        return len(self.selections)


def state_tensor(state: AgentState) -> np.ndarray:
    """(d, d, 2) tensor: real parts in channel 0, imaginary parts in channel 1."""
    u = state.partial_unitary
    return np.stack([u.real, u.imag], axis=-1)


def tensor_to_matrix(tensor: np.ndarray) -> np.ndarray:
    return tensor[..., 0] + 1j * tensor[..., 1]


def action_slice(state: AgentState, lists: list[CandidateList]) -> range:
    """Global candidate indices available from this state: the contiguous
    block belonging to the next unselected partition."""
    p = state.next_partition
    if p >= len(lists):
        raise ValueError("terminal state has no actions")
    start = sum(len(cl) for cl in lists[:p])
    return range(start, start + len(lists[p]))


def select_action(qvalues: np.ndarray, slice_: range, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy within the slice; greedy ties break to the lowest index."""
    if len(slice_) == 0:
        raise ValueError("empty action slice")
    if rng.uniform() < epsilon:
        return int(slice_[rng.integers(0, len(slice_))])
    window = qvalues[slice_.start:slice_.stop]
    return int(slice_.start + np.argmax(window))


# --- value network (manual backprop, float64) -------------------------------------


class ValueNetwork:
    """Fully connected ReLU stack; identity output layer."""

    def __init__(self, input_size: int, hidden_sizes: tuple[int, ...], output_size: int,
                 rng: np.random.Generator):
        sizes = (input_size, *hidden_sizes, output_size)
        self.weights = [
            rng.normal(0.0, np.sqrt(2.0 / sizes[i]), size=(sizes[i], sizes[i + 1]))
            for i in range(len(sizes) - 1)
        ]
        # near-zero output layer: initial action values start below the
        # nonnegative rewards instead of guessing high
        self.weights[-1] *= 0.01
        self.biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_size(self) -> int:
        return self.weights[-1].shape[1]

    def copy_from(self, other: "ValueNetwork") -> None:
        self.weights = [w.copy() for w in other.weights]
        self.biases = [b.copy() for b in other.biases]

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        """Action values for a single flattened state or a batch."""
        a = np.atleast_2d(np.asarray(inputs, dtype=float))
        if a.shape[1] != self.input_size:
            raise ValueError(f"expected input width {self.input_size}, got {a.shape[1]}")
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        out = a @ self.weights[-1] + self.biases[-1]
        return out[0] if np.asarray(inputs).ndim == 1 else out

    def _forward_cached(self, x: np.ndarray):
        activations = [x]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            activations.append(np.maximum(activations[-1] @ w + b, 0.0))
        out = activations[-1] @ self.weights[-1] + self.biases[-1]
        return activations, out

    def loss_and_gradients(self, inputs: np.ndarray, actions: np.ndarray, targets: np.ndarray):
        """Mean squared TD error over the batch and its parameter gradients."""
        x = np.atleast_2d(np.asarray(inputs, dtype=float))
        batch = x.shape[0]
        activations, out = self._forward_cached(x)
        picked = out[np.arange(batch), actions]
        errors = picked - targets
        loss = float(np.mean(errors**2))

        d_out = np.zeros_like(out)
        d_out[np.arange(batch), actions] = 2.0 * errors / batch
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = d_out
        for layer in reversed(range(len(self.weights))):
            grads_w[layer] = activations[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (activations[layer] > 0.0)
        return loss, grads_w, grads_b

    def apply_gradients(self, grads_w, grads_b, lr: float) -> None:
        for w, gw in zip(self.weights, grads_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grads_b):
            b -= lr * gb


def td_target(reward: float, next_q_max: float | None, gamma: float) -> float:
    """reward + gamma * max Q' for non-terminal transitions, reward otherwise."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if next_q_max is None:
        return reward
    return reward + gamma * next_q_max


def td_loss(prediction: float, target: float) -> float:
    return (target - prediction) ** 2


@dataclass(frozen=True)
class Transition:
    state_tensor: np.ndarray
    action: int
    reward: float
    next_state_tensor: np.ndarray | None  # None marks a terminal transition
    next_slice: tuple[int, int] | None    # action window of the next state


def train_step(
    policy: ValueNetwork,
    target_net: ValueNetwork,
    batch: list[Transition],
    lr: float,
    gamma: float,
) -> float:
    """One gradient-descent update of the policy on the mean TD loss of the
    batch; targets come from the target network. Returns the pre-update loss."""
    if not batch:
        raise ValueError("empty batch")
    inputs = np.stack([t.state_tensor.ravel() for t in batch])
    actions = np.array([t.action for t in batch], dtype=int)
    targets = np.empty(len(batch))
    for i, t in enumerate(batch):
        if t.next_state_tensor is None:
            targets[i] = td_target(t.reward, None, gamma)
        else:
            q_next = target_net.forward(t.next_state_tensor.ravel())
            lo, hi = t.next_slice
            targets[i] = td_target(t.reward, float(q_next[lo:hi].max()), gamma)
    loss, grads_w, grads_b = policy.loss_and_gradients(inputs, actions, targets)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss {loss}")
    policy.apply_gradients(grads_w, grads_b, lr)
    return loss


# --- deployment environment ----------------------------------------------------------


@dataclass
class DeploymentEnv:
    """Binds partitions, candidate lists, and the evaluation context; memoizes
    the reward of each deployment prefix (simulation dominates the cost).

    Unselected partitions are completed with their original exact sub-circuits,
    so an intermediate reward isolates the effect of the approximations chosen
    so far. Identity fill is available instead via `fill`.
    """

    partitions: list[Partition]
    lists: list[CandidateList]
    model: QnnModel
    device: DeviceModel
    data: Dataset
    weights: RewardWeights
    split: str = "test"
    fill: str = "original"          # or "identity"
    r_twirls: int = 4
    estimate_shots: int | None = None  # exact survival by default
    seed: int = 0
    _cache: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.partitions) != len(self.lists):
            raise ValueError("one candidate list per partition required")
        if self.fill not in ("original", "identity"):
            raise ValueError("fill must be 'original' or 'identity'")

    @property
    def num_partitions(self) -> int:
        return len(self.partitions)

    def blank_state(self) -> AgentState:
        dim = 2**self.model.num_qubits
        return AgentState((), np.eye(dim, dtype=complex))

    def deployed_circuit(self, selections: tuple[int, ...]) -> Circuit:
        chosen = []
        for i, part in enumerate(self.partitions):
            if i < len(selections):
                chosen.append(self.lists[i].candidates[selections[i]].circuit)
            elif self.fill == "original":
                chosen.append(part.sub_circuit)
            else:
                chosen.append(Circuit(len(part.qubits)))
        return recombine(self.partitions, chosen, self.model.num_qubits)

    def step(self, state: AgentState, action: int) -> AgentState:
        slice_ = action_slice(state, self.lists)
        if action not in slice_:
            raise ValueError(f"action {action} outside slice {slice_}")
        ordinal = action - slice_.start
        p = state.next_partition
        chosen = self.lists[p].candidates[ordinal].circuit
        embedded = recombine([self.partitions[p]], [chosen], self.model.num_qubits)
        partial = circuit_unitary(embedded) @ state.partial_unitary
        return AgentState(state.selections + (ordinal,), partial)

    def reward(self, selections: tuple[int, ...]) -> float:
        """Reward of a (possibly partial) deployment prefix."""
        if not selections:
            raise ValueError("reward needs at least one selection")
        if selections in self._cache:
            return self._cache[selections]
        circuit = self.deployed_circuit(selections)
        deployed = self.model.with_circuit(circuit)
        acc = accuracy(deployed, self.data, self.split, self.device)
        p_hat = estimate_p(
            circuit, self.device, r_twirls=self.r_twirls,
            shots=self.estimate_shots, seed=spawn_seed(self.seed, selections),
        )
        value = compute_reward(fairness_score(p_hat), acc, self.weights)
        self._cache[selections] = value
        return value


def spawn_seed(master: int, selections: tuple[int, ...]) -> int:
    """Stable per-prefix integer seed for the estimation twirls."""
    return int(spawn(master, "reward", *selections).integers(0, 2**31))


def reward_for_state(
    state: AgentState,
    partitions: list[Partition],
    lists: list[CandidateList],
    model: QnnModel,
    device: DeviceModel,
    data: Dataset,
    weights: RewardWeights,
    **env_kwargs,
) -> float:
    """Reward of a partial deployment, completing the remaining partitions
    with their original sub-circuits."""
    env = DeploymentEnv(partitions, lists, model, device, data, weights, **env_kwargs)
    return env.reward(state.selections)


# --- the episode loop ------------------------------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    best_selections: tuple[int, ...]
    best_reward: float
    episode_losses: tuple[float, ...]
    episode_max_q: tuple[float, ...]
    episode_rewards: tuple[float, ...]


def run_search(env: DeploymentEnv, cfg: TrainConfig) -> SearchResult:
    """Episodic deep-Q-learning over the deployment space.

    Every episode starts from the blank design, picks the first partition's
    candidate uniformly at random, then follows the epsilon-greedy policy to a
    complete deployment; transitions train the policy network against a
    periodically synced target network. Returns the best complete deployment
    ever evaluated plus per-episode curves.
    """
    total_actions = sum(len(cl) for cl in env.lists)
    dim = 2**env.model.num_qubits
    input_size = 2 * dim * dim
    init_rng = spawn(cfg.seed, "net-init")
    policy = ValueNetwork(input_size, cfg.hidden_sizes, total_actions, init_rng)
    target_net = ValueNetwork(input_size, cfg.hidden_sizes, total_actions, init_rng)
    target_net.copy_from(policy)
    explore_rng = spawn(cfg.seed, "exploration")
    replay: list[Transition] = []

    best_selections: tuple[int, ...] | None = None
    best_reward = -np.inf
    losses, max_qs, final_rewards = [], [], []

    for episode in range(cfg.iterations):
        epsilon = cfg.epsilon_at(episode)
        state = env.blank_state()
        episode_max_q = -np.inf
        while state.next_partition < env.num_partitions:
            slice_ = action_slice(state, env.lists)
            tensor = state_tensor(state)
            qvalues = policy.forward(tensor.ravel())
            episode_max_q = max(episode_max_q, float(qvalues[slice_.start:slice_.stop].max()))
            if state.next_partition == 0:
                action = int(slice_[explore_rng.integers(0, len(slice_))])
            else:
                action = select_action(qvalues, slice_, epsilon, explore_rng)
            nxt = env.step(state, action)
            reward = env.reward(nxt.selections)
            terminal = nxt.next_partition == env.num_partitions
            if terminal:
                transition = Transition(tensor, action, reward, None, None)
            else:
                nxt_slice = action_slice(nxt, env.lists)
                transition = Transition(
                    tensor, action, reward, state_tensor(nxt),
                    (nxt_slice.start, nxt_slice.stop),
                )
            replay.append(transition)
            if len(replay) > cfg.replay_capacity:
                replay.pop(0)
            state = nxt

        final = env.reward(state.selections)
        if final > best_reward:
            best_reward, best_selections = final, state.selections

        batch_size = min(cfg.batch_size, len(replay))
        picks = explore_rng.choice(len(replay), size=batch_size, replace=False)
        batch = [replay[i] for i in picks]
        loss = train_step(policy, target_net, batch, cfg.learning_rate, cfg.gamma)
        if (episode + 1) % cfg.target_sync_period == 0:
            target_net.copy_from(policy)

        losses.append(loss)
        max_qs.append(episode_max_q)
        final_rewards.append(final)

    assert best_selections is not None
    return SearchResult(
        best_selections, best_reward,
        tuple(losses), tuple(max_qs), tuple(final_rewards),
    )


def run_search_on(
    model: QnnModel,
    device: DeviceModel,
    data: Dataset,
    partitions: list[Partition],
    lists: list[CandidateList],
    cfg: TrainConfig,
    weights: RewardWeights,
    **env_kwargs,
) -> SearchResult:
    env = DeploymentEnv(partitions, lists, model, device, data, weights,
                        seed=cfg.seed, **env_kwargs)
    return run_search(env, cfg)


def save_curves(result: SearchResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "loss", "max_q", "episode_reward"])
        rows = zip(result.episode_losses, result.episode_max_q, result.episode_rewards)
        for ep, (loss, mq, rw) in enumerate(rows):
            writer.writerow([ep, "%.12g" % loss, "%.12g" % mq, "%.12g" % rw])


def save_selections(selections: tuple[int, ...], path: str | Path) -> None:
    lines = [f"{p} {c}" for p, c in enumerate(selections)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_selections(path: str | Path) -> tuple[int, ...]:
    pairs = [tuple(int(v) for v in ln.split()) for ln in Path(path).read_text().split("\n") if ln.strip()]
    if [p for p, _ in pairs] != list(range(len(pairs))):
        raise ValueError("selection file must list partitions 0..N-1 in order")
    return tuple(c for _, c in pairs)
