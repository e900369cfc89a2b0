"""From-scratch deep Q-learning for the real-time stage.

A plain float64 multilayer perceptron (rectifier hidden layers, identity
output) maps the six-component observation to one value per discrete
generator action; training is vanilla DQN: epsilon-greedy exploration, a
FIFO replay buffer, a periodically synced target network, and plain
stochastic-gradient updates on the squared TD error. Everything is driven
by one seeded generator, so a training run reproduces bit-identical weights.

The trained artifact bundles the weights with the observation-scaling
constants and a configuration fingerprint; loading rejects mismatches.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from microdispatch.domain import (
    HOURS_PER_DAY,
    DispatchSetpoint,
    MicrogridConfig,
    MicrogridState,
    advance_state,
    clamp_dg,
    step_plant,
)

HIDDEN_LAYERS = (64, 128, 128, 64)
STATE_DIMENSION = 6
WEIGHT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class DqnConfig:
    discount: float = 0.9
    learning_rate: float = 0.001
    action_count: int = 40
    replay_capacity: int = 50_000
    batch_size: int = 64
    target_sync_interval: int = 500
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 50_000
    episodes: int | None = None  # None: one pass over the training days
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.discount <= 1.0):
            raise ValueError("discount must be in [0, 1]")
        if self.action_count < 2:
            raise ValueError("need at least two actions")
        for name in ("epsilon_start", "epsilon_end"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")

    def fingerprint(self) -> str:
        payload = json.dumps(self.__dict__, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Normalization:
    """Observation scaling constants, stored with the trained network."""

    load_scale_kw: float = 10000.0
    pv_scale_kw: float = 15000.0


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class MlpNetwork:
    """Dense rectifier network; weights are float64 throughout."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.weights = weights
        self.biases = biases
        for w, b in zip(weights, biases):
            if w.shape[1] != b.shape[0]:
                raise ValueError("inconsistent layer shapes")
        for prev, nxt in zip(weights, weights[1:]):
            if prev.shape[1] != nxt.shape[0]:
                raise ValueError("inconsistent layer chain")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @classmethod
    def initialize(cls, sizes, rng: np.random.Generator) -> "MlpNetwork":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    def copy(self) -> "MlpNetwork":
        return MlpNetwork([w.copy() for w in self.weights],
                          [b.copy() for b in self.biases])

    def forward_batch(self, x: np.ndarray):
        """Activations per layer; the last entry is the linear output."""
        activations = [x]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = activations[-1] @ w + b
            if i < len(self.weights) - 1:
                z = np.maximum(z, 0.0)
            activations.append(z)
        return activations


def forward(network: MlpNetwork, observation: np.ndarray) -> np.ndarray:
    """Action values for one observation vector."""
    observation = np.asarray(observation, dtype=float)
    if observation.shape != (network.layer_sizes[0],):
        raise ValueError(f"expected a {network.layer_sizes[0]}-vector, "
                         f"got shape {observation.shape}")
    return network.forward_batch(observation[None, :])[-1][0]


def encode_state(state: MicrogridState, load_kw: float, pv_kw: float,
                 config: MicrogridConfig,
                 norm: Normalization = Normalization()) -> np.ndarray:
    """Six observations scaled to the unit range by fixed denominators."""
    return np.array([
        state.hour_of_day / (HOURS_PER_DAY - 1),
        load_kw / norm.load_scale_kw,
        pv_kw / norm.pv_scale_kw,
        state.soc_kwh / config.ess_energy_max,
        state.soc_midnight_kwh / config.ess_energy_max,
        state.dg_prev_kw / config.dg_power_max,
    ])


def action_to_dg(index: int, state: MicrogridState,
                 config: MicrogridConfig) -> tuple[float, bool, bool]:
    """Map a discrete action to a feasible DG power and transition flags.

    Action 0 requests the generator off; the rest span the stable power
    range affinely. The request is clamped into the current ramp window, so
    the returned power is exactly what the plant will apply.
    """
    if not (0 <= index < config.drl_action_count):
        raise ValueError(f"action index {index} outside 0..{config.drl_action_count - 1}")
    if index == 0:
        request = 0.0
    else:
        span = config.dg_power_max - config.dg_power_min
        request = config.dg_power_min + (index - 1) / (config.drl_action_count - 2) * span
    applied, _, started, stopped = clamp_dg(
        state, DispatchSetpoint(dg_kw=request), config)
    return applied, started, stopped


def reward(step_cost: float, blackout: bool, config: MicrogridConfig) -> float:
    """Weighted penalty on operating cost with a flat hit per blackout hour."""
    return (-config.drl_cost_weight * step_cost
            - config.drl_blackout_weight * (1.0 if blackout else 0.0))


def train_step(network: MlpNetwork, target: MlpNetwork,
               batch: list[Transition], config: DqnConfig,
               target_bound: float | None = None) -> float:
    """One SGD step on the squared TD error of a batch; returns the loss.

    Targets bootstrap through the target network except on terminal
    transitions. With `target_bound` set, any TD target outside the
    geometric envelope max|reward|/(1-discount) aborts training as
    divergence. The network is updated in place.
    """
    if not batch:
        raise ValueError("empty batch")
    states = np.stack([t.state for t in batch])
    next_states = np.stack([t.next_state for t in batch])
    actions = np.array([t.action for t in batch])
    rewards = np.array([t.reward for t in batch])
    terminal = np.array([t.terminal for t in batch])

    next_q = target.forward_batch(next_states)[-1]
    targets = rewards + config.discount * np.where(terminal, 0.0, next_q.max(axis=1))
    if target_bound is not None and np.abs(targets).max() > target_bound:
        raise FloatingPointError(
            f"TD target escaped the reward envelope +-{target_bound:.1f}; "
            f"training diverged")

    activations = network.forward_batch(states)
    q = activations[-1]
    taken = q[np.arange(len(batch)), actions]
    diff = taken - targets
    loss = float(np.mean(diff ** 2))
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite TD loss; training diverged")

    # backpropagate d(loss)/d(output) through the rectifier stack
    grad_out = np.zeros_like(q)
    grad_out[np.arange(len(batch)), actions] = 2.0 * diff / len(batch)
    delta = grad_out
    for layer in range(len(network.weights) - 1, -1, -1):
        a_prev = activations[layer]
        grad_w = a_prev.T @ delta
        grad_b = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ network.weights[layer].T) * (activations[layer] > 0.0)
        network.weights[layer] -= config.learning_rate * grad_w
        network.biases[layer] -= config.learning_rate * grad_b
    return loss


class ReplayBuffer:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.buffer: list[Transition] = []
        self.cursor = 0

    def push(self, transition: Transition) -> None:
        if len(self.buffer) < self.capacity:
            self.buffer.append(transition)
        else:
            self.buffer[self.cursor] = transition
            self.cursor = (self.cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.integers(0, len(self.buffer), size=batch_size)
        return [self.buffer[i] for i in idx]

    def __len__(self):
        return len(self.buffer)


@dataclass
class DqnPolicy:
    """Trained artifact: network plus everything inference must agree on."""

    network: MlpNetwork
    normalization: Normalization
    config_fingerprint: str

    def action(self, observation: np.ndarray) -> int:
        values = forward(self.network, observation)
        return int(np.argmax(values))  # lowest index wins ties

    def save(self, path) -> None:
        payload = {
            "format_version": WEIGHT_FORMAT_VERSION,
            "layer_sizes": self.network.layer_sizes,
            "normalization": {"load_scale_kw": self.normalization.load_scale_kw,
                              "pv_scale_kw": self.normalization.pv_scale_kw},
            "config_fingerprint": self.config_fingerprint,
            "weights": [w.tolist() for w in self.network.weights],
            "biases": [b.tolist() for b in self.network.biases],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path) -> "DqnPolicy":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("format_version") != WEIGHT_FORMAT_VERSION:
            raise ValueError(f"unsupported weight format {payload.get('format_version')}")
        weights = [np.array(w, dtype=float) for w in payload["weights"]]
        biases = [np.array(b, dtype=float) for b in payload["biases"]]
        network = MlpNetwork(weights, biases)
        if network.layer_sizes != payload["layer_sizes"]:
            raise ValueError("weight shapes disagree with the declared layer sizes")
        norm = Normalization(**payload["normalization"])
        return cls(network=network, normalization=norm,
                   config_fingerprint=payload["config_fingerprint"])


class TrainingEnvironment:
    """Hourly plant loop over training days with the commitment protocol.

    The commitment is solved once from the planning SOC and reused for every
    day (the scenario set never changes during training). Battery and
    generator state carry across episode boundaries; episodes only delimit
    reward accounting, one day each.
    """

    def __init__(self, days, tariff, config: MicrogridConfig, commitment,
                 norm: Normalization = Normalization(),
                 initial_soc_kwh: float | None = None):
        if len(days) == 0:
            raise ValueError("empty training dataset")
        self.days = days
        self.tariff = tariff
        self.config = config
        self.commitment = commitment
        self.norm = norm
        soc0 = config.ess_energy_end if initial_soc_kwh is None else initial_soc_kwh
        self.state = MicrogridState(hour_of_day=0, soc_kwh=soc0, soc_midnight_kwh=soc0)
        self.day_index = 0

    def observe(self) -> np.ndarray:
        day = self.days[self.day_index % len(self.days)]
        h = self.state.hour_of_day
        return encode_state(self.state, float(day.load_kw[h]), float(day.pv_kw[h]),
                            self.config, self.norm)

    def reward_magnitude_bound(self) -> float:
        """Loose per-hour bound on |reward| for divergence detection."""
        cfg = self.config
        worst_cost = (cfg.dg_unit_cost * cfg.dg_power_max
                      + max(self.tariff.hourly_price) * cfg.grid_power_cap
                      + cfg.ess_unit_cost * 2 * cfg.ess_power_cap
                      + cfg.reserve_revenue * 2 * cfg.ess_power_cap)
        return cfg.drl_cost_weight * worst_cost + cfg.drl_blackout_weight

    def step(self, action_index: int):
        """Apply one action; returns (transition-ingredients, day_finished)."""
        day = self.days[self.day_index % len(self.days)]
        h = self.state.hour_of_day
        load = float(day.load_kw[h])
        pv = float(day.pv_kw[h])
        committed = self.commitment.hour(h)

        dg_kw, started, stopped = action_to_dg(action_index, self.state, self.config)
        residual = load - pv - (committed.grid_buy_kw - committed.grid_sell_kw) - dg_kw
        setpoint = DispatchSetpoint(dg_kw=dg_kw,
                                    ess_discharge_kw=max(residual, 0.0),
                                    ess_charge_kw=max(-residual, 0.0),
                                    dg_start=started, dg_stop=stopped)
        outcome = step_plant(self.state, setpoint, committed, load, pv,
                             self.tariff.price(h), self.config)
        step_reward = reward(outcome.step_cost, outcome.blackout, self.config)
        self.state = advance_state(self.state, outcome)
        day_finished = self.state.hour_of_day == 0
        if day_finished:
            self.day_index += 1
        return step_reward, day_finished


def train_agent(environment: TrainingEnvironment, config: DqnConfig,
                sizes=None) -> tuple[DqnPolicy, list[float]]:
    """Run DQN over day-long episodes; returns the policy and reward curve."""
    rng = np.random.default_rng(config.seed)
    if sizes is None:
        sizes = [STATE_DIMENSION, *HIDDEN_LAYERS, config.action_count]
    network = MlpNetwork.initialize(sizes, rng)
    target = network.copy()
    replay = ReplayBuffer(config.replay_capacity)

    episodes = config.episodes
    if episodes is None:
        episodes = len(environment.days)

    curve: list[float] = []
    step_count = 0
    divergence_bound = (environment.reward_magnitude_bound()
                        / max(1.0 - config.discount, 1e-6))
    for _ in range(episodes):
        episode_reward = 0.0
        day_finished = False
        while not day_finished:
            obs = environment.observe()
            epsilon = _epsilon(step_count, config)
            if rng.random() < epsilon:
                action = int(rng.integers(config.action_count))
            else:
                action = int(np.argmax(forward(network, obs)))
            step_reward, day_finished = environment.step(action)
            episode_reward += step_reward
            # day boundaries delimit reward accounting only: the battery and
            # generator carry over, so the value function must bootstrap
            # straight through midnight
            replay.push(Transition(state=obs, action=action, reward=step_reward,
                                   next_state=environment.observe(),
                                   terminal=False))
            step_count += 1
            if len(replay) >= config.batch_size:
                train_step(network, target, replay.sample(config.batch_size, rng),
                           config, target_bound=divergence_bound)
            if step_count % config.target_sync_interval == 0:
                target = network.copy()
        curve.append(episode_reward)
    policy = DqnPolicy(network=network, normalization=environment.norm,
                       config_fingerprint=config.fingerprint())
    return policy, curve


def _epsilon(step: int, config: DqnConfig) -> float:
    if config.epsilon_decay_steps <= 0:
        return config.epsilon_end
    frac = min(1.0, step / config.epsilon_decay_steps)
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)


class DrlController:
    """Greedy policy rollout: the network picks the generator power, the
    battery absorbs the balance residual."""

    kind = "drl"

    def __init__(self, policy: DqnPolicy):
        self.policy = policy

    def decide(self, state: MicrogridState, day, commitment, tariff,
               config: MicrogridConfig) -> DispatchSetpoint:
        h = state.hour_of_day
        load = float(day.load_kw[h])
        pv = float(day.pv_kw[h])
        committed = commitment.hour(h)
        obs = encode_state(state, load, pv, config, self.policy.normalization)
        action = self.policy.action(obs)
        dg_kw, started, stopped = action_to_dg(action, state, config)
        residual = load - pv - (committed.grid_buy_kw - committed.grid_sell_kw) - dg_kw
        return DispatchSetpoint(dg_kw=dg_kw,
                                ess_discharge_kw=max(residual, 0.0),
                                ess_charge_kw=max(-residual, 0.0),
                                dg_start=started, dg_stop=stopped)
