"""Deferral agent: state construction, reward, exploration schedule, and a
dueling double deep Q-network trained from replayed analyst feedback.

The network, backprop, and Adam are written out explicitly; the learner is
a plain numpy MLP with a shared trunk and separate value/advantage streams.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .avar import Avar
from .domain import Action, Alert, Priority, RewardParams, UNKNOWN, is_state_code
from .rng import substream

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
N_ACTIONS = 2

CHECKPOINT_MAGIC = "defer-soc-agent-v1"


@dataclass(frozen=True)
class StateVector:
    """Observation for one alert: [ai, per-feature match codes, distance, transition]."""

    ai_code: int
    feature_codes: tuple
    distance_code: int
    transition_code: int = UNKNOWN

    def __post_init__(self):
        codes = (self.ai_code, *self.feature_codes, self.distance_code, self.transition_code)
        bad = [c for c in codes if not is_state_code(c)]
        if bad:
            raise ValueError(f"invalid state codes: {bad}")
        if self.ai_code == UNKNOWN:
            raise ValueError("ai_code cannot be unknown: Stage 1 always assigns a priority")
        object.__setattr__(self, "feature_codes", tuple(int(c) for c in self.feature_codes))

    def __len__(self) -> int:
        return len(self.feature_codes) + 3

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.ai_code, *self.feature_codes, self.distance_code, self.transition_code],
            dtype=np.float64,
        )

    def with_transition(self, analyst_priority: Priority) -> "StateVector":
        return dataclasses.replace(self, transition_code=Priority(analyst_priority).value)


@dataclass
class AgentConfig:
    gamma: float = 0.70
    eps0: float = 0.75
    d_eps: float = 0.005
    eps_min: float = 0.01
    lr: float = 0.001
    buffer_capacity: int = 1000
    batch_size: int = 64
    target_sync_every: int = 100
    hidden: tuple = (64, 64, 32)  # trunk width x2, stream width
    reward: RewardParams = field(default_factory=RewardParams)
    feature_subset: Optional[tuple] = None  # None = every feature
    normalize_inputs: bool = False
    chain_next_state: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 < self.eps_min <= self.eps0 <= 1.0:
            raise ValueError("need 0 < eps_min <= eps0 <= 1")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer_capacity must be >= batch_size")
        if len(self.hidden) != 3 or any(int(h) < 1 for h in self.hidden):
            raise ValueError("hidden must be three positive widths")
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.feature_subset is not None:
            self.feature_subset = tuple(int(j) for j in self.feature_subset)


def epsilon(t: int, cfg: AgentConfig) -> float:
    """Exploration rate at time step t: eps0 / (1 + t*d_eps), floored."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return max(cfg.eps_min, cfg.eps0 / (1.0 + t * cfg.d_eps))


def reward(ai: Priority, analyst: Priority, deferred: bool, params: RewardParams) -> float:
    """Deferral payoff: 0 if accepted, -q for a redundant deferral, and a
    severity-scaled positive amount for a corrected misprioritisation."""
    if not deferred:
        return 0.0
    if ai == analyst:
        return -params.q
    return params.z + params.severity_bonus(Priority(analyst))


def build_state(alert: Alert, ai_priority: Priority, avar: Avar,
                feature_subset: Sequence[int]) -> StateVector:
    feats = alert.features
    codes = [avar.feature_match_code(j, float(feats[j])) for j in feature_subset]
    return StateVector(
        ai_code=Priority(ai_priority).value,
        feature_codes=tuple(codes),
        distance_code=avar.nearest_category_code(feats),
        transition_code=UNKNOWN,
    )


# ---------------------------------------------------------------------------
# Network


class QNet:
    """Dueling MLP: shared ReLU trunk, 1-unit value and 2-unit advantage heads.

    Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a').
    """

    LAYOUT = ("w1", "b1", "w2", "b2", "wv1", "bv1", "wv2", "bv2", "wa1", "ba1", "wa2", "ba2")

    def __init__(self, input_dim: int, hidden: tuple, rng: Optional[np.random.Generator] = None):
        h1, h2, hs = hidden
        self.input_dim = input_dim
        self.hidden = tuple(hidden)

        def he(n_in, n_out):
            if rng is None:
                return np.zeros((n_in, n_out))
            return rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))

        def out(n_in, n_out):
            if rng is None:
                return np.zeros((n_in, n_out))
            return rng.normal(0.0, np.sqrt(1.0 / n_in), size=(n_in, n_out))

        self.params: dict[str, np.ndarray] = {
            "w1": he(input_dim, h1), "b1": np.zeros(h1),
            "w2": he(h1, h2), "b2": np.zeros(h2),
            "wv1": he(h2, hs), "bv1": np.zeros(hs),
            "wv2": out(hs, 1), "bv2": np.zeros(1),
            "wa1": he(h2, hs), "ba1": np.zeros(hs),
            "wa2": out(hs, N_ACTIONS), "ba2": np.zeros(N_ACTIONS),
        }

    def copy_from(self, other: "QNet"):
        for k in self.LAYOUT:
            self.params[k] = other.params[k].copy()

    def clone(self) -> "QNet":
        c = QNet(self.input_dim, self.hidden, rng=None)
        c.copy_from(self)
        return c

    def forward(self, x: np.ndarray, cache: Optional[dict] = None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise ValueError(f"input dim {x.shape[1]} != {self.input_dim}")
        p = self.params
        z1 = x @ p["w1"] + p["b1"]
        a1 = np.maximum(z1, 0.0)
        z2 = a1 @ p["w2"] + p["b2"]
        a2 = np.maximum(z2, 0.0)
        zv = a2 @ p["wv1"] + p["bv1"]
        av = np.maximum(zv, 0.0)
        v = av @ p["wv2"] + p["bv2"]
        za = a2 @ p["wa1"] + p["ba1"]
        aa = np.maximum(za, 0.0)
        adv = aa @ p["wa2"] + p["ba2"]
        q = v + adv - adv.mean(axis=1, keepdims=True)
        if cache is not None:
            cache.update(x=x, z1=z1, a1=a1, z2=z2, a2=a2, zv=zv, av=av, za=za, aa=aa)
        return q

    def backward(self, cache: dict, dq: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of a scalar loss w.r.t. every parameter, given dL/dQ."""
        p = self.params
        dadv = dq - dq.sum(axis=1, keepdims=True) / N_ACTIONS
        dv = dq.sum(axis=1, keepdims=True)

        g = {}
        g["wv2"] = cache["av"].T @ dv
        g["bv2"] = dv.sum(axis=0)
        dav = dv @ p["wv2"].T
        dzv = dav * (cache["zv"] > 0.0)
        g["wv1"] = cache["a2"].T @ dzv
        g["bv1"] = dzv.sum(axis=0)
        da2_v = dzv @ p["wv1"].T

        g["wa2"] = cache["aa"].T @ dadv
        g["ba2"] = dadv.sum(axis=0)
        daa = dadv @ p["wa2"].T
        dza = daa * (cache["za"] > 0.0)
        g["wa1"] = cache["a2"].T @ dza
        g["ba1"] = dza.sum(axis=0)
        da2_a = dza @ p["wa1"].T

        da2 = da2_v + da2_a
        dz2 = da2 * (cache["z2"] > 0.0)
        g["w2"] = cache["a1"].T @ dz2
        g["b2"] = dz2.sum(axis=0)
        da1 = dz2 @ p["w2"].T
        dz1 = da1 * (cache["z1"] > 0.0)
        g["w1"] = cache["x"].T @ dz1
        g["b1"] = dz1.sum(axis=0)
        return g


def q_forward(net: QNet, s: StateVector) -> tuple[float, float]:
    q = net.forward(s.as_array()[None, :])
    return float(q[0, Action.ACCEPT]), float(q[0, Action.DEFER])


def select_action(net: QNet, s: StateVector, eps: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy; an exact Q tie resolves to Defer (send it to a human)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    if rng.random() < eps:
        return Action(int(rng.integers(N_ACTIONS)))
    q_accept, q_defer = q_forward(net, s)
    return Action.DEFER if q_defer >= q_accept else Action.ACCEPT


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float):
        self.lr = lr
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1 ** self.t
        bc2 = 1.0 - ADAM_BETA2 ** self.t
        for k, g in grads.items():
            self.m[k] = ADAM_BETA1 * self.m[k] + (1.0 - ADAM_BETA1) * g
            self.v[k] = ADAM_BETA2 * self.v[k] + (1.0 - ADAM_BETA2) * g * g
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + ADAM_EPS)


@dataclass(frozen=True)
class Transition:
    state: StateVector
    action: Action
    reward: float
    next_state: StateVector
    done: bool = True


class ReplayBuffer:
    """FIFO ring of transitions, stored as flat arrays for batch sampling."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.state_dim = state_dim
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.ones(capacity)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def append(self, tr: Transition):
        i = self.pos
        self.states[i] = tr.state.as_array()
        self.actions[i] = tr.action.value
        self.rewards[i] = tr.reward
        self.next_states[i] = tr.next_state.as_array()
        self.dones[i] = 1.0 if tr.done else 0.0
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.dones[idx],
        )


class DeferralAgent:
    """Stateful learner: online/target nets, replay, and one Adam optimizer."""

    def __init__(self, config: AgentConfig, n_features: int):
        self.config = config
        subset = config.feature_subset
        if subset is None:
            subset = tuple(range(n_features))
        if any(j < 0 or j >= n_features for j in subset):
            raise ValueError(f"feature_subset out of range for {n_features} features")
        self.feature_subset = subset
        self.n_features = n_features
        self.state_dim = len(subset) + 3
        self.rng = substream(config.seed, "agent")
        self.online = QNet(self.state_dim, config.hidden, rng=self.rng)
        self.target = self.online.clone()
        self.buffer = ReplayBuffer(config.buffer_capacity, self.state_dim)
        self.optimizer = Adam(self.online.params, config.lr)
        self.grad_steps = 0

    def _encode(self, arr: np.ndarray) -> np.ndarray:
        if self.config.normalize_inputs:
            return arr / float(UNKNOWN)
        return arr

    def build_state(self, alert: Alert, ai_priority: Priority, avar: Avar) -> StateVector:
        return build_state(alert, ai_priority, avar, self.feature_subset)

    def select_action(self, s: StateVector, t: int) -> Action:
        eps = epsilon(t, self.config)
        if self.rng.random() < eps:
            return Action(int(self.rng.integers(N_ACTIONS)))
        q = self.online.forward(self._encode(s.as_array())[None, :])[0]
        return Action.DEFER if q[Action.DEFER] >= q[Action.ACCEPT] else Action.ACCEPT

    def record_and_train(self, tr: Transition) -> Optional[float]:
        """Store the transition; run one gradient step once the buffer is warm."""
        self.buffer.append(tr)
        if len(self.buffer) < self.config.batch_size:
            return None
        states, actions, rewards, next_states, dones = self.buffer.sample(
            self.config.batch_size, self.rng
        )
        states = self._encode(states)
        next_states = self._encode(next_states)

        q_next_online = self.online.forward(next_states)
        best_next = q_next_online.argmax(axis=1)
        q_next_target = self.target.forward(next_states)
        targets = rewards + self.config.gamma * (1.0 - dones) * q_next_target[
            np.arange(len(best_next)), best_next
        ]

        cache: dict = {}
        q = self.online.forward(states, cache=cache)
        picked = q[np.arange(len(actions)), actions]
        err = picked - targets
        loss = float(np.mean(err * err))
        dq = np.zeros_like(q)
        dq[np.arange(len(actions)), actions] = 2.0 * err / len(actions)
        grads = self.online.backward(cache, dq)
        self.optimizer.step(self.online.params, grads)

        self.grad_steps += 1
        if self.grad_steps % self.config.target_sync_every == 0:
            self.target.copy_from(self.online)
        return loss


# ---------------------------------------------------------------------------
# Checkpoints: length-prefixed JSON header + raw little-endian float64 arrays.


def _agent_arrays(agent: DeferralAgent) -> list[tuple[str, np.ndarray]]:
    arrays = []
    for k in QNet.LAYOUT:
        arrays.append((f"online.{k}", agent.online.params[k]))
    for k in QNet.LAYOUT:
        arrays.append((f"target.{k}", agent.target.params[k]))
    for k in QNet.LAYOUT:
        arrays.append((f"adam.m.{k}", agent.optimizer.m[k]))
        arrays.append((f"adam.v.{k}", agent.optimizer.v[k]))
    b = agent.buffer
    arrays.append(("buffer.states", b.states[: b.size]))
    arrays.append(("buffer.actions", b.actions[: b.size].astype(np.float64)))
    arrays.append(("buffer.rewards", b.rewards[: b.size]))
    arrays.append(("buffer.next_states", b.next_states[: b.size]))
    arrays.append(("buffer.dones", b.dones[: b.size]))
    return arrays


def save_checkpoint(agent: DeferralAgent, path: str):
    arrays = _agent_arrays(agent)
    cfg = dataclasses.asdict(agent.config)
    cfg["reward"] = dataclasses.asdict(agent.config.reward)
    header = {
        "format": CHECKPOINT_MAGIC,
        "config": cfg,
        "n_features": agent.n_features,
        "grad_steps": agent.grad_steps,
        "adam_t": agent.optimizer.t,
        "buffer_pos": agent.buffer.pos,
        "buffer_size": agent.buffer.size,
        "rng_state": agent.rng.bit_generator.state,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> DeferralAgent:
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not an agent checkpoint")
        blobs = {}
        for meta in header["arrays"]:
            shape = tuple(meta["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
            blobs[meta["name"]] = data.astype(np.float64)

    cfg_dict = dict(header["config"])
    cfg_dict["reward"] = RewardParams(**cfg_dict["reward"])
    cfg_dict["hidden"] = tuple(cfg_dict["hidden"])
    if cfg_dict.get("feature_subset") is not None:
        cfg_dict["feature_subset"] = tuple(cfg_dict["feature_subset"])
    agent = DeferralAgent(AgentConfig(**cfg_dict), n_features=header["n_features"])
    for k in QNet.LAYOUT:
        agent.online.params[k] = blobs[f"online.{k}"].copy()
        agent.target.params[k] = blobs[f"target.{k}"].copy()
        agent.optimizer.m[k] = blobs[f"adam.m.{k}"].copy()
        agent.optimizer.v[k] = blobs[f"adam.v.{k}"].copy()
    agent.grad_steps = int(header["grad_steps"])
    agent.optimizer.t = int(header["adam_t"])
    b = agent.buffer
    size = int(header["buffer_size"])
    b.size = size
    b.pos = int(header["buffer_pos"])
    b.states[:size] = blobs["buffer.states"]
    b.actions[:size] = blobs["buffer.actions"].astype(np.int64)
    b.rewards[:size] = blobs["buffer.rewards"]
    b.next_states[:size] = blobs["buffer.next_states"]
    b.dones[:size] = blobs["buffer.dones"]
    agent.rng.bit_generator.state = header["rng_state"]
    return agent


def checkpoint_equal(path_a: str, path_b: str) -> bool:
    """Bitwise comparison of two checkpoints, ignoring nothing."""
    with open(path_a, "rb") as fa, open(path_b, "rb") as fb:
        return fa.read() == fb.read()
