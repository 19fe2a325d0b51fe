"""Advantage actor-critic learner in plain numpy.

The network is a tanh MLP with dropout after every hidden layer, a masked
softmax policy head and a linear value head. Gradients are derived by hand;
``tests/test_agent.py`` checks them against central finite differences.
"""

from __future__ import annotations

import io
import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .environment import FEATURE_GROUPS, Action, EnvConfig, FocusedReadingEnv, feature_layout
from .errors import ConfigurationError, ContractViolation, DataError, DivergenceError

log = logging.getLogger(__name__)

DEFAULT_HIDDEN = (2100, 1000, 250, 100)
MODEL_MAGIC = b"FRA2C\x00"
MODEL_VERSION = 1


@dataclass
class TrainConfig:
    minibatch: int = 100
    iterations: int = 2000
    gamma: float = 0.99
    learning_rate: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    clip_grad_norm: float | None = 1.0
    seed: int = 0
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    dropout: float = 0.2
    # 0.2 / 0.5 are dropout rates on the endpoint embeddings; "none" removes the embeddings
    embedding_dropout: float | str = 0.2
    ablate: tuple[str, ...] = ()
    n_envs: int = 10
    reward_scale: float = 1e-3
    input_transform: str = "symlog"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.ablate = tuple(self.ablate)
        self.adam_betas = tuple(self.adam_betas)
        if self.minibatch < 1:
            raise ConfigurationError("minibatch must be at least 1")
        if not 0 < self.gamma <= 1:
            raise ConfigurationError("gamma must lie in (0, 1]")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be non-negative")
        if self.n_envs < 1 or self.minibatch % self.n_envs:
            raise ConfigurationError(f"minibatch {self.minibatch} must be a multiple of n_envs {self.n_envs}")
        unknown = set(self.ablate) - set(FEATURE_GROUPS)
        if unknown:
            raise ConfigurationError(f"unknown feature groups {sorted(unknown)}; choose from {FEATURE_GROUPS}")
        if self.embedding_dropout != "none" and not 0 <= float(self.embedding_dropout) < 1:
            raise ConfigurationError("embedding_dropout must be a rate in [0, 1) or 'none'")
        if not 0 <= self.dropout < 1:
            raise ConfigurationError("dropout must be in [0, 1)")
        if self.input_transform not in ("symlog", "none"):
            raise ConfigurationError("input_transform must be 'symlog' or 'none'")


def _symlog(x):
    return np.sign(x) * np.log1p(np.abs(x))


class ActorCriticNet:
    """Shared MLP trunk with a policy head and a value head."""

    def __init__(self, input_dim: int, num_actions: int, hidden=DEFAULT_HIDDEN, dropout: float = 0.2,
                 embedding_dropout: float = 0.0, embedding_span: tuple[int, int] | None = None,
                 input_mask: np.ndarray | None = None, input_transform: str = "symlog",
                 rng: np.random.Generator | None = None):
        self.input_dim = int(input_dim)
        self.num_actions = int(num_actions)
        self.hidden = tuple(int(h) for h in hidden)
        self.dropout = float(dropout)
        self.embedding_dropout = float(embedding_dropout)
        self.embedding_span = tuple(embedding_span) if embedding_span else None
        self.input_mask = np.ones(self.input_dim) if input_mask is None else np.asarray(input_mask, dtype=np.float64)
        self.input_transform = input_transform
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: dict[str, np.ndarray] = {}
        widths = (self.input_dim,) + self.hidden
        for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            self._init_linear(f"h{i}", fan_in, fan_out, rng)
        self._init_linear("pi", widths[-1], self.num_actions, rng)
        self._init_linear("v", widths[-1], 1, rng)

    def _init_linear(self, name, fan_in, fan_out, rng):
        bound = 1.0 / math.sqrt(fan_in)
        self.params[f"{name}.W"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        self.params[f"{name}.b"] = rng.uniform(-bound, bound, size=fan_out)

    @property
    def num_layers(self) -> int:
        return len(self.hidden)

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def preprocess(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64)) * self.input_mask
        if self.input_transform == "symlog":
            x = _symlog(x)
        return x

    def forward(self, features, mask, training: bool = False, rng: np.random.Generator | None = None):
        """Return (probs, values, cache) for a batch of feature rows."""
        x = self.preprocess(features)
        mask = np.atleast_2d(np.asarray(mask, dtype=bool))
        if x.shape[1] != self.input_dim:
            raise ContractViolation(f"feature length {x.shape[1]} != network input {self.input_dim}")
        if mask.shape != (x.shape[0], self.num_actions):
            raise ContractViolation(f"mask shape {mask.shape} != {(x.shape[0], self.num_actions)}")
        if not mask.any(axis=1).all():
            raise ContractViolation("every action is masked out")
        if training and rng is None:
            raise ContractViolation("training mode needs a random generator for dropout")

        if training and self.embedding_span and self.embedding_dropout > 0:
            lo, hi = self.embedding_span
            keep = (rng.random((x.shape[0], hi - lo)) >= self.embedding_dropout) / (1.0 - self.embedding_dropout)
            x = x.copy()
            x[:, lo:hi] *= keep
        acts, drops = [x], []
        h = x
        for i in range(self.num_layers):
            a = np.tanh(h @ self.params[f"h{i}.W"] + self.params[f"h{i}.b"])
            if training and self.dropout > 0:
                drop = (rng.random(a.shape) >= self.dropout) / (1.0 - self.dropout)
                h = a * drop
            else:
                drop = None
                h = a
            acts.append(a)
            drops.append(drop)
        logits = h @ self.params["pi.W"] + self.params["pi.b"]
        logits = np.where(mask, logits, -np.inf)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.where(mask, np.exp(shifted), 0.0)
        probs = e / e.sum(axis=1, keepdims=True)
        values = (h @ self.params["v.W"] + self.params["v.b"])[:, 0]
        cache = {"acts": acts, "drops": drops, "h": h, "shifted": shifted, "mask": mask}
        return probs, values, cache

    def backward(self, cache, dlogits: np.ndarray, dvalues: np.ndarray) -> dict[str, np.ndarray]:
        """Backpropagate loss gradients w.r.t. logits and values to every parameter."""
        grads = {}
        h = cache["h"]
        dlogits = np.where(cache["mask"], dlogits, 0.0)
        dv = dvalues[:, None]
        grads["pi.W"] = h.T @ dlogits
        grads["pi.b"] = dlogits.sum(axis=0)
        grads["v.W"] = h.T @ dv
        grads["v.b"] = dv.sum(axis=0)
        dh = dlogits @ self.params["pi.W"].T + dv @ self.params["v.W"].T
        acts, drops = cache["acts"], cache["drops"]
        for i in reversed(range(self.num_layers)):
            if drops[i] is not None:
                dh = dh * drops[i]
            a = acts[i + 1]
            dz = dh * (1.0 - a * a)
            inp = acts[i] if i == 0 or drops[i - 1] is None else acts[i] * drops[i - 1]
            grads[f"h{i}.W"] = inp.T @ dz
            grads[f"h{i}.b"] = dz.sum(axis=0)
            if i > 0:
                dh = dz @ self.params[f"h{i}.W"].T
        return grads

    # persistence

    def header(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "num_actions": self.num_actions,
            "hidden": list(self.hidden),
            "dropout": self.dropout,
            "embedding_dropout": self.embedding_dropout,
            "embedding_span": list(self.embedding_span) if self.embedding_span else None,
            "input_transform": self.input_transform,
        }


@dataclass
class Batch:
    features: np.ndarray  # (N, input_dim)
    masks: np.ndarray  # (N, num_actions) bool
    actions: np.ndarray  # (N,) slot indices
    returns: np.ndarray  # (N,)


@dataclass
class LossInfo:
    total: float
    policy: float
    value: float
    entropy: float


def a2c_loss_and_grads(net: ActorCriticNet, batch: Batch, value_coef: float, entropy_coef: float,
                       rng: np.random.Generator | None = None, training: bool = True,
                       advantages: np.ndarray | None = None):
    """A2C objective: mean(-log pi(a|s) * A) + c_v mean((R - V)^2) - c_e mean(H(pi)).

    Advantages are treated as constants (no gradient through V in the policy
    term); pass them explicitly to pin them, otherwise A = R - V.
    """
    probs, values, cache = net.forward(batch.features, batch.masks, training=training, rng=rng)
    N = probs.shape[0]
    if advantages is None:
        advantages = batch.returns - values
    rows = np.arange(N)
    if not batch.masks[rows, batch.actions].all():
        raise ContractViolation("batch contains a masked action")
    mask, shifted = cache["mask"], cache["shifted"]
    lse = np.log(np.where(mask, np.exp(shifted), 0.0).sum(axis=1, keepdims=True))
    logp = np.where(mask, shifted - lse, 0.0)
    ent = -(probs * logp).sum(axis=1)
    policy_loss = float(-(logp[rows, batch.actions] * advantages).mean())
    err = values - batch.returns
    value_loss = float((err ** 2).mean())
    entropy_mean = float(ent.mean())
    total = policy_loss + value_coef * value_loss - entropy_coef * entropy_mean

    onehot = np.zeros_like(probs)
    onehot[rows, batch.actions] = 1.0
    dlogits = -(advantages[:, None] / N) * (onehot - probs)
    dlogits += (entropy_coef / N) * probs * (logp + ent[:, None])
    dvalues = value_coef * 2.0 * err / N
    grads = net.backward(cache, dlogits, dvalues)
    return LossInfo(total, policy_loss, value_loss, entropy_mean), grads


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * (g * g)
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_by_global_norm(grads, max_norm):
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for g in grads.values():
            g *= scale
    return norm


def act_greedy(net: ActorCriticNet, features, mask) -> int:
    probs, _, _ = net.forward(features, mask, training=False)
    return int(np.argmax(probs[0]))


def build_net(env_config: EnvConfig, dimension: int, cfg: TrainConfig, rng: np.random.Generator) -> ActorCriticNet:
    n = env_config.n_per_template
    layout = feature_layout(dimension, n)
    input_dim = layout["topic"][1]
    input_mask = np.ones(input_dim)
    ablate = set(cfg.ablate)
    if cfg.embedding_dropout == "none":
        ablate.add("embeddings")
    for group in ablate:
        lo, hi = layout[group]
        input_mask[lo:hi] = 0.0
    emb_rate = 0.0 if cfg.embedding_dropout == "none" else float(cfg.embedding_dropout)
    return ActorCriticNet(
        input_dim, env_config.num_actions, cfg.hidden, cfg.dropout,
        embedding_dropout=emb_rate, embedding_span=layout["embeddings"],
        input_mask=input_mask, input_transform=cfg.input_transform, rng=rng,
    )


@dataclass
class CurvePoint:
    iteration: int
    mean_return: float
    policy_loss: float
    value_loss: float
    episodes: int


@dataclass
class TrainedAgent:
    net: ActorCriticNet
    env_config: EnvConfig
    train_config: TrainConfig
    curve: list[CurvePoint] = field(default_factory=list)

    def policy(self, mode: str = "greedy") -> "A2CPolicy":
        return A2CPolicy(self.net, mode)

    def save(self, path) -> None:
        save_model(self, path)


class A2CPolicy:
    """Evaluation-time wrapper: greedy argmax by default, or sampling."""

    def __init__(self, net: ActorCriticNet, mode: str = "greedy"):
        if mode not in ("greedy", "sample"):
            raise ConfigurationError(f"unknown a2c mode {mode!r}")
        self.net = net
        self.mode = mode
        self.name = "a2c" if mode == "greedy" else "a2c-sample"

    def choose(self, env: FocusedReadingEnv, state, actions: list[Action], rng) -> Action:
        x = env.featurize(state, actions)
        mask = env.action_mask(actions)
        by_slot = {a.slot: a for a in actions}
        if self.mode == "greedy":
            slot = act_greedy(self.net, x, mask)
        else:
            probs, _, _ = self.net.forward(x, mask)
            slot = int(rng.choice(len(probs[0]), p=probs[0]))
        return by_slot[slot]


def _discounted_returns(rewards, dones, bootstrap, gamma):
    """rewards, dones: (T, B); bootstrap: (B,) values of the states after the last step."""
    T = rewards.shape[0]
    out = np.zeros_like(rewards)
    running = bootstrap.copy()
    for t in reversed(range(T)):
        running = rewards[t] + gamma * running * (1.0 - dones[t])
        out[t] = running
    return out


def train(env: FocusedReadingEnv, problems, cfg: TrainConfig | None = None, progress=None) -> TrainedAgent:
    """Synchronous A2C with ``n_envs`` episodes rolled in lockstep.

    Each iteration gathers ``minibatch`` transitions (``minibatch / n_envs``
    steps per env); unfinished episodes are bootstrapped with the critic.
    """
    cfg = cfg or TrainConfig()
    problems = list(problems)
    if not problems:
        raise ConfigurationError("training needs at least one problem")
    rng = np.random.default_rng(cfg.seed)
    net = build_net(env.config, env.dimension, cfg, np.random.default_rng(rng.integers(2 ** 63)))
    log.info("actor-critic network: %d parameters", net.parameter_count())
    opt = Adam(net.params, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps)
    B = cfg.n_envs
    T = cfg.minibatch // B
    A = env.config.num_actions

    def fresh():
        return env.reset(problems[int(rng.integers(len(problems)))])

    def observe(state):
        acts = env.candidate_actions(state)
        return acts, env.featurize(state, acts), env.action_mask(acts)

    states = [fresh() for _ in range(B)]
    obs = [observe(s) for s in states]
    curve = []
    for it in range(cfg.iterations):
        feats = np.zeros((T, B, net.input_dim))
        masks = np.zeros((T, B, A), dtype=bool)
        chosen = np.zeros((T, B), dtype=np.int64)
        rewards = np.zeros((T, B))
        dones = np.zeros((T, B))
        finished = []
        for t in range(T):
            X = np.stack([o[1] for o in obs])
            M = np.stack([o[2] for o in obs])
            probs, _, _ = net.forward(X, M, training=False)
            feats[t], masks[t] = X, M
            for b in range(B):
                slot = int(rng.choice(A, p=probs[b]))
                chosen[t, b] = slot
                action = next(a for a in obs[b][0] if a.slot == slot)
                state, r, done = env.step(states[b], action)
                rewards[t, b] = r * cfg.reward_scale
                dones[t, b] = float(done)
                if done:
                    finished.append(state.total_reward)
                    states[b] = fresh()
                obs[b] = observe(states[b])
        X = np.stack([o[1] for o in obs])
        M = np.stack([o[2] for o in obs])
        _, boot, _ = net.forward(X, M, training=False)
        returns = _discounted_returns(rewards, dones, boot, cfg.gamma)
        batch = Batch(feats.reshape(T * B, -1), masks.reshape(T * B, A), chosen.reshape(-1), returns.reshape(-1))
        info, grads = a2c_loss_and_grads(net, batch, cfg.value_coef, cfg.entropy_coef, rng=rng, training=True)
        if not np.isfinite(info.total):
            raise DivergenceError(
                f"non-finite loss at iteration {it}: policy={info.policy} value={info.value} entropy={info.entropy}"
            )
        clip_by_global_norm(grads, cfg.clip_grad_norm)
        opt.step(net.params, grads)
        mean_ret = float(np.mean(finished)) if finished else float("nan")
        curve.append(CurvePoint(it, mean_ret, info.policy, info.value, len(finished)))
        if progress is not None:
            progress(curve[-1])
    return TrainedAgent(net, env.config, cfg, curve)


def write_curve(curve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,mean_return,policy_loss,value_loss,episodes\n")
        for p in curve:
            fh.write(f"{p.iteration},{p.mean_return!r},{p.policy_loss!r},{p.value_loss!r},{p.episodes}\n")


def save_model(agent: TrainedAgent, path) -> None:
    """Magic, version, JSON header length, JSON header, then raw little-endian float64 arrays."""
    net = agent.net
    names = list(net.params)
    header = {
        "version": MODEL_VERSION,
        "net": net.header(),
        "env": asdict(agent.env_config),
        "train": asdict(agent.train_config),
        "feature_layout": feature_layout((net.embedding_span[1] - net.embedding_span[0]) // 2 if net.embedding_span else 0,
                                         agent.env_config.n_per_template),
        "arrays": [{"name": k, "shape": list(net.params[k].shape)} for k in names],
        "parameter_count": net.parameter_count(),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<IQ", MODEL_VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(net.input_mask, dtype="<f8").tobytes())
        for k in names:
            fh.write(np.ascontiguousarray(net.params[k], dtype="<f8").tobytes())


def load_model(path) -> TrainedAgent:
    data = Path(path).read_bytes()
    if not data.startswith(MODEL_MAGIC):
        raise DataError(f"{path} is not an actor-critic model file")
    buf = io.BytesIO(data[len(MODEL_MAGIC):])
    version, hlen = struct.unpack("<IQ", buf.read(12))
    if version != MODEL_VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    header = json.loads(buf.read(hlen).decode("utf-8"))
    h = header["net"]
    net = ActorCriticNet(h["input_dim"], h["num_actions"], h["hidden"], h["dropout"],
                         h["embedding_dropout"], h["embedding_span"], input_transform=h["input_transform"],
                         rng=np.random.default_rng(0))
    net.input_mask = np.frombuffer(buf.read(8 * net.input_dim), dtype="<f8").astype(np.float64)
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        size = int(np.prod(shape))
        net.params[spec["name"]] = np.frombuffer(buf.read(8 * size), dtype="<f8").astype(np.float64).reshape(shape)
    env_cfg = EnvConfig(**header["env"])
    train_cfg = TrainConfig(**header["train"])
    return TrainedAgent(net, env_cfg, train_cfg)
