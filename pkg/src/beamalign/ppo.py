"""Recurrent actor-critic trained with clipped-surrogate PPO over whole episodes.

The network reads the received symbol of the previous probe as a real pair,
carries a two-layer GRU state through the episode, and emits a diagonal
Gaussian over unbounded pre-actions ``u``. A squashing function maps ``u``
into the action box of the chosen beam map:

``direct``
    ``a = tanh(u)`` in ``[-1, 1]^(2 n_rx)``, fed to :func:`~beamalign.maps.direct_map`.
``beam``
    ``alpha = (pi/2 - beta_min) tanh(u0)``,
    ``beta = beta_min + (beta_max(alpha) - beta_min) sigmoid(u1)``, fed to a
    frozen :class:`~beamalign.maps.BeamModule`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import STREAM_TRAIN, EnvConfig, VectorEnv, episode_rng
from .maps import HALF_PI, MIN_BETA, BeamModule, beta_max, direct_map
from .nn import MLP, Adam, GruStack, ParamStore, Tape, clip_global_norm
from .nn import autodiff as ad

STREAM_POLICY = 2
LOG_2PI = np.log(2.0 * np.pi)
ALPHA_RANGE = HALF_PI - MIN_BETA


@dataclass(frozen=True)
class PpoConfig:
    clip: float = 0.2
    ent_coef: float = 0.001
    vf_coef: float = 0.5
    gamma: float = 1.0
    lr: float = 3e-4
    batch_episodes: int = 2000
    workers: int = 2000
    max_grad_norm: float = 0.5
    epochs: int = 4
    minibatch_episodes: int = 500
    hidden: int = 128
    gru_layers: int = 2
    ff_layers: int = 2
    log_std_init: float = -0.5

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")
        for name in ("lr", "batch_episodes", "workers", "max_grad_norm", "epochs",
                     "minibatch_episodes", "hidden", "gru_layers", "ff_layers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.ent_coef < 0 or self.vf_coef < 0 or not 0.0 < self.gamma <= 1.0:
            raise ValueError("coefficients must be non-negative and gamma in (0, 1]")


# ---------------------------------------------------------------- squashing


def _log_sech2(u):
    # log(1 - tanh(u)^2), stable for large |u|
    return 2.0 * (np.log(2.0) - np.abs(u) - np.log1p(np.exp(-2.0 * np.abs(u))))


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def squash(u: np.ndarray, mode: str) -> np.ndarray:
    if mode == "direct":
        return np.tanh(u)
    alpha = ALPHA_RANGE * np.tanh(u[..., 0])
    # the width rounds slightly negative once tanh saturates
    width = np.maximum(beta_max(alpha) - MIN_BETA, 0.0)
    beta = MIN_BETA + width * _sigmoid(u[..., 1])
    return np.stack([alpha, beta], axis=-1)


def squash_log_det(u: np.ndarray, mode: str) -> np.ndarray:
    """``log |det da/du|`` summed over action dimensions."""
    if mode == "direct":
        return _log_sech2(u).sum(axis=-1)
    alpha = ALPHA_RANGE * np.tanh(u[..., 0])
    width = np.maximum(beta_max(alpha) - MIN_BETA, 1e-300)
    s = _sigmoid(u[..., 1])
    return (np.log(ALPHA_RANGE) + _log_sech2(u[..., 0])
            + np.log(width) + np.log(np.maximum(s * (1.0 - s), 1e-300)))


def unsquash(a: np.ndarray, mode: str) -> np.ndarray:
    if mode == "direct":
        return np.arctanh(a)
    alpha, beta = a[..., 0], a[..., 1]
    frac = (beta - MIN_BETA) / (beta_max(alpha) - MIN_BETA)
    return np.stack([np.arctanh(alpha / ALPHA_RANGE), np.log(frac) - np.log1p(-frac)], axis=-1)


def gaussian_log_prob(u, mean, log_std) -> np.ndarray:
    z = (u - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


# ---------------------------------------------------------------- network


class PolicyNet:
    """GRU trunk, two tanh feedforward layers, Gaussian-mean and value heads."""

    def __init__(self, n_rx: int, mode: str = "direct", cfg: PpoConfig | None = None,
                 beam_module: BeamModule | None = None, rng: np.random.Generator | None = None):
        if mode not in ("direct", "beam"):
            raise ValueError("mode must be 'direct' or 'beam'")
        if mode == "beam":
            if beam_module is None:
                raise ValueError("beam mode needs a trained BeamModule")
            if beam_module.n_rx != n_rx:
                raise ValueError("beam module antenna count does not match n_rx")
        cfg = cfg or PpoConfig()
        rng = np.random.default_rng(0) if rng is None else rng
        self.n_rx = n_rx
        self.mode = mode
        self.beam_module = beam_module
        self.action_dim = 2 * n_rx if mode == "direct" else 2
        H = cfg.hidden
        self.store = ParamStore()
        self.gru = GruStack.create(self.store, "gru", 2, H, cfg.gru_layers, rng)
        self.ff = MLP.create(self.store, "ff", (H,) * (cfg.ff_layers + 1), rng, final_activation=True)
        # small initial mean head keeps early actions near the box centre
        self.store.add("pi.W", 0.01 * rng.uniform(-1, 1, (H, self.action_dim)) / np.sqrt(H))
        self.store.add("pi.b", np.zeros(self.action_dim))
        self.store.add("v.W", rng.uniform(-1, 1, (H, 1)) / np.sqrt(H))
        self.store.add("v.b", np.zeros(1))
        self.store.add("log_std", np.full(self.action_dim, cfg.log_std_init))

    def initial_state(self, batch: int):
        return self.gru.initial_state(batch)

    def step(self, obs, hidden):
        """One timestep: returns ``(mean, value, new_hidden)`` as tensors."""
        hidden = self.gru.step(obs, hidden)
        feat = self.ff(hidden[-1])
        mean = ad.matmul(feat, self.store["pi.W"]) + self.store["pi.b"]
        value = ad.matmul(feat, self.store["v.W"]) + self.store["v.b"]
        return mean, ad.reshape(value, (-1,)), hidden

    def unroll(self, obs_seq: np.ndarray):
        """Re-run whole episodes ``obs_seq`` of shape ``(E, T, 2)`` from zero state.

        Returns per-step lists of mean and value tensors.
        """
        hidden = self.initial_state(obs_seq.shape[0])
        means, values = [], []
        for t in range(obs_seq.shape[1]):
            mean, value, hidden = self.step(obs_seq[:, t], hidden)
            means.append(mean)
            values.append(value)
        return means, values

    def combiners(self, a: np.ndarray) -> np.ndarray:
        if self.mode == "direct":
            return direct_map(a)
        return self.beam_module.combiners(a[..., 0], a[..., 1])

    @property
    def log_std(self) -> np.ndarray:
        return self.store["log_std"].value


def act(policy: PolicyNet, hidden, obs: np.ndarray, noise: np.ndarray | None):
    """Sample one action per row of ``obs``.

    ``noise`` holds standard-normal draws of shape ``(E, action_dim)``; pass
    ``None`` for the deterministic (mean) action. Returns
    ``(u, a, log_prob, value, new_hidden)`` as numpy arrays.
    """
    if obs.ndim != 2 or obs.shape[1] != 2:
        raise ValueError(f"observations must be (E, 2), got {obs.shape}")
    mean, value, hidden = policy.step(obs, hidden)
    mean, value = mean.value, value.value
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(value))):
        raise FloatingPointError("policy produced non-finite outputs")
    log_std = policy.log_std
    u = mean if noise is None else mean + np.exp(log_std) * noise
    a = squash(u, policy.mode)
    logp = gaussian_log_prob(u, mean, log_std) - squash_log_det(u, policy.mode)
    return u, a, logp, value, [h.value for h in hidden]


# ---------------------------------------------------------------- rollouts


@dataclass
class EpisodeTrace:
    obs: np.ndarray
    u: np.ndarray
    a: np.ndarray
    log_prob: np.ndarray
    value: np.ndarray
    reward: np.ndarray

    @property
    def terminal_return(self) -> float:
        return float(self.reward[-1])

    def __len__(self) -> int:
        return self.reward.size


@dataclass
class RolloutBatch:
    """Stacked traces; every array has leading shape ``(episodes, T)``."""

    obs: np.ndarray
    u: np.ndarray
    a: np.ndarray
    log_prob: np.ndarray
    value: np.ndarray
    reward: np.ndarray
    channels: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return self.reward.shape[0]

    def __getitem__(self, i: int) -> EpisodeTrace:
        return EpisodeTrace(self.obs[i], self.u[i], self.a[i], self.log_prob[i],
                            self.value[i], self.reward[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def terminal_rewards(self) -> np.ndarray:
        return self.reward[:, -1]

    @classmethod
    def concat(cls, parts: list["RolloutBatch"]) -> "RolloutBatch":
        keys = ("obs", "u", "a", "log_prob", "value", "reward")
        out = {k: np.concatenate([getattr(p, k) for p in parts]) for k in keys}
        return cls(**out, channels=[c for p in parts for c in p.channels])


def _rollout_chunk(policy, env_cfg, episode_ids, seed, stream, deterministic, combiner_hook):
    env = VectorEnv(env_cfg, stream)
    obs = env.reset(episode_ids)
    E, T = len(episode_ids), env_cfg.T
    noise_rngs = None if deterministic else [episode_rng(seed, STREAM_POLICY, e) for e in episode_ids]
    hidden = policy.initial_state(E)
    rec = {k: [] for k in ("obs", "u", "a", "log_prob", "value", "reward")}
    for t in range(T):
        noise = None
        if noise_rngs is not None:
            noise = np.stack([r.standard_normal(policy.action_dim) for r in noise_rngs])
        u, a, logp, value, hidden = act(policy, hidden, obs, noise)
        W = policy.combiners(a)
        if combiner_hook is not None:
            override = combiner_hook(t, env.H)
            if override is not None:
                W = override
        for k, v in zip(("obs", "u", "a", "log_prob", "value"), (obs, u, a, logp, value)):
            rec[k].append(v)
        obs, reward, _ = env.step(W)
        rec["reward"].append(reward)
    arrays = {k: np.stack(v, axis=1) for k, v in rec.items()}
    return RolloutBatch(**arrays, channels=env.channels)


def collect_rollouts(policy: PolicyNet, env_cfg: EnvConfig, n_episodes: int,
                     first_episode: int = 0, workers: int | None = None,
                     stream: int = STREAM_TRAIN, deterministic: bool = False,
                     combiner_hook=None) -> RolloutBatch:
    """Run ``n_episodes`` complete episodes against a frozen policy.

    Episode ``i`` uses environment stream ``(seed, stream, first_episode + i)``
    and its own policy-noise stream, so ``workers`` (the chunk size) does not
    change the result. ``combiner_hook(t, H)`` may return combiners that
    replace the policy's for step ``t`` (used for oracle checks).
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    chunk = n_episodes if workers is None else max(1, int(workers))
    ids = np.arange(first_episode, first_episode + n_episodes)
    parts = [
        _rollout_chunk(policy, env_cfg, ids[i:i + chunk], env_cfg.seed, stream,
                       deterministic, combiner_hook)
        for i in range(0, n_episodes, chunk)
    ]
    return parts[0] if len(parts) == 1 else RolloutBatch.concat(parts)


def compute_returns(batch: RolloutBatch, gamma: float = 1.0, normalize: bool = True):
    """Discounted returns-to-go and advantages ``return - value``.

    Advantages are standardised over the whole batch when ``normalize``.
    """
    rewards = batch.reward
    returns = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[0])
    for t in range(rewards.shape[1] - 1, -1, -1):
        running = rewards[:, t] + gamma * running
        returns[:, t] = running
    adv = returns - batch.value
    if normalize:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return returns, adv


# ---------------------------------------------------------------- update


def ppo_loss(policy: PolicyNet, obs, u, old_log_prob, advantages, returns, cfg: PpoConfig):
    """Total loss tensor plus its ``(policy, value, entropy)`` parts as floats.

    All array arguments have leading shape ``(episodes, T)``.
    """
    means, values = policy.unroll(obs)
    mean = ad.stack(means, axis=1)
    value = ad.stack(values, axis=1)
    log_std = policy.store["log_std"]
    z = (ad.Tensor(u) - mean) * ad.exp(-log_std)
    gauss = (-0.5 * ad.square(z) - log_std - 0.5 * LOG_2PI).sum(axis=-1)
    # squash correction does not depend on the parameters
    log_prob = gauss - squash_log_det(u, policy.mode)
    ratio = ad.exp(log_prob - old_log_prob)
    surrogate = ad.minimum(ratio * advantages,
                           ad.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantages)
    policy_loss = -surrogate.mean()
    value_loss = ad.square(value - returns).mean()
    entropy = (log_std + 0.5 * (LOG_2PI + 1.0)).sum()
    total = policy_loss + cfg.vf_coef * value_loss - cfg.ent_coef * entropy
    parts = (float(policy_loss.value), float(value_loss.value), float(entropy.value))
    return total, parts, ratio


@dataclass
class UpdateStats:
    mean_reward: float
    policy_loss: float
    value_loss: float
    entropy: float
    grad_norm: float


def ppo_update(policy: PolicyNet, opt: Adam, batch: RolloutBatch, cfg: PpoConfig,
               rng: np.random.Generator) -> UpdateStats:
    """Several epochs of minibatched clipped-surrogate updates on ``batch``."""
    if len(batch) == 0:
        raise ValueError("empty rollout batch")
    returns, adv = compute_returns(batch, cfg.gamma)
    E = len(batch)
    mb = min(cfg.minibatch_episodes, E)
    sums = np.zeros(4)
    count = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(E)
        for start in range(0, E, mb):
            idx = order[start:start + mb]
            policy.store.zero_grad()
            with Tape() as tape:
                loss, parts, _ = ppo_loss(policy, batch.obs[idx], batch.u[idx],
                                          batch.log_prob[idx], adv[idx], returns[idx], cfg)
            if not np.isfinite(loss.value):
                raise FloatingPointError(
                    f"non-finite PPO loss (policy, value, entropy) = {parts}; "
                    f"log_std range [{policy.log_std.min():.3g}, {policy.log_std.max():.3g}]")
            tape.backward(loss)
            grads, norm = clip_global_norm(policy.store.grads(), cfg.max_grad_norm)
            opt.step(grads)
            sums += (*parts, norm)
            count += 1
    p, v, e, g = sums / count
    return UpdateStats(float(batch.terminal_rewards.mean()), p, v, e, g)


class PpoTrainer:
    """Owns a policy, its optimiser and the update counter."""

    def __init__(self, policy: PolicyNet, env_cfg: EnvConfig, cfg: PpoConfig):
        self.policy = policy
        self.env_cfg = env_cfg
        self.cfg = cfg
        self.opt = Adam(policy.store, lr=cfg.lr)
        self.update_index = 0

    def train_step(self) -> UpdateStats:
        n = self.cfg.batch_episodes
        batch = collect_rollouts(self.policy, self.env_cfg, n,
                                 first_episode=self.update_index * n, workers=self.cfg.workers)
        rng = episode_rng(self.env_cfg.seed, STREAM_POLICY + 1, self.update_index)
        stats = ppo_update(self.policy, self.opt, batch, self.cfg, rng)
        self.update_index += 1
        return stats
