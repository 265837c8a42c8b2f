"""Proximal policy optimization over full-control drive protocols.

The agent proposes one row of site potentials per time step; the
observation is the protocol history so far (potentials in units of P_max,
step end times in units of T), zero-padded to full length.  Reward is paid
once, at the end of the episode, as the chosen measure of the final state.

Internally the policy works in normalized action units where the clamp
range is [-1, 1]; stored transitions carry physical potentials.  All loss
gradients are exact backpropagation, checked against finite differences in
the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .engine import MEASURE_CERTIFICATION, MEASURE_FIDELITY
from .errors import ConvergenceError, NonFiniteError
from .evolution import StateVector, evolve
from .nn import AdamState, PolicyValueNet, adam_step
from .schedule import PotentialSchedule
from .targets import (
    TargetSpec,
    certification_measure,
    fidelity,
    make_target,
    mode_number_squares,
)

CHECKPOINT_VERSION = 1
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PpoConfig:
    """Trainer hyperparameters; the physics lives in the environment."""

    gamma: float = 0.99
    eps_clip: float = 0.1
    c_v: float = 0.5
    c_s: float = 0.02
    alpha: float = 2e-4
    n_hidden: int = 200
    n_episodes: int = 120_000
    batch: int = 500
    buffer_len: int | None = None  # default: 500 transitions per protocol step
    sigma_init: float = 0.5
    seed: int = 0
    stop_measure: float | None = None  # stop early once the best reaches this

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.eps_clip <= 0:
            raise ValueError(f"eps_clip must be positive, got {self.eps_clip}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.c_v < 0 or self.c_s < 0:
            raise ValueError("loss coefficients must be non-negative")
        if self.n_hidden < 1 or self.n_episodes < 1 or self.batch < 1:
            raise ValueError("n_hidden, n_episodes and batch must be positive")
        if self.buffer_len is not None and self.batch > self.buffer_len:
            raise ValueError(
                f"batch {self.batch} exceeds buffer_len {self.buffer_len}"
            )
        if self.sigma_init <= 0:
            raise ValueError(f"sigma_init must be positive, got {self.sigma_init}")


@dataclass(frozen=True)
class Transition:
    """One environment step: (s_t, a_t, r_t, s_{t+1}, terminal)."""

    obs: np.ndarray
    action: np.ndarray  # physical potentials, already clamped to |a| <= P_max
    reward: float
    next_obs: np.ndarray
    terminal: bool


class ControlEnv:
    """Episode environment: N_T rows of potentials, reward at the end.

    `measures` selects which final-state observables to evaluate
    ("fidelity", "certification", or both); `reward_measure` picks the one
    paid as reward, defaulting to fidelity when available.
    """

    def __init__(
        self,
        system,
        target: TargetSpec,
        n_steps: int,
        duration: float,
        p_max: float,
        measures: tuple[str, ...] = (MEASURE_FIDELITY,),
        reward_measure: str | None = None,
        initial: StateVector | None = None,
    ):
        if n_steps < 1:
            raise ValueError(f"need at least one protocol step, got {n_steps}")
        if duration <= 0:
            raise ValueError(f"duration must be positive, got {duration}")
        if p_max <= 0:
            raise ValueError(f"p_max must be positive, got {p_max}")
        known = {MEASURE_FIDELITY, MEASURE_CERTIFICATION}
        if not measures or set(measures) - known:
            raise ValueError(f"unsupported measures {measures}")
        if reward_measure is None:
            reward_measure = (
                MEASURE_FIDELITY if MEASURE_FIDELITY in measures else measures[0]
            )
        if reward_measure not in measures:
            raise ValueError(
                f"reward measure {reward_measure!r} not among {measures}"
            )
        self.system = system
        self.target = target
        self.n_steps = int(n_steps)
        self.duration = float(duration)
        self.p_max = float(p_max)
        self.measures = tuple(measures)
        self.reward_measure = reward_measure
        self.dt = self.duration / self.n_steps
        self.target_state = make_target(target, system)
        self.mode_ops = (
            mode_number_squares(system.basis, target.windings)
            if MEASURE_CERTIFICATION in measures
            else None
        )
        self.initial = system.ground_state()[1] if initial is None else initial

    @property
    def sites(self) -> int:
        return self.system.sites

    @property
    def obs_dim(self) -> int:
        return (self.sites + 1) * self.n_steps

    def run(self, rows: np.ndarray) -> dict[str, float]:
        """Final-state measures for a full set of potential rows."""
        psi = self.initial
        for row in rows:
            psi = evolve(psi, self.system.hamiltonian(row), self.dt)
        out = {}
        if MEASURE_FIDELITY in self.measures:
            out[MEASURE_FIDELITY] = fidelity(psi, self.target_state)
        if MEASURE_CERTIFICATION in self.measures:
            out[MEASURE_CERTIFICATION] = certification_measure(
                psi, self.target.windings, self.mode_ops
            )
        return out


def encode_observation(
    rows, n_steps: int, sites: int, p_max: float, duration: float
) -> np.ndarray:
    """Protocol history as a flat vector of length (sites+1)*n_steps.

    Block k holds the potentials of step k in units of p_max followed by
    the step's end time in units of duration; unplayed steps stay zero.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float)) if len(rows) else \
        np.zeros((0, sites))
    n = rows.shape[0]
    if n > n_steps or (n and rows.shape[1] != sites):
        raise ValueError(
            f"history shape {rows.shape} incompatible with "
            f"{n_steps} steps x {sites} sites"
        )
    obs = np.zeros((sites + 1) * n_steps)
    for k in range(n):
        base = k * (sites + 1)
        obs[base : base + sites] = rows[k] / p_max
        obs[base + sites] = (k + 1) * (duration / n_steps) / duration
    return obs


def gaussian_logp(actions: np.ndarray, means: np.ndarray, sigma: float) -> float:
    """Log density of an isotropic Gaussian, in normalized action units."""
    diff = np.asarray(actions, float) - np.asarray(means, float)
    n = diff.size
    return float(
        -0.5 * n * _LOG_2PI - n * math.log(sigma)
        - float(diff @ diff) / (2.0 * sigma * sigma)
    )


def policy_sample(
    net: PolicyValueNet, obs: np.ndarray, rng: np.random.Generator, p_max: float
) -> tuple[np.ndarray, float]:
    """Sample one action; returns (clamped physical action, pre-clamp logp)."""
    _, means, _ = net.forward(obs[None, :])
    mu = means[0]
    sigma = net.sigma
    raw = mu + sigma * rng.standard_normal(mu.shape[0])
    logp = gaussian_logp(raw, mu, sigma)
    action = p_max * np.clip(raw, -1.0, 1.0)
    return action, logp


def rollout(
    net: PolicyValueNet, env: ControlEnv, rng: np.random.Generator
) -> tuple[list[Transition], PotentialSchedule, dict[str, float]]:
    """One episode: sample all steps, score the final state once."""
    sites, n = env.sites, env.n_steps
    obs = np.zeros(env.obs_dim)
    rows = np.zeros((n, sites))
    obs_seq = [obs]
    for t in range(n):
        action, _ = policy_sample(net, obs, rng, env.p_max)
        rows[t] = action
        nxt = obs.copy()
        base = t * (sites + 1)
        nxt[base : base + sites] = action / env.p_max
        nxt[base + sites] = (t + 1) / n
        obs_seq.append(nxt)
        obs = nxt
    measures = env.run(rows)
    final_reward = measures[env.reward_measure]
    transitions = [
        Transition(
            obs=obs_seq[t],
            action=rows[t].copy(),
            reward=final_reward if t == n - 1 else 0.0,
            next_obs=obs_seq[t + 1],
            terminal=(t == n - 1),
        )
        for t in range(n)
    ]
    schedule = PotentialSchedule(potentials=rows, dt=env.dt, p_max=env.p_max)
    return transitions, schedule, measures


def advantage(
    reward: float, value: float, next_value: float, terminal: bool, gamma: float
) -> float:
    """A = r + gamma * V(s') * (0 if terminal else 1) - V(s)."""
    return reward + (0.0 if terminal else gamma * next_value) - value


def regression_target(
    reward: float, next_value: float, terminal: bool, gamma: float
) -> float:
    """y = r + gamma * V(s') * (0 if terminal else 1)."""
    return reward + (0.0 if terminal else gamma * next_value)


class ReplayBuffer:
    """Fixed-capacity ring of transitions stored column-wise."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.terminals = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.head = 0

    def extend(self, transitions) -> None:
        for tr in transitions:
            i = self.head
            self.obs[i] = tr.obs
            self.actions[i] = tr.action
            self.rewards[i] = tr.reward
            self.next_obs[i] = tr.next_obs
            self.terminals[i] = tr.terminal
            self.head = (i + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, rng: np.random.Generator, batch: int) -> np.ndarray:
        """Uniform with replacement over the stored transitions."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=batch)


@dataclass
class Minibatch:
    """Update inputs; actions and advantages are treated as constants."""

    obs: np.ndarray        # (B, obs_dim)
    actions: np.ndarray    # (B, L) in normalized units (physical / p_max)
    advantages: np.ndarray  # (B,)
    targets: np.ndarray    # (B,) value regression targets


def ppo_loss(
    net: PolicyValueNet,
    old_net: PolicyValueNet,
    batch: Minibatch,
    c_v: float,
    c_s: float,
    eps_clip: float,
    with_aux: bool = False,
):
    """Scalar loss to minimize and its exact gradients.

    loss = -L_p + c_v * L_V - c_s * L_S with the clipped surrogate
    L_p = mean(min(b A, clip(b, 1-eps, 1+eps) A)), b the density ratio of
    the current to the snapshot policy at the stored action, L_V the value
    regression error and L_S the exact Gaussian entropy.
    """
    n_batch = batch.obs.shape[0]
    if n_batch == 0:
        raise ValueError("minibatch is empty")
    values, means, cache = net.forward(batch.obs)
    log_sigma = float(net.params["log_sigma"])
    sigma2 = math.exp(2.0 * log_sigma)
    n_act = means.shape[1]

    diff = batch.actions - means
    sq = np.sum(diff * diff, axis=1)
    logp = -0.5 * n_act * _LOG_2PI - n_act * log_sigma - sq / (2.0 * sigma2)

    _, means_old, _ = old_net.forward(batch.obs)
    log_sigma_old = float(old_net.params["log_sigma"])
    diff_old = batch.actions - means_old
    sq_old = np.sum(diff_old * diff_old, axis=1)
    logp_old = (
        -0.5 * n_act * _LOG_2PI
        - n_act * log_sigma_old
        - sq_old / (2.0 * math.exp(2.0 * log_sigma_old))
    )

    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - eps_clip, 1.0 + eps_clip)
    adv = batch.advantages
    term_plain = ratio * adv
    term_clip = clipped * adv
    surrogate = np.minimum(term_plain, term_clip)
    loss_policy = float(np.mean(surrogate))

    residual = values - batch.targets
    loss_value = float(np.mean(residual * residual))
    entropy = n_act * (0.5 * (_LOG_2PI + 1.0) + log_sigma)
    loss = -loss_policy + c_v * loss_value - c_s * entropy

    # d loss / d logp_t: only the unclipped branch carries gradient; ties
    # resolve to it, where both branches have equal slope anyway.
    plain_selected = term_plain <= term_clip
    d_logp = np.where(plain_selected, ratio * adv, 0.0) / n_batch
    d_logp = -d_logp  # loss carries -L_p

    d_means = d_logp[:, None] * (diff / sigma2)
    d_values = c_v * 2.0 * residual / n_batch
    grads = net.backward(cache, d_values, d_means)
    d_logsigma_policy = float(np.sum(d_logp * (-n_act + sq / sigma2)))
    grads["log_sigma"] = np.array(d_logsigma_policy - c_s * n_act)

    if not math.isfinite(loss) or any(
        not np.all(np.isfinite(g)) for g in grads.values()
    ):
        raise NonFiniteError("non-finite loss or gradient in policy update")
    if with_aux:
        aux = {
            "ratio": ratio,
            "clipped": clipped,
            "plain_selected": plain_selected,
            "loss_policy": loss_policy,
            "loss_value": loss_value,
            "entropy": entropy,
        }
        return loss, grads, aux
    return loss, grads


@dataclass
class TrainLog:
    """Per-episode learning record; running best is non-decreasing."""

    episodes: np.ndarray
    measures: np.ndarray
    running_best: np.ndarray
    fidelities: np.ndarray
    certifications: np.ndarray
    sigmas: np.ndarray
    policy_losses: np.ndarray
    value_losses: np.ndarray
    entropies: np.ndarray
    best_schedule: PotentialSchedule | None
    best_episode: int
    best_measure: float
    aborted: bool
    failed_episodes: np.ndarray


class PpoTrainer:
    """Sequential, fully seeded training loop with checkpoint/resume.

    One optimization step runs per environment step: a batch is drawn from
    the replay buffer (uniform with replacement, once anything is stored),
    advantages are computed with the current value head, and a single Adam
    step is applied to the joint clipped-surrogate / value / entropy loss.
    The policy snapshot used in the density ratio is refreshed at the start
    of every episode, and the episode's transitions enter the buffer at the
    episode's end.
    """

    def __init__(self, env: ControlEnv, config: PpoConfig, episode_callback=None):
        self.env = env
        self.config = config
        self.buffer_len = (
            config.buffer_len
            if config.buffer_len is not None
            else 500 * env.n_steps
        )
        if config.batch > self.buffer_len:
            raise ValueError(
                f"batch {config.batch} exceeds buffer length {self.buffer_len}"
            )
        self.episode_callback = episode_callback
        self.rng = np.random.default_rng(config.seed)
        self.net = PolicyValueNet(
            env.obs_dim, env.sites, config.n_hidden, config.sigma_init, self.rng
        )
        self.adam = AdamState.for_params(self.net.params)
        self.buffer = ReplayBuffer(self.buffer_len, env.obs_dim, env.sites)
        self.episode = 0
        self.best_measure = -math.inf
        self.best_schedule: PotentialSchedule | None = None
        self.best_episode = -1
        self.aborted = False
        self._rows: dict[str, list] = {
            "measures": [], "running_best": [], "fidelities": [],
            "certifications": [], "sigmas": [], "policy_losses": [],
            "value_losses": [], "entropies": [],
        }
        self._episode_index: list[int] = []
        self._failed: list[int] = []

    def _update_once(self, old_net: PolicyValueNet, stats: list) -> None:
        cfg = self.config
        idx = self.buffer.sample_indices(self.rng, cfg.batch)
        obs = self.buffer.obs[idx]
        next_obs = self.buffer.next_obs[idx]
        rewards = self.buffer.rewards[idx]
        terminals = self.buffer.terminals[idx]
        v_s = self.net.forward(obs)[0]
        v_next = self.net.forward(next_obs)[0]
        cont = np.where(terminals, 0.0, cfg.gamma)
        targets = rewards + cont * v_next
        advantages = targets - v_s
        batch = Minibatch(
            obs=obs,
            actions=self.buffer.actions[idx] / self.env.p_max,
            advantages=advantages,
            targets=targets,
        )
        _, grads, aux = ppo_loss(
            self.net, old_net, batch, cfg.c_v, cfg.c_s, cfg.eps_clip, with_aux=True
        )
        adam_step(self.net.params, grads, self.adam, cfg.alpha)
        stats.append((aux["loss_policy"], aux["loss_value"], aux["entropy"]))

    def _log_episode(self, measures: dict, stats: list) -> None:
        row = self._rows
        self._episode_index.append(self.episode)
        fid = measures.get(MEASURE_FIDELITY, math.nan)
        cert = measures.get(MEASURE_CERTIFICATION, math.nan)
        score = measures[self.env.reward_measure]
        row["measures"].append(score)
        row["running_best"].append(self.best_measure)
        row["fidelities"].append(fid)
        row["certifications"].append(cert)
        row["sigmas"].append(self.net.sigma)
        if stats:
            arr = np.asarray(stats)
            row["policy_losses"].append(float(arr[:, 0].mean()))
            row["value_losses"].append(float(arr[:, 1].mean()))
            row["entropies"].append(float(arr[:, 2].mean()))
        else:
            row["policy_losses"].append(math.nan)
            row["value_losses"].append(math.nan)
            row["entropies"].append(math.nan)
        if self.episode_callback is not None:
            self.episode_callback(
                {
                    "episode": self.episode,
                    "measure": score,
                    "best": self.best_measure,
                    "fidelity": fid,
                    "certification": cert,
                    "sigma": row["sigmas"][-1],
                }
            )

    def train(self, n_episodes: int | None = None) -> TrainLog:
        """Run episodes up to a total count (defaults to the configured N_E).

        A non-finite loss or gradient aborts training; the partial log
        remains available via `snapshot_log` and on the raised error.
        """
        cfg = self.config
        total = cfg.n_episodes if n_episodes is None else n_episodes
        while self.episode < total:
            old_net = self.net.clone()
            try:
                transitions, schedule, measures = rollout(self.net, self.env, self.rng)
            except ConvergenceError:
                self._failed.append(self.episode)
                self.episode += 1
                continue
            stats: list = []
            try:
                if self.buffer.size > 0:
                    for _ in transitions:
                        self._update_once(old_net, stats)
            except NonFiniteError as exc:
                self.aborted = True
                exc.partial_log = self.snapshot_log()  # type: ignore[attr-defined]
                raise
            self.buffer.extend(transitions)
            score = measures[self.env.reward_measure]
            if score > self.best_measure:
                self.best_measure = score
                self.best_schedule = schedule
                self.best_episode = self.episode
            self._log_episode(measures, stats)
            self.episode += 1
            if cfg.stop_measure is not None and self.best_measure >= cfg.stop_measure:
                break
        return self.snapshot_log()

    def snapshot_log(self) -> TrainLog:
        row = self._rows
        return TrainLog(
            episodes=np.asarray(self._episode_index, dtype=int),
            measures=np.asarray(row["measures"]),
            running_best=np.asarray(row["running_best"]),
            fidelities=np.asarray(row["fidelities"]),
            certifications=np.asarray(row["certifications"]),
            sigmas=np.asarray(row["sigmas"]),
            policy_losses=np.asarray(row["policy_losses"]),
            value_losses=np.asarray(row["value_losses"]),
            entropies=np.asarray(row["entropies"]),
            best_schedule=self.best_schedule,
            best_episode=self.best_episode,
            best_measure=self.best_measure,
            aborted=self.aborted,
            failed_episodes=np.asarray(self._failed, dtype=int),
        )

    # -- checkpointing ----------------------------------------------------

    def save_checkpoint(self, path) -> None:
        """Full trainer state; a resumed run continues bit-identically."""
        payload: dict[str, np.ndarray] = {
            "version": np.array(CHECKPOINT_VERSION),
            "episode": np.array(self.episode),
            "adam_t": np.array(self.adam.t),
            "buffer_size": np.array(self.buffer.size),
            "buffer_head": np.array(self.buffer.head),
            "buffer_obs": self.buffer.obs,
            "buffer_actions": self.buffer.actions,
            "buffer_rewards": self.buffer.rewards,
            "buffer_next_obs": self.buffer.next_obs,
            "buffer_terminals": self.buffer.terminals,
            "rng_state": np.array(json.dumps(self.rng.bit_generator.state)),
            "config": np.array(json.dumps(asdict(self.config))),
            "best_measure": np.array(self.best_measure),
            "best_episode": np.array(self.best_episode),
            "aborted": np.array(self.aborted),
            "failed": np.asarray(self._failed, dtype=int),
            "episode_index": np.asarray(self._episode_index, dtype=int),
        }
        for name, value in self.net.params.items():
            payload[f"param_{name}"] = value
            payload[f"adam_m_{name}"] = self.adam.m[name]
            payload[f"adam_v_{name}"] = self.adam.v[name]
        for name, values in self._rows.items():
            payload[f"log_{name}"] = np.asarray(values)
        if self.best_schedule is not None:
            payload["best_potentials"] = self.best_schedule.potentials
            payload["best_dt"] = np.array(self.best_schedule.dt)
            payload["best_p_max"] = np.array(self.best_schedule.p_max)
        np.savez(path, **payload)

    @classmethod
    def load_checkpoint(cls, path, env: ControlEnv, episode_callback=None):
        """Rebuild a trainer from a checkpoint produced on the same problem."""
        with np.load(path, allow_pickle=False) as data:
            version = int(data["version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            config = PpoConfig(**_config_from_json(str(data["config"])))
            trainer = cls(env, config, episode_callback=episode_callback)
            for name in trainer.net.params:
                trainer.net.params[name] = data[f"param_{name}"].copy()
                trainer.adam.m[name] = data[f"adam_m_{name}"].copy()
                trainer.adam.v[name] = data[f"adam_v_{name}"].copy()
            trainer.adam.t = int(data["adam_t"])
            buf = trainer.buffer
            if buf.obs.shape != data["buffer_obs"].shape:
                raise ValueError("checkpoint buffer does not match environment")
            buf.obs = data["buffer_obs"].copy()
            buf.actions = data["buffer_actions"].copy()
            buf.rewards = data["buffer_rewards"].copy()
            buf.next_obs = data["buffer_next_obs"].copy()
            buf.terminals = data["buffer_terminals"].copy()
            buf.size = int(data["buffer_size"])
            buf.head = int(data["buffer_head"])
            trainer.rng.bit_generator.state = json.loads(str(data["rng_state"]))
            trainer.episode = int(data["episode"])
            trainer.best_measure = float(data["best_measure"])
            trainer.best_episode = int(data["best_episode"])
            trainer.aborted = bool(data["aborted"])
            trainer._failed = [int(i) for i in data["failed"]]
            trainer._episode_index = [int(i) for i in data["episode_index"]]
            for name in trainer._rows:
                trainer._rows[name] = [float(x) for x in data[f"log_{name}"]]
            if "best_potentials" in data:
                trainer.best_schedule = PotentialSchedule(
                    potentials=data["best_potentials"].copy(),
                    dt=float(data["best_dt"]),
                    p_max=float(data["best_p_max"]),
                )
        return trainer


def _config_from_json(text: str) -> dict:
    raw = json.loads(text)
    return {k: v for k, v in raw.items()}
