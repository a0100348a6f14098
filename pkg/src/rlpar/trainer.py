"""Deep Q-learning over attribute groups, one independent agent per group.

Each epoch visits every training image in a seeded shuffled order and plays
one episode per group: a step per attribute, epsilon-greedy actions, one
stored transition per step and one Adam update per step once the replay
memory holds a full minibatch.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mdp
from .dataio import Dataset, FeatureScaler, read_keyvalue
from .errors import CheckpointError, DegenerateGroupError, ValidationError
from .metrics import evaluate
from .qnet import (
    HIDDEN, AdamState, CheckpointMeta, QNetwork, adam_step, forward, init_network,
    load_checkpoint, save_checkpoint, sync_target, td_loss_and_gradients,
)
from .replay import ReplayMemory
from .schema import AttributeSchema, GroupConfig, GroupStats, compute_group_stats, load_group_config

log = logging.getLogger(__name__)

REWARD_MODES = ("basic", "gor")
MODEL_FORMAT = "rlpar-model/1"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    replay_capacity: int = 2000
    target_update: int = 100
    batch_size: int = 64
    gamma: float = 0.9
    eps_start: float = 0.9
    eps_end: float = 0.05
    lr: float = 1e-4
    reward_mode: str = "basic"
    seed: int = 0
    hidden: tuple[int, int] = HIDDEN
    # forces one reward magnitude for every group in gor mode (rho sweeps)
    rho_override: float | None = None
    standardize: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        for name in ("replay_capacity", "target_update", "batch_size", "workers"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.batch_size > self.replay_capacity:
            raise ValidationError("batch size exceeds replay capacity")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError("gamma must lie in [0, 1]")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ValidationError("need 0 <= eps_end <= eps_start <= 1")
        if self.reward_mode not in REWARD_MODES:
            raise ValidationError(f"reward mode must be one of {REWARD_MODES}")
        if self.rho_override is not None and not 0.0 < self.rho_override <= 1.0:
            raise ValidationError("rho override must lie in (0, 1]")
        if not self.lr > 0:
            raise ValidationError("learning rate must be positive")


def epsilon_at(global_step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear decay from ``eps_start`` at step 0 to ``eps_end`` at ``total_steps``."""
    if total_steps < 1:
        raise ValueError("total_steps must be positive")
    if global_step <= 0:
        return cfg.eps_start
    if global_step >= total_steps:
        return cfg.eps_end
    frac = global_step / total_steps
    eps = (1.0 - frac) * cfg.eps_start + frac * cfg.eps_end
    return min(max(eps, cfg.eps_end), cfg.eps_start)


def greedy_action(q: np.ndarray) -> int:
    """Argmax over the two Q-values; ties go to 0 (attribute absent)."""
    return 1 if q[1] > q[0] else 0


def select_action(net: QNetwork, state_vec: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(2))
    return greedy_action(forward(net, state_vec))


def td_target(r: float, done: bool, target_q_next, gamma: float) -> float:
    if done:
        return float(r)
    return float(r + gamma * np.max(target_q_next))


def td_targets(rewards: np.ndarray, dones: np.ndarray, target_q_next: np.ndarray, gamma: float) -> np.ndarray:
    """Vectorised :func:`td_target`; rows with ``done`` ignore ``target_q_next``."""
    return np.where(dones, rewards, rewards + gamma * target_q_next.max(axis=1))


@dataclass(eq=False)
class GroupAgent:
    group: int
    name: str
    attrs: tuple[int, ...]
    policy: QNetwork
    target: QNetwork
    opt: AdamState
    memory: ReplayMemory | None
    stats: GroupStats | None
    rho: float | None
    rng: np.random.Generator | None = None
    env_steps: int = 0
    opt_steps: int = 0
    syncs: int = 0

    @property
    def T(self) -> int:
        return len(self.attrs)

    def optimize(self, cfg: TrainConfig) -> float:
        """Sample a minibatch, regress onto TD targets, maybe sync the target net."""
        batch = self.memory.sample_batch(cfg.batch_size, self.rng)
        q_next = forward(self.target, batch.next_states)
        y = td_targets(batch.rewards, batch.dones, q_next, cfg.gamma)
        loss, grads = td_loss_and_gradients(self.policy, batch.states, batch.actions, y)
        adam_step(self.policy, grads, self.opt)
        self.opt_steps += 1
        if self.opt_steps % cfg.target_update == 0:
            self.target = sync_target(self.policy)
            self.syncs += 1
        return loss


def group_stream(seed: int, group: int) -> np.random.Generator:
    """Independent RNG stream for one group agent."""
    return np.random.default_rng([seed, 1, group])


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Image visiting order for an epoch; shared by all groups."""
    return np.random.default_rng([seed, 0, epoch]).permutation(n)


def predict_group(net: QNetwork, features: np.ndarray, attrs, L: int) -> np.ndarray:
    """Greedy actions of one group for a batch of (scaled) feature rows, shape (N, T)."""
    contexts = mdp.context_table(attrs, L)
    n = features.shape[0]
    out = np.zeros((n, len(attrs)), dtype=np.uint8)
    for t in range(len(attrs)):
        states = np.hstack([features, np.broadcast_to(contexts[t], (n, contexts.shape[1]))])
        q = forward(net, states)
        out[:, t] = q[:, 1] > q[:, 0]
    return out


@dataclass
class EpochRecord:
    epoch: int
    group: int
    name: str
    env_steps: int
    opt_steps: int
    syncs: int
    mean_loss: float
    mean_reward: float
    mA: float
    acc: float
    prec: float
    rec: float
    f1: float

    def summary_line(self) -> str:
        return (
            f"epoch={self.epoch} group={self.group} name={self.name} env_steps={self.env_steps} "
            f"opt_steps={self.opt_steps} syncs={self.syncs} mean_loss={self.mean_loss!r} "
            f"mean_reward={self.mean_reward!r} mA={self.mA!r} Acc={self.acc!r} Prec={self.prec!r} "
            f"Rec={self.rec!r} F1={self.f1!r}"
        )

    def log_line(self) -> str:
        return (
            f"[epoch {self.epoch:3d}] group {self.group} ({self.name}): loss {self.mean_loss:.6f} "
            f"reward {self.mean_reward:+.4f} mA {self.mA:.4f} Acc {self.acc:.4f} F1 {self.f1:.4f} "
            f"(opt steps {self.opt_steps}, syncs {self.syncs})"
        )


@dataclass
class TrainingReport:
    records: list[EpochRecord] = field(default_factory=list)

    def __bool__(self):
        return bool(self.records)

    def for_group(self, g: int) -> list[EpochRecord]:
        return [r for r in self.records if r.group == g]

    def log_text(self) -> str:
        return "".join(r.log_line() + "\n" for r in self.records)

    def summary_text(self) -> str:
        return "".join(r.summary_line() + "\n" for r in self.records)

    @classmethod
    def parse_summary(cls, text: str) -> "TrainingReport":
        records = []
        for line in text.splitlines():
            if not line.strip():
                continue
            kv = dict(item.split("=", 1) for item in line.split())
            records.append(EpochRecord(
                epoch=int(kv["epoch"]), group=int(kv["group"]), name=kv["name"],
                env_steps=int(kv["env_steps"]), opt_steps=int(kv["opt_steps"]), syncs=int(kv["syncs"]),
                mean_loss=float(kv["mean_loss"]), mean_reward=float(kv["mean_reward"]),
                mA=float(kv["mA"]), acc=float(kv["Acc"]), prec=float(kv["Prec"]),
                rec=float(kv["Rec"]), f1=float(kv["F1"]),
            ))
        return cls(records)


def _group_stats_or_none(labels, attrs, required: bool) -> GroupStats | None:
    try:
        return compute_group_stats(labels, attrs)
    except (DegenerateGroupError, ValueError):
        if required:
            raise
        return None


def _train_group(g: int, name: str, attrs: tuple[int, ...], X: np.ndarray, labels: np.ndarray,
                 L: int, cfg: TrainConfig) -> tuple[GroupAgent, list[EpochRecord]]:
    N, F = X.shape
    d_in = F + mdp.CONTEXT_SLOTS * L
    rng = group_stream(cfg.seed, g)
    policy = init_network(d_in, rng, hidden=cfg.hidden)
    gor = cfg.reward_mode == "gor"
    stats = _group_stats_or_none(labels, attrs, required=gor and cfg.rho_override is None)
    rho = (cfg.rho_override if cfg.rho_override is not None else stats.rho) if gor else None
    agent = GroupAgent(
        group=g, name=name, attrs=attrs, policy=policy, target=sync_target(policy),
        opt=AdamState.for_network(policy, lr=cfg.lr), memory=ReplayMemory(cfg.replay_capacity, d_in),
        stats=stats, rho=rho, rng=rng,
    )
    total = max(cfg.epochs * N * agent.T, 1)
    records = []
    group_labels = labels[:, list(attrs)]
    for epoch in range(cfg.epochs):
        losses, rewards = [], []
        for i in epoch_order(cfg.seed, epoch, N):
            state = mdp.init_episode(X[i], attrs, L, group_id=g, image=int(i))
            s_vec = state.vector()
            while True:
                eps = epsilon_at(agent.env_steps, total, cfg)
                a = select_action(agent.policy, s_vec, eps, agent.rng)
                out = mdp.step(state, a, int(labels[i, state.attribute]), rho)
                next_vec = None if out.done else out.next_state.vector()
                agent.memory.push_arrays(s_vec, a, out.reward, next_vec, out.done)
                agent.env_steps += 1
                rewards.append(out.reward)
                if len(agent.memory) >= cfg.batch_size:
                    losses.append(agent.optimize(cfg))
                if out.done:
                    break
                state, s_vec = out.next_state, next_vec
        pred = predict_group(agent.policy, X, attrs, L)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = evaluate(group_labels, pred)
        rec = EpochRecord(
            epoch=epoch + 1, group=g, name=name, env_steps=agent.env_steps, opt_steps=agent.opt_steps,
            syncs=agent.syncs, mean_loss=float(np.mean(losses)) if losses else float("nan"),
            mean_reward=float(np.mean(rewards)), mA=m.mA, acc=m.acc, prec=m.prec, rec=m.rec, f1=m.f1,
        )
        log.info(rec.log_line())
        records.append(rec)
    return agent, records


@dataclass(eq=False)
class TrainedModel:
    """Per-group agents plus what is needed to run them on new data."""

    schema: AttributeSchema
    groups: GroupConfig
    scaler: FeatureScaler
    agents: list[GroupAgent]
    n_features: int
    reward_mode: str = "basic"

    @property
    def d_in(self) -> int:
        return self.n_features + mdp.CONTEXT_SLOTS * self.schema.L

    def _scaled(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[1] != self.n_features:
            raise ValidationError(f"feature dimension {features.shape[1]} does not match model F={self.n_features}")
        return self.scaler.transform(features)

    def _check_agents(self):
        if len(self.agents) != len(self.groups):
            raise ValidationError(f"model has {len(self.agents)} agents for {len(self.groups)} groups")

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Greedy label matrix for a batch of raw feature rows."""
        self._check_agents()
        X = self._scaled(features)
        out = np.zeros((X.shape[0], self.schema.L), dtype=np.uint8)
        for agent in self.agents:
            out[:, list(agent.attrs)] = predict_group(agent.policy, X, agent.attrs, self.schema.L)
        return out

    def predict_dataset(self, ds: Dataset) -> np.ndarray:
        if ds.names != self.schema.names:
            raise ValidationError("dataset attributes do not match the model schema")
        return self.predict(ds.features)

    def save(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "groups.txt").write_text(self.groups.to_text(self.schema))
        lines = [
            f"format = {MODEL_FORMAT}",
            f"attributes = {', '.join(self.schema.names)}",
            f"F = {self.n_features}",
            f"L = {self.schema.L}",
            f"reward_mode = {self.reward_mode}",
            "groups = groups.txt",
            f"feature_mean = {' '.join(repr(float(x)) for x in self.scaler.mean)}",
            f"feature_std = {' '.join(repr(float(x)) for x in self.scaler.std)}",
        ]
        for agent in self.agents:
            fname = f"group_{agent.group:02d}.grlq"
            meta = CheckpointMeta(self.n_features, self.schema.L, agent.group, agent.opt_steps, self.schema.digest())
            (d / fname).write_bytes(save_checkpoint(agent.policy, agent.opt, meta))
            lines.append(
                f"group.{agent.group} = {fname} env_steps={agent.env_steps} syncs={agent.syncs} rho={agent.rho!r}"
            )
        (d / "model.manifest").write_text("\n".join(lines) + "\n")
        return d

    @classmethod
    def load(cls, directory: str | Path) -> "TrainedModel":
        d = Path(directory)
        path = d / "model.manifest"
        if not path.is_file():
            raise CheckpointError(f"no model.manifest in {d}")
        meta = read_keyvalue(path)
        if meta.get("format") != MODEL_FORMAT:
            raise CheckpointError(f"{path}: unsupported model format {meta.get('format')!r}")
        schema = AttributeSchema(tuple(a.strip() for a in meta["attributes"].split(",")))
        groups = load_group_config((d / meta["groups"]).read_text(), schema)
        F = int(meta["F"])
        scaler = FeatureScaler(np.array([float(x) for x in meta["feature_mean"].split()]),
                               np.array([float(x) for x in meta["feature_std"].split()]))
        agents = []
        for g, (name, attrs) in enumerate(groups.groups):
            key = f"group.{g}"
            if key not in meta:
                raise CheckpointError(f"{path}: no checkpoint listed for group {g} ({name})")
            fname, *extras = meta[key].split()
            extra = dict(e.split("=", 1) for e in extras)
            net, opt, cmeta = load_checkpoint((d / fname).read_bytes(), expected_d_in=F + mdp.CONTEXT_SLOTS * schema.L)
            if cmeta.schema_digest != schema.digest():
                raise CheckpointError(f"{fname}: attribute schema does not match the model manifest")
            if cmeta.group != g:
                raise CheckpointError(f"{fname}: stores group {cmeta.group}, expected {g}")
            rho = None if extra.get("rho", "None") == "None" else float(extra["rho"])
            agents.append(GroupAgent(
                group=g, name=name, attrs=attrs, policy=net, target=net.copy(), opt=opt, memory=None,
                stats=None, rho=rho, env_steps=int(extra.get("env_steps", 0)), opt_steps=cmeta.step,
                syncs=int(extra.get("syncs", 0)),
            ))
        return cls(schema, groups, scaler, agents, F, meta.get("reward_mode", "basic"))


def train(dataset: Dataset, groups: GroupConfig | None, cfg: TrainConfig) -> tuple[TrainedModel, TrainingReport]:
    """Train one agent per group. Deterministic for a fixed ``cfg.seed``.

    Groups draw from independent RNG streams, so ``cfg.workers > 1`` (groups
    trained on a thread pool) gives the same agents as the sequential run.
    """
    if len(dataset) == 0:
        raise ValidationError("cannot train on an empty dataset")
    schema = dataset.schema
    if groups is None:
        groups = GroupConfig.single(schema.L)
    if groups.L != schema.L:
        raise ValidationError(f"group config covers {groups.L} attributes, dataset has {schema.L}")
    if cfg.standardize:
        scaler = dataset.scaler if dataset.scaler is not None else FeatureScaler.fit(dataset.features)
    else:
        scaler = FeatureScaler.identity(dataset.F)
    X = scaler.transform(dataset.features)

    jobs = [(g, name, attrs) for g, (name, attrs) in enumerate(groups.groups)]

    def run(job):
        g, name, attrs = job
        return _train_group(g, name, attrs, X, dataset.labels, schema.L, cfg)

    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    agents = [agent for agent, _ in results]
    records = sorted((r for _, recs in results for r in recs), key=lambda r: (r.epoch, r.group))
    model = TrainedModel(schema, groups, scaler, agents, dataset.F, cfg.reward_mode)
    return model, TrainingReport(records)


def predict_image(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    """Label vector for one sample, running each group's episode step by step at epsilon 0."""
    model._check_agents()
    x = model._scaled(features)[0]
    L = model.schema.L
    out = np.zeros(L, dtype=np.uint8)
    for agent in model.agents:
        state = mdp.init_episode(x, agent.attrs, L, group_id=agent.group)
        while True:
            a = greedy_action(forward(agent.policy, state.vector()))
            out[state.attribute] = a
            nxt = mdp.transition(state, a)
            if nxt.done:
                break
            state = nxt.next_state
    return out
