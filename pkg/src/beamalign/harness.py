"""Experiment orchestration: training loops, sweeps, pattern export, CSV output."""
from __future__ import annotations

import csv
import hashlib
import logging
from pathlib import Path

import numpy as np

from .array import beamforming_gain
from .baselines import OmpConfig, mrc_csi, run_exhaustive_episode, run_mrc_omp_episode
from .checkpoint import Checkpoint, fingerprint
from .config import ExperimentConfig
from .env import STREAM_EVAL, BeamAlignEnv, VectorEnv, episode_rng
from .maps import (
    BeamModule, BeamSpec, beam_patterns, build_codebook, codebook_specs, sector_for_aoa_range,
    train_beam_module,
)
from .ppo import PolicyNet, PpoConfig, PpoTrainer, collect_rollouts

log = logging.getLogger(__name__)

CURVE_FIELDS = ("update_index", "mean_reward", "policy_loss", "value_loss", "entropy", "grad_norm")
EVAL_FIELDS = ("method", "snr_db", "episodes", "mean_gain", "mean_gain_db", "ci95", "channel_hash")
PATTERN_FIELDS = ("beam_index", "theta_deg", "gain_linear")
MAP_CURVE_FIELDS = ("update_index", "loss")
STREAM_SENSING = 3


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- beam module persistence


def beam_module_checkpoint(module: BeamModule, update: int = 0, fp: str = "") -> Checkpoint:
    arrays = {f"beam/{k}": v for k, v in module.store.values().items()}
    meta = {"kind": "beam_module", "n_rx": module.n_rx, "hidden": module.hidden}
    return Checkpoint(arrays, meta, update, fp)


def load_beam_module(path_or_ckpt) -> BeamModule:
    ckpt = path_or_ckpt if isinstance(path_or_ckpt, Checkpoint) else Checkpoint.load(path_or_ckpt)
    if ckpt.meta.get("kind") not in ("beam_module", "agent") or "beam/beam.W0" not in ckpt.arrays:
        raise ValueError("checkpoint does not contain a beamforming module")
    meta = ckpt.meta.get("beam_module", ckpt.meta)
    module = BeamModule(int(meta["n_rx"]), int(meta["hidden"]))
    module.store.load(ckpt.subset("beam"))
    return module


def run_map_training(cfg: ExperimentConfig) -> Path:
    """Pretrain the beamforming module; writes ``beam_module.ckpt`` and ``map_curve.csv``."""
    out = Path(cfg.output_dir)
    module, losses = train_beam_module(cfg.map_config())
    write_csv(out / "map_curve.csv", MAP_CURVE_FIELDS, enumerate(losses))
    fp = fingerprint(cfg.map_config().__dict__)
    return beam_module_checkpoint(module, len(losses), fp).save(out / "beam_module.ckpt")


# ---------------------------------------------------------------- agent persistence


def _policy_meta(policy: PolicyNet, cfg: ExperimentConfig) -> dict:
    meta = {"kind": "agent", "n_rx": policy.n_rx, "mode": policy.mode, "T": cfg.T, "L": cfg.L,
            "hidden": cfg.hidden, "gru_layers": cfg.gru_layers, "ff_layers": cfg.ff_layers}
    if policy.beam_module is not None:
        meta["beam_module"] = {"n_rx": policy.beam_module.n_rx, "hidden": policy.beam_module.hidden}
    return meta


def agent_checkpoint(trainer: PpoTrainer, cfg: ExperimentConfig, best: float) -> Checkpoint:
    policy = trainer.policy
    arrays = {f"policy/{k}": v for k, v in policy.store.values().items()}
    arrays.update({f"adam/{k}": v for k, v in trainer.opt.state_arrays().items()})
    if policy.beam_module is not None:
        arrays.update({f"beam/{k}": v for k, v in policy.beam_module.store.values().items()})
    meta = _policy_meta(policy, cfg)
    meta["adam_t"] = trainer.opt.t
    meta["best_reward"] = best
    return Checkpoint(arrays, meta, trainer.update_index, fingerprint(cfg.as_dict()))


def load_policy(path_or_ckpt) -> PolicyNet:
    ckpt = path_or_ckpt if isinstance(path_or_ckpt, Checkpoint) else Checkpoint.load(path_or_ckpt)
    meta = ckpt.meta
    if meta.get("kind") != "agent":
        raise ValueError("checkpoint does not contain an agent")
    beam = load_beam_module(ckpt) if meta["mode"] == "beam" else None
    pcfg = PpoConfig(hidden=meta["hidden"], gru_layers=meta["gru_layers"], ff_layers=meta["ff_layers"])
    policy = PolicyNet(int(meta["n_rx"]), meta["mode"], pcfg, beam)
    policy.store.load(ckpt.subset("policy"))
    return policy


def _build_policy(cfg: ExperimentConfig, seed: int) -> PolicyNet:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    if cfg.map_kind == "direct":
        return PolicyNet(cfg.n_rx, "direct", cfg.ppo_config(), rng=rng)
    if not cfg.map_checkpoint:
        raise ValueError("map_kind = beamforming needs map_checkpoint")
    module = load_beam_module(cfg.map_checkpoint)
    if module.n_rx != cfg.n_rx:
        raise ValueError(f"beam module is for n_rx={module.n_rx}, config has {cfg.n_rx}")
    return PolicyNet(cfg.n_rx, "beam", cfg.ppo_config(), module, rng=rng)


def train_agent_run(cfg: ExperimentConfig, seed: int, out: Path, progress=None) -> Path:
    """One seeded training run; returns the path of the final checkpoint."""
    out.mkdir(parents=True, exist_ok=True)
    last_path, best_path, curve_path = out / "agent.ckpt", out / "agent_best.ckpt", out / "training_curve.csv"
    policy = _build_policy(cfg, seed)
    trainer = PpoTrainer(policy, cfg.env_config(seed=seed), cfg.ppo_config())
    rows: list[list] = []
    best = -np.inf
    if cfg.resume and last_path.exists():
        ckpt = Checkpoint.load(last_path)
        policy.store.load(ckpt.subset("policy"))
        trainer.opt.load_state(ckpt.subset("adam"), ckpt.meta["adam_t"])
        trainer.update_index = ckpt.update
        best = ckpt.meta.get("best_reward", -np.inf)
        if curve_path.exists():
            rows = [[int(r["update_index"])] + [float(r[k]) for k in CURVE_FIELDS[1:]]
                    for r in read_csv(curve_path) if int(r["update_index"]) < ckpt.update]
        log.info("resumed %s at update %d", out, ckpt.update)

    recent = [r[1] for r in rows[-cfg.best_window:]]
    try:
        while trainer.update_index < cfg.updates:
            index = trainer.update_index
            stats = trainer.train_step()
            rows.append([index, stats.mean_reward, stats.policy_loss, stats.value_loss,
                         stats.entropy, stats.grad_norm])
            recent = (recent + [stats.mean_reward])[-cfg.best_window:]
            if trainer.update_index % cfg.checkpoint_every == 0:
                smoothed = float(np.mean(recent))
                if smoothed > best:
                    best = smoothed
                    agent_checkpoint(trainer, cfg, best).save(best_path)
                agent_checkpoint(trainer, cfg, best).save(last_path)
                write_csv(curve_path, CURVE_FIELDS, rows)
            if progress is not None:
                progress(index, stats)
    except FloatingPointError:
        write_csv(curve_path, CURVE_FIELDS, rows)
        log.error("training diverged at update %d; last good checkpoint kept", trainer.update_index)
        raise
    write_csv(curve_path, CURVE_FIELDS, rows)
    return agent_checkpoint(trainer, cfg, best).save(last_path)


def run_training(cfg: ExperimentConfig, progress=None) -> list[Path]:
    """Train ``num_seeds`` agents; seed ``k`` writes to ``output_dir/seed_k`` when there are several."""
    out = Path(cfg.output_dir)
    if cfg.num_seeds == 1:
        return [train_agent_run(cfg, cfg.seed, out, progress)]
    return [train_agent_run(cfg, cfg.seed + k, out / f"seed_{k}", progress)
            for k in range(cfg.num_seeds)]


# ---------------------------------------------------------------- evaluation


def _channel_hash(channels) -> str:
    h = hashlib.sha256()
    for c in channels:
        h.update(np.ascontiguousarray(c.h).tobytes())
    return h.hexdigest()[:16]


def _summary(method: str, snr: float, gains, channels) -> list:
    gains = np.asarray(gains, dtype=np.float64)
    mean = float(gains.mean())
    ci = float(1.96 * gains.std(ddof=1) / np.sqrt(gains.size)) if gains.size > 1 else 0.0
    db = 10.0 * np.log10(mean) if mean > 0 else -np.inf
    return [method, float(snr), int(gains.size), mean, float(db), ci, _channel_hash(channels)]


def sensing_config(cfg: ExperimentConfig) -> OmpConfig:
    rng = episode_rng(cfg.seed, STREAM_SENSING, 0)
    return OmpConfig.random(cfg.n_rx, cfg.T - 1, rng, grid_size=cfg.omp_grid, iterations=cfg.L)


def exhaustive_codebook(module: BeamModule, T: int) -> list[np.ndarray]:
    return build_codebook(module, T - 1, sector_for_aoa_range())


def evaluate_method(method: str, cfg: ExperimentConfig, snr: float, context: dict):
    """Per-episode gains and channels for one method at one SNR."""
    env_cfg = cfg.env_config(snr_db=snr)
    n = cfg.eval_episodes
    if method == "drl":
        batch = collect_rollouts(context["policy"], env_cfg, n, stream=STREAM_EVAL,
                                 deterministic=True, workers=cfg.workers)
        return batch.terminal_rewards, batch.channels
    if method == "mrc_csi":
        venv = VectorEnv(env_cfg, STREAM_EVAL)
        venv.reset(range(n))
        return [beamforming_gain(mrc_csi(c), c) for c in venv.channels], venv.channels
    env = BeamAlignEnv(env_cfg, STREAM_EVAL)
    gains, channels = np.empty(n), []
    for e in range(n):
        if method == "mrc_omp":
            gains[e] = run_mrc_omp_episode(env, context["omp"], e, context["dictionary"])
        else:
            gains[e] = run_exhaustive_episode(env, context["codebook"], e)
        channels.append(env.channel)
    return gains, channels


def evaluate_sweep(cfg: ExperimentConfig, methods=None) -> list[list]:
    """Paired-seed gain for every ``method x SNR``; episode ``i`` sees the same channel everywhere."""
    methods = list(cfg.methods if methods is None else methods)
    context: dict = {}
    labels = {m: m for m in methods}
    if "drl" in methods:
        if not cfg.agent_checkpoint:
            raise ValueError("method 'drl' needs agent_checkpoint")
        policy = load_policy(cfg.agent_checkpoint)
        if policy.n_rx != cfg.n_rx:
            raise ValueError("agent checkpoint n_rx does not match config")
        context["policy"] = policy
        labels["drl"] = "drl_bf" if policy.mode == "beam" else "drl_dm"
    if "mrc_omp" in methods:
        context["omp"] = sensing_config(cfg)
        context["dictionary"] = context["omp"].dictionary
    if "exhaustive" in methods:
        if cfg.map_checkpoint:
            module = load_beam_module(cfg.map_checkpoint)
        elif "policy" in context and context["policy"].beam_module is not None:
            module = context["policy"].beam_module
        else:
            raise ValueError("method 'exhaustive' needs map_checkpoint")
        context["codebook"] = exhaustive_codebook(module, cfg.T)
    rows = []
    for m in methods:
        for snr in cfg.snr_list:
            gains, channels = evaluate_method(m, cfg, snr, context)
            rows.append(_summary(labels[m], snr, gains, channels))
            log.info("%s @ %s dB: %.4f", labels[m], snr, rows[-1][3])
    return rows


def run_eval(cfg: ExperimentConfig, methods=None, filename: str = "eval.csv") -> Path:
    rows = evaluate_sweep(cfg, methods)
    return write_csv(Path(cfg.output_dir) / filename, EVAL_FIELDS, rows)


def run_baselines(cfg: ExperimentConfig) -> Path:
    methods = [m for m in cfg.methods if m != "drl"]
    if "exhaustive" in methods and not cfg.map_checkpoint:
        methods.remove("exhaustive")
    return run_eval(cfg, methods, "baselines.csv")


# ---------------------------------------------------------------- patterns


def parse_pattern_specs(text: str) -> list[BeamSpec]:
    """``"alpha_deg:beta_deg, ..."`` to beam specs."""
    specs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        a, b = (float(s) for s in item.split(":"))
        specs.append(BeamSpec(np.deg2rad(a), np.deg2rad(b)))
    return specs


def export_patterns(module: BeamModule, specs=None, q: int = 8, n_grid: int = 1000):
    if specs is None:
        specs = codebook_specs(q)
    W = module.combiners([s.alpha for s in specs], [s.beta for s in specs])
    table = beam_patterns(list(W), n_grid)
    return table, specs


def run_export_patterns(cfg: ExperimentConfig) -> Path:
    if not cfg.map_checkpoint:
        raise ValueError("export-patterns needs map_checkpoint")
    module = load_beam_module(cfg.map_checkpoint)
    specs = parse_pattern_specs(cfg.pattern_specs) if cfg.pattern_specs else None
    table, _ = export_patterns(module, specs, cfg.pattern_beams, cfg.pattern_grid)
    rows = zip(table.beam_index, table.theta_deg, table.gain_linear)
    return write_csv(Path(cfg.output_dir) / "patterns.csv", PATTERN_FIELDS, rows)
