"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]`` or ``[FAIL]`` line with the measured
numbers before asserting. The extended-budget ordering check only runs when
``BEAMALIGN_LONG=1`` is set; otherwise it reports ``[SKIP]``.
"""
import os
import time

import numpy as np
import pytest

from beamalign import harness
from beamalign.array import beamforming_gain, sample_channel
from beamalign.baselines import OmpConfig, mrc_csi, run_mrc_omp_episode
from beamalign.checkpoint import Checkpoint
from beamalign.config import ExperimentConfig
from beamalign.env import BeamAlignEnv, EnvConfig
from beamalign.maps import (
    BeamModule, MapTrainingConfig, beam_module_loss, in_out_gain, sample_beam_spec, sample_psi,
    train_beam_module,
)
from beamalign.nn import MLP, GruStack, ParamStore
from beamalign.nn import autodiff as ad
from beamalign.nn.gradcheck import gradcheck
from beamalign.ppo import PolicyNet, PpoConfig, collect_rollouts, compute_returns, ppo_loss

LONG = os.environ.get("BEAMALIGN_LONG") == "1"

# desk-scale agent training shared by the learnability and scaling checks
DESK_AGENT = dict(T=5, L=1, snr_db=20.0, updates=5000, batch_episodes=64, workers=64,
                  minibatch_episodes=32, checkpoint_every=500)
FINAL_WINDOW = 100


def report(capsys, number, ok, text):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")
    assert ok, text


# ---------------------------------------------------------------- 1


def test_criterion_1_mrc_upper_bound(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    gains = []
    for i in range(1000):
        ch = sample_channel(rng, int(rng.integers(1, 6)), int(rng.integers(1, 65)))
        gains.append(beamforming_gain(mrc_csi(ch), ch))
    elapsed = time.perf_counter() - start
    err = abs(np.mean(gains) - 1.0)
    report(capsys, 1, err <= 1e-9 and elapsed < 1.0,
           f"MRC mean gain error {err:.2e} (<= 1e-9) over 1000 channels in {elapsed:.2f}s (< 1s)")


# ---------------------------------------------------------------- 2


def _mlp_check(rng):
    store = ParamStore()
    net = MLP.create(store, "m", (2, 32, 32, 8), rng)
    x, y = rng.standard_normal((16, 2)), rng.standard_normal((16, 8))
    return gradcheck(lambda: ad.square(net(x) - y).mean(), store, rng, n_coords=50)


def _gru_check(rng):
    store = ParamStore()
    gru = GruStack.create(store, "g", 2, 16, 2, rng)
    xs = [rng.standard_normal((4, 2)) for _ in range(5)]
    proj = rng.standard_normal((16, 1))

    def loss():
        outputs, _ = gru(xs)
        return sum(ad.square(o @ proj).mean() for o in outputs)

    return gradcheck(loss, store, rng, n_coords=50)


def _beam_loss_check(rng):
    module = BeamModule(8, hidden=32, rng=rng)
    alpha, beta = sample_beam_spec(rng, 16)
    psi_in, psi_out, has_out = sample_psi(alpha, beta, 32, rng)
    return gradcheck(lambda: beam_module_loss(module, alpha, beta, psi_in, psi_out, has_out, 1.0),
                     module.store, rng, n_coords=50)


def _ppo_loss_check(rng):
    cfg = PpoConfig(hidden=32)
    policy = PolicyNet(4, "direct", cfg, rng=rng)
    batch = collect_rollouts(policy, EnvConfig(n_rx=4, T=5, seed=3), 8)
    returns, adv = compute_returns(batch)
    old = batch.log_prob + rng.uniform(-0.3, 0.3, batch.log_prob.shape)
    return gradcheck(lambda: ppo_loss(policy, batch.obs, batch.u, old, adv, returns, cfg)[0],
                     policy.store, rng, n_coords=50)


def test_criterion_2_gradient_correctness(capsys):
    start = time.perf_counter()
    errors = {}
    for name, check in (("mlp", _mlp_check), ("gru-bptt", _gru_check),
                        ("beam-loss", _beam_loss_check), ("ppo-loss", _ppo_loss_check)):
        errors[name] = check(np.random.default_rng(len(name))).max_rel_error
    elapsed = time.perf_counter() - start
    ok = all(e < 1e-4 for e in errors.values()) and elapsed < 60
    text = ", ".join(f"{k} {v:.1e}" for k, v in errors.items())
    report(capsys, 2, ok, f"max rel. error {text} (< 1e-4) in {elapsed:.1f}s (< 60s)")


# ---------------------------------------------------------------- 3


def test_criterion_3_beam_module_training(capsys):
    start = time.perf_counter()
    cfg = MapTrainingConfig(n_rx=16, batch=256, K=256, epsilon=1.0, updates=2000, seed=0)
    module, _ = train_beam_module(cfg)
    alpha, beta = sample_beam_spec(np.random.default_rng(100), 100)
    g_in, g_out = in_out_gain(module, alpha, beta)
    keep = ~np.isnan(g_out)  # full-width beams have no outside region
    ratio = g_in[keep].mean() / g_out[keep].mean()
    elapsed = time.perf_counter() - start
    report(capsys, 3, ratio >= 3.0 and elapsed < 600,
           f"in/out reference gain ratio {ratio:.2f} (>= 3) over {keep.sum()} specs "
           f"in {elapsed:.0f}s (< 600s)")


# ---------------------------------------------------------------- 4 and 5


def random_policy_mean(n_rx, draws=400_000, seed=0):
    """Monte Carlo gain of uniform actions in the direct-map box on single-path channels."""
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(draws // 10_000):
        a = rng.uniform(-1, 1, (10_000, 2 * n_rx))
        w = a[:, :n_rx] + 1j * a[:, n_rx:]
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        theta = rng.uniform(-np.pi / 3, np.pi / 3, 10_000)
        h = np.exp(1j * np.pi * np.outer(np.sin(theta), np.arange(n_rx))) / np.sqrt(n_rx)
        total += np.sum(np.abs(np.sum(w.conj() * h, axis=1)) ** 2)
    return total / draws


_runs: dict = {}


def desk_run(tmp_root, n_rx, seed):
    """Final mean terminal reward and wall time of one desk-scale direct-map run (cached)."""
    key = (n_rx, seed)
    if key not in _runs:
        start = time.perf_counter()
        out = tmp_root / f"n{n_rx}_s{seed}"
        cfg = ExperimentConfig(output_dir=str(out), n_rx=n_rx, seed=seed, **DESK_AGENT)
        harness.run_training(cfg)
        rows = harness.read_csv(out / "training_curve.csv")
        final = float(np.mean([float(r["mean_reward"]) for r in rows[-FINAL_WINDOW:]]))
        _runs[key] = (final, time.perf_counter() - start)
    return _runs[key]


@pytest.fixture(scope="module")
def run_root(tmp_path_factory):
    return tmp_path_factory.mktemp("desk_runs")


def test_criterion_4_two_antenna_learnability(capsys, run_root):
    baseline = random_policy_mean(2)
    final, elapsed = desk_run(run_root, 2, 0)
    ok = final >= 1.5 * baseline and elapsed < 1800
    report(capsys, 4, ok,
           f"N=2 final reward {final:.3f} vs random policy {baseline:.3f} "
           f"(need >= {1.5 * baseline:.3f}) in {elapsed / 60:.1f} min (< 30 min)")


def test_criterion_5_scaling_failure_trend(capsys, run_root):
    seeds = (0, 1, 2)
    small = [desk_run(run_root, 2, s) for s in seeds]
    large = [desk_run(run_root, 14, s) for s in seeds]
    r2 = np.mean([r for r, _ in small])
    r14 = np.mean([r for r, _ in large])
    elapsed = sum(t for _, t in small + large)
    report(capsys, 5, r14 < r2 and elapsed < 7200,
           f"mean final reward N=14 {r14:.3f} < N=2 {r2:.3f} over 3 seeds "
           f"in {elapsed / 60:.1f} min (< 120 min)")


# ---------------------------------------------------------------- 6


def test_criterion_6_omp_sanity(capsys):
    start = time.perf_counter()
    env = BeamAlignEnv(EnvConfig(n_rx=32, T=5, L=1, snr_db=400.0, seed=0))
    cfg = OmpConfig.random(32, 4, np.random.default_rng(1), grid_size=256, iterations=1)
    A = cfg.dictionary
    mean = np.mean([run_mrc_omp_episode(env, cfg, e, A) for e in range(1000)])
    elapsed = time.perf_counter() - start
    report(capsys, 6, mean >= 0.95 and elapsed < 30,
           f"noiseless OMP mean gain {mean:.4f} (>= 0.95) over 1000 episodes in {elapsed:.1f}s (< 30s)")


# ---------------------------------------------------------------- 7


def test_criterion_7_high_snr_ordering(capsys, tmp_path):
    if not LONG:
        with capsys.disabled():
            print("\n[SKIP] criterion 7: extended-budget run; set BEAMALIGN_LONG=1 to execute")
        pytest.skip("extended-budget run disabled")
    base = dict(output_dir=str(tmp_path), n_rx=32, T=5, L=1, seed=0)
    module = harness.run_map_training(ExperimentConfig(mode="train-map", map_batch=256, map_K=256,
                                                       map_updates=2000, **base))
    (agent,) = harness.run_training(ExperimentConfig(
        map_kind="beamforming", map_checkpoint=str(module), updates=50_000, batch_episodes=64,
        workers=64, minibatch_episodes=32, checkpoint_every=1000, **base))
    best = agent.parent / "agent_best.ckpt"
    cfg = ExperimentConfig(mode="eval", agent_checkpoint=str(best), methods=["drl", "mrc_omp"],
                           snr_list=[20.0, 25.0, 30.0], **base)
    rows = harness.read_csv(harness.run_eval(cfg))
    gain = {(r["method"], float(r["snr_db"])): float(r["mean_gain"]) for r in rows}
    ok = all(gain[("drl_bf", s)] >= gain[("mrc_omp", s)] for s in (20.0, 25.0, 30.0))
    text = ", ".join(f"{s:.0f} dB {gain[('drl_bf', s)]:.3f} vs {gain[('mrc_omp', s)]:.3f}"
                     for s in (20.0, 25.0, 30.0))
    report(capsys, 7, ok, f"DRL_BF vs MRC_OMP mean gain: {text}")


# ---------------------------------------------------------------- 8


def test_criterion_8_determinism_and_persistence(capsys, tmp_path):
    start = time.perf_counter()
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        common = dict(output_dir=str(out), n_rx=4, T=5, seed=7)
        harness.run_training(ExperimentConfig(updates=20, hidden=16, batch_episodes=16, workers=16,
                                              minibatch_episodes=8, checkpoint_every=10, **common))
        harness.run_baselines(ExperimentConfig(mode="baselines", snr_list=[0.0, 20.0],
                                               eval_episodes=500, **common))
        outputs.append([(out / f).read_bytes() for f in ("training_curve.csv", "baselines.csv")])
    same_csv = outputs[0] == outputs[1]
    ckpt = tmp_path / "a" / "agent.ckpt"
    copy = Checkpoint.load(ckpt).save(tmp_path / "copy.ckpt")
    same_ckpt = ckpt.read_bytes() == copy.read_bytes()
    elapsed = time.perf_counter() - start
    report(capsys, 8, same_csv and same_ckpt and elapsed < 60,
           f"identical CSVs {same_csv}, byte-identical checkpoint {same_ckpt} in {elapsed:.1f}s (< 60s)")
