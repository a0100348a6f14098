"""Acceptance gate: one PASS/FAIL line per criterion.

Run alone with ``pytest -s tests/test_acceptance.py``; the lines are also
collected into the terminal summary of a normal run.
"""

import time
import warnings
from fractions import Fraction

import numpy as np
import pytest

from rlpar.cli import main
from rlpar.dataio import Dataset, SynthSpec, generate_synthetic, load_dataset
from rlpar.experiments import parse_rho_range, same_training
from rlpar.mdp import basic_reward, gor_reward
from rlpar.metrics import evaluate, mean_accuracy
from rlpar.qnet import forward, init_network, load_checkpoint, td_loss_and_gradients
from rlpar.replay import ReplayMemory
from rlpar.schema import RHO_VALUES, GroupConfig, rho_for
from rlpar.trainer import TrainConfig, TrainedModel, epsilon_at, td_target, train
from test_metrics import brute_force
from test_qnet import numeric_gradient, rel_error

pytestmark = pytest.mark.slow


def quiet_evaluate(truth, pred):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evaluate(truth, pred)


def test_criterion_1_reward_tables(criterion):
    t0 = time.perf_counter()
    ok = [basic_reward(1, 1), basic_reward(0, 0), basic_reward(1, 0), basic_reward(0, 1)] == [1, 1, -1, -1]
    for rho in RHO_VALUES:
        ok &= [gor_reward(1, 1, rho), gor_reward(0, 1, rho), gor_reward(1, 0, rho), gor_reward(0, 0, rho)] == [
            1.0, -1.0, -rho, rho]
    cases = {
        0.0: 0.15, 0.03: 0.15, 0.0499999: 0.15, 0.05: 0.25, 0.2: 0.25, 0.25: 0.35, 0.3: 0.35,
        0.35: 0.45, 0.4: 0.45, 0.45: 0.55, 0.9: 0.55, 0.9999999: 0.55,
    }
    ok &= all(rho_for(c) == want for c, want in cases.items())
    dt = time.perf_counter() - t0
    criterion(1, "exact reward tables and rho intervals", ok and dt < 1.0, f"{dt:.3f}s")


def test_criterion_2_gradient_check(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng([2, seed])
        d_in = int(rng.integers(1, 65))
        net = init_network(d_in, rng, hidden=(int(rng.integers(2, 16)), int(rng.integers(2, 16))))
        for b in net.params[1::2]:
            b[:] = rng.normal(scale=0.1, size=b.shape)
        n = int(rng.integers(1, 9))
        x = rng.normal(size=(n, d_in))
        a = rng.integers(0, 2, size=n)
        y = rng.normal(size=n)
        _, grads = td_loss_and_gradients(net, x, a, y)
        analytic = np.concatenate([g.ravel() for g in grads])
        worst = max(worst, rel_error(analytic, numeric_gradient(net, x, a, y)))
    dt = time.perf_counter() - t0
    criterion(2, "analytic vs central-difference gradients on 20 networks", worst <= 1e-4 and dt < 30,
              f"max rel err {worst:.2e}, {dt:.1f}s")


def tabular_instance():
    """Four distinct feature vectors, 100 draws each, label odds far from even."""
    rng = np.random.default_rng(31)
    protos = rng.normal(size=(4, 4))
    probs = np.array([[0.85, 0.15, 0.8], [0.2, 0.9, 0.1], [0.75, 0.8, 0.2], [0.1, 0.25, 0.85]])
    kind = np.repeat(np.arange(4), 100)
    rng.shuffle(kind)
    labels = (rng.random((400, 3)) < probs[kind]).astype(np.uint8)
    ids = [f"s{i:03d}" for i in range(400)]
    return Dataset(("x", "y", "z"), ids, protos[kind], labels, "train"), protos, kind


def test_criterion_3_tabular_oracle(criterion):
    t0 = time.perf_counter()
    ds, protos, kind = tabular_instance()
    # Bayes-optimal answer by exhaustive counting
    oracle = np.array([[int(ds.labels[kind == k, j].sum() * 2 > (kind == k).sum()) for j in range(3)] for k in range(4)])
    model, _ = train(ds, GroupConfig.single(3), TrainConfig(seed=0))
    agree = float((model.predict(protos) == oracle).mean())
    dt = time.perf_counter() - t0
    criterion(3, "greedy policy matches majority-label oracle", agree >= 0.95 and dt <= 120,
              f"{agree:.3f} of 12 pairs, {dt:.0f}s")


def test_criterion_4_separable_synthetic(criterion):
    t0 = time.perf_counter()
    spec = SynthSpec(n=500, n_features=16, n_attributes=8, rates=(0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.2, 0.3), seed=0)
    tr, te = generate_synthetic(spec, "train"), generate_synthetic(spec, "test", n=200)
    groups = GroupConfig((("a", (0, 1, 2, 3)), ("b", (4, 5, 6, 7))), 8)
    model, _ = train(tr, groups, TrainConfig(seed=0))
    m = quiet_evaluate(te.labels, model.predict_dataset(te))
    dt = time.perf_counter() - t0
    criterion(4, "separable synthetic: test mA >= 0.95, Acc >= 0.90", m.mA >= 0.95 and m.acc >= 0.90 and dt <= 300,
              f"mA {m.mA:.4f}, Acc {m.acc:.4f}, {dt:.0f}s")


def test_criterion_5_gor_ablation_direction(criterion):
    t0 = time.perf_counter()
    spec = SynthSpec(n=800, n_features=8, n_attributes=4, rates=(0.05, 0.08, 0.2, 0.3), snr=1.0, seed=0)
    tr, te = generate_synthetic(spec, "train"), generate_synthetic(spec, "test", n=1000)
    groups = GroupConfig((("rare", (0, 1)), ("common", (2, 3))), 4)
    out = {}
    for mode in ("basic", "gor"):
        model, _ = train(tr, groups, TrainConfig(reward_mode=mode, seed=0))
        out[mode] = quiet_evaluate(te.labels, model.predict_dataset(te))
    b, g = out["basic"], out["gor"]
    dt = time.perf_counter() - t0
    ok = g.pos_acc[0] > b.pos_acc[0] and g.mA > b.mA and dt <= 600
    criterion(5, "gor raises rare-attribute recall and mA over basic", ok,
              f"rare recall {b.pos_acc[0]:.3f} -> {g.pos_acc[0]:.3f}, mA {b.mA:.4f} -> {g.mA:.4f}, "
              f"Prec {b.prec:.4f} -> {g.prec:.4f}, {dt:.0f}s")


def test_criterion_6_metrics_oracle(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(6)
    for _ in range(100):
        truth = rng.integers(0, 2, size=(20, 10))
        pred = rng.integers(0, 2, size=(20, 10))
        r = quiet_evaluate(truth, pred)
        worst = max(worst, max(abs(x - y) for x, y in zip((r.mA, r.acc, r.prec, r.rec, r.f1), brute_force(truth, pred))))
    hand = quiet_evaluate(np.array([[0, 1, 1, 0]]), np.array([[0, 0, 1, 1]]))
    ma = mean_accuracy(np.array([[1], [1], [0], [0], [0], [0]]), np.array([[1], [0], [0], [0], [0], [1]]))
    ok = worst <= 1e-12 and hand.acc == 1 / 3 and Fraction(hand.acc).limit_denominator(10) == Fraction(1, 3)
    ok &= ma == 0.625
    dt = time.perf_counter() - t0
    criterion(6, "metrics match brute-force oracle and hand cases", ok and dt < 5, f"max diff {worst:.1e}, {dt:.2f}s")


def test_criterion_7_dqn_mechanics(criterion):
    t0 = time.perf_counter()
    mem = ReplayMemory(2000, 1)
    for i in range(2500):
        mem.push_arrays(np.array([float(i)]), 0, 0.0, None, True)
    fifo = len(mem) == 2000 and [mem[k].state_vec[0] for k in (0, 1999)] == [500.0, 2499.0]
    cfg = TrainConfig()
    eps = epsilon_at(0, 7000, cfg) == 0.9 and epsilon_at(7000, 7000, cfg) == 0.05
    td = td_target(1.0, True, None, 0.9) == 1.0 and td_target(-1.0, False, [0.5, 0.3], 0.9) == -1 + 0.9 * 0.5
    td &= abs(td_target(-1.0, False, [0.5, 0.3], 0.9) + 0.55) < 1e-15
    spec = SynthSpec(n=60, n_features=6, n_attributes=5, rates=(0.3,) * 5, snr=4.0, seed=7)
    model, _ = train(generate_synthetic(spec), GroupConfig((("a", (0, 1, 2)), ("b", (3, 4))), 5),
                     TrainConfig(epochs=4, hidden=(16, 8)))
    sync = all(a.syncs == a.opt_steps // 100 for a in model.agents) and model.agents[0].syncs >= 3
    dt = time.perf_counter() - t0
    criterion(7, "replay FIFO, target sync cadence, epsilon endpoints, TD targets", fifo and eps and td and sync and dt < 10,
              f"syncs {[a.syncs for a in model.agents]} for opt steps {[a.opt_steps for a in model.agents]}, {dt:.1f}s")


def test_criterion_8_determinism_and_persistence(criterion, tmp_path):
    t0 = time.perf_counter()
    spec = SynthSpec(n=120, n_features=8, n_attributes=5, rates=(0.2, 0.3, 0.4, 0.25, 0.1), snr=2.0, seed=8)
    tr, te = generate_synthetic(spec), generate_synthetic(spec, "test", n=50)
    groups = GroupConfig((("a", (0, 2)), ("b", (1, 3, 4))), 5)
    cfg = TrainConfig(epochs=3, seed=5, reward_mode="gor")
    run1, run2 = train(tr, groups, cfg), train(tr, groups, cfg)
    run1[0].save(tmp_path / "r1")
    run2[0].save(tmp_path / "r2")
    files = sorted(p.name for p in (tmp_path / "r1").iterdir())
    same_bytes = all((tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes() for f in files)
    same_reports = run1[1].summary_text() == run2[1].summary_text() and run1[1].log_text() == run2[1].log_text()

    back = TrainedModel.load(tmp_path / "r1")
    X = back.scaler.transform(te.features)
    roundtrip = np.array_equal(back.predict(te.features), run1[0].predict(te.features))
    for a, b in zip(run1[0].agents, back.agents):
        states = np.hstack([X, np.random.default_rng(0).random((len(X), b.policy.d_in - X.shape[1]))])
        roundtrip &= np.array_equal(forward(a.policy, states), forward(b.policy, states))
    net, _, _ = load_checkpoint((tmp_path / "r1" / "group_00.grlq").read_bytes())
    roundtrip &= np.array_equal(net.theta, run1[0].agents[0].policy.theta)

    parallel = same_training(run1, train(tr, groups, TrainConfig(epochs=3, seed=5, reward_mode="gor", workers=2)))
    dt = time.perf_counter() - t0
    ok = same_bytes and same_reports and roundtrip and parallel and dt < 300
    criterion(8, "bit-identical reruns, exact save/load, parallel equals sequential", ok,
              f"files {same_bytes}, reports {same_reports}, roundtrip {roundtrip}, parallel {parallel}, {dt:.0f}s")


def test_criterion_9_rho_sweep_harness(criterion, tmp_path, capsys):
    t0 = time.perf_counter()
    spec = tmp_path / "spec.txt"
    spec.write_text("n = 200\nn_test = 100\nF = 6\nL = 3\nrates = 0.1, 0.3, 0.4\nsnr = 2\nseed = 9\n")
    groups = tmp_path / "groups.txt"
    groups.write_text("pair: attr00, attr01\nrest: attr02\n")
    data = tmp_path / "data"
    assert main(["synth", "--spec", str(spec), "--out", str(data)]) == 0
    out = tmp_path / "sweep"
    rc = main(["sweep-rho", "--rho", "0.05:1.0:0.05", "--train", str(data / "train.manifest"),
               "--test", str(data / "test.manifest"), "--groups", str(groups), "--group", "pair", "--out", str(out)])
    printed = capsys.readouterr().out
    rows = (out / "rho_sweep.tsv").read_text().splitlines() if rc == 0 else []
    rho_col = [r.split("\t")[0] for r in rows[1:21]]
    ok = rc == 0 and len(rows) == 22 and rho_col == [f"{r:.2f}" for r in parse_rho_range("0.05:1.0:0.05")]
    ok &= "step for step: True" in printed and (out / "rho_sweep.png").is_file()
    ok &= len(rows) == 22 and rows[20].split("\t")[1:] == rows[21].split("\t")[1:]
    dt = time.perf_counter() - t0
    with capsys.disabled():
        criterion(9, "20-value rho sweep completes; rho=1 reproduces basic step for step", ok and dt <= 1200,
                  f"{len(rows) - 2} rho rows, {dt:.0f}s")
