import numpy as np
import pytest

from fracturekit import model as m
from fracturekit import training as t
from fracturekit.errors import InvalidArgumentError


def tiny_problem(n=24, size=8, seed=0):
    """Linearly separable toy batch: class decided by channel-0 mean."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 0.4, (n, 3, size, size)).astype(np.float32)
    y = (rng.uniform(size=n) < 0.5).astype(np.int64)
    x[y == 0, 0] += 0.5
    return x, y


def tiny_params(size=8, seed=0):
    return m.init_params(m.build_toy([4], [8], input_size=size), seed=seed)


class TestTrain:
    def test_zero_epochs(self):
        x, y = tiny_problem()
        params = tiny_params()
        before = [p.copy() for p in params.tensors]
        out, hist = t.train(params, x, y, x, y, t.TrainConfig(max_epochs=0))
        assert len(hist) == 0
        for a, b in zip(out.tensors, before):
            assert np.array_equal(a, b)

    def test_scripted_early_stopping(self):
        x, y = tiny_problem()
        params = tiny_params()
        # val-loss script: 1.0, 0.5, then strictly increasing
        script = {e: (1.0 if e == 1 else 0.5 if e == 2 else 0.5 + 0.1 * e)
                  for e in range(1, 100)}
        snapshots = {}

        def monitor(epoch, p):
            snapshots[epoch] = [q.copy() for q in p.tensors]
            return script[epoch]

        cfg = t.TrainConfig(max_epochs=40, patience=10, seed=0)
        out, hist = t.train(params, x, y, x, y, cfg, monitor_fn=monitor)
        assert len(hist) == 12
        assert hist.stopped_early
        assert hist.best_epoch == 2
        for a, b in zip(out.tensors, snapshots[2]):
            assert np.array_equal(a, b)

    def test_determinism(self):
        x, y = tiny_problem()
        cfg = t.TrainConfig(max_epochs=3, patience=3, seed=5)
        p1, h1 = t.train(tiny_params(seed=1), x, y, x, y, cfg)
        p2, h2 = t.train(tiny_params(seed=1), x, y, x, y, cfg)
        assert h1.train_loss == h2.train_loss
        assert h1.val_loss == h2.val_loss
        for a, b in zip(p1.tensors, p2.tensors):
            assert np.array_equal(a, b)

    def test_learns_separable_problem(self):
        x, y = tiny_problem(n=64)
        params = tiny_params(seed=2)
        cfg = t.TrainConfig(max_epochs=30, patience=30, seed=0)
        params, hist = t.train(params, x, y, x, y, cfg)
        assert hist.train_acc[-1] >= 0.9

    def test_overfit_small_subset(self):
        # loss on 16 fixed samples falls below 0.05 and decreases after warmup
        x, y = tiny_problem(n=16, seed=3)
        params = tiny_params(seed=3)
        cfg = t.TrainConfig(max_epochs=200, patience=200, seed=0)
        params, hist = t.train(params, x, y, x, y, cfg)
        losses = hist.train_loss
        assert min(losses) < 0.05
        tail = losses[5:losses.index(min(losses)) + 1]
        assert all(b <= a + 1e-3 for a, b in zip(tail, tail[1:]))

    def test_empty_sets_rejected(self):
        x, y = tiny_problem()
        with pytest.raises(InvalidArgumentError):
            t.train(tiny_params(), x[:0], y[:0], x, y)

    def test_history_length_matches_epochs(self):
        x, y = tiny_problem()
        _, hist = t.train(tiny_params(), x, y, x, y,
                          t.TrainConfig(max_epochs=4, patience=4))
        assert len(hist) == len(hist.val_loss) == len(hist.wall_time) <= 4


class TestEvaluate:
    def test_constant_logit_tie_breaks_to_class_0(self):
        params = tiny_params()
        for p in params.tensors:
            p[...] = 0
        x, y = tiny_problem(n=40, seed=4)
        _, acc = t.evaluate_arrays(params, x, y)
        assert acc == pytest.approx(np.mean(y == 0))

    def test_empty_dataset(self):
        with pytest.raises(InvalidArgumentError):
            t.evaluate_arrays(tiny_params(), np.zeros((0, 3, 8, 8), np.float32),
                              np.zeros(0, np.int64))

    def test_no_parameter_mutation(self):
        params = tiny_params()
        before = [p.copy() for p in params.tensors]
        x, y = tiny_problem()
        t.evaluate_arrays(params, x, y)
        for a, b in zip(params.tensors, before):
            assert np.array_equal(a, b)


def test_history_csv(tmp_path):
    x, y = tiny_problem()
    _, hist = t.train(tiny_params(), x, y, x, y,
                      t.TrainConfig(max_epochs=2, patience=2))
    path = tmp_path / "history.csv"
    hist.write_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
    assert len(lines) == len(hist) + 1
