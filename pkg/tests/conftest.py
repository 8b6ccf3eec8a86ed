import time

import numpy as np
import pytest

from fracturekit import data as d
from fracturekit import model as m
from fracturekit import training as t

TOY_SEED = 7
TOY_SIZE = 64
TOY_CHANNELS = [8, 16, 32]
TOY_HEAD = [64]
N_PER_CLASS = 1000


@pytest.fixture(scope="session")
def trained_toy():
    """Toy CNN trained on 2000 synthetic images with the reference settings
    (Adam lr 0.0005, batch 32, up to 40 epochs, patience 10).

    Shared across the acceptance suite; training is deterministic in TOY_SEED.
    """
    ds = d.generate_synthetic(d.SyntheticConfig(size=TOY_SIZE, seed=TOY_SEED),
                              N_PER_CLASS)
    splits = d.stratified_split(ds, seed=TOY_SEED)
    x_tr, y_tr = t.dataset_tensors(splits[0], TOY_SIZE)
    x_va, y_va = t.dataset_tensors(splits[1], TOY_SIZE)
    spec = m.build_toy(TOY_CHANNELS, TOY_HEAD, input_size=TOY_SIZE)
    params = m.init_params(spec, seed=TOY_SEED)
    t0 = time.monotonic()
    params, history = t.train(params, x_tr, y_tr, x_va, y_va,
                              t.TrainConfig(seed=TOY_SEED))
    train_seconds = time.monotonic() - t0
    return {
        "spec": spec,
        "params": params,
        "history": history,
        "splits": splits,
        "train_seconds": train_seconds,
    }


@pytest.fixture()
def untrained_toy():
    spec = m.build_toy([4, 8], [16], input_size=TOY_SIZE)
    return m.init_params(spec, seed=0)
