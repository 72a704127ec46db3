import copy

import numpy as np
import pytest

from entropic_ood import pipeline
from entropic_ood.config import DEFAULT_CONFIG, validate


def small_config(tmp_path, **overrides):
    """Default toy config shrunk so a full pipeline run takes well under a second."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    cfg["out"] = str(tmp_path / "run")
    cfg["data"]["per_class"] = 60
    cfg["optim"]["epochs"] = 4
    cfg["optim"]["milestones"] = [2, 3]
    for k, v in overrides.items():
        cfg[k] = v if not isinstance(v, dict) else {**cfg[k], **v}
    return validate(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def toy_models(tmp_path_factory):
    """One fully trained model per head on the default toy config (seed 0)."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    cfg["out"] = str(tmp_path_factory.mktemp("toy"))
    train_set, val_set, test_set, ood = pipeline.load_sets(cfg)
    models = {kind: pipeline.fit(cfg, kind, train_set)[0] for kind in ("softmax", "isomax", "isomax_plus", "dismax")}
    return {"cfg": cfg, "models": models, "train": train_set, "val": val_set, "test": test_set, "ood": ood}


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE = []
SESSION = {}


def pytest_sessionstart(session):
    import time

    SESSION["start"] = time.perf_counter()


def pytest_collection_modifyitems(config, items):
    # acceptance criteria run last so the runtime budget sees the whole suite
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
