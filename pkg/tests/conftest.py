from __future__ import annotations

import pytest

from mpmcts.config import RunConfig


def make_cfg(**overrides) -> RunConfig:
    data = {
        "algorithm": "tds-uct",
        "workers": 1,
        "overload": 1,
        "budget_sims": 100,
        "seed": 1,
        "problem": {"kind": "synthetic", "depth": 4, "branching": 3},
    }
    if "budget_ticks" in overrides or "budget_secs" in overrides:
        del data["budget_sims"]
    data.update(overrides)
    data = {k: v for k, v in data.items() if v is not None}
    return RunConfig.from_dict(data)


@pytest.fixture
def cfg_factory():
    return make_cfg
