"""Named model fixtures shipped with the package.

Five continuous mechanisms and one discrete process cover every analytic
regime the library handles: the quadratic critical case, the critical
power case, two almost surely explosive stable-jump cases (with and
without a linear part), a finite-activity heavy-tail case, and the
heavy-tailed discrete reproduction law.
"""

from __future__ import annotations

import json
from importlib import resources

from ..discrete import DiscreteBranching, discrete_from_config
from ..errors import ContractError
from ..mechanisms import BranchingMechanism, mechanism_from_config

CONTINUOUS_FIXTURES = (
    "feller",
    "stable_plus_half",
    "stable_minus_half",
    "linear_stable_minus",
    "truncated_pareto_half",
)
DISCRETE_FIXTURES = ("sibuya_half",)
ALL_FIXTURES = CONTINUOUS_FIXTURES + DISCRETE_FIXTURES


def fixture_config(name: str) -> dict:
    """The raw key-value description of a named fixture."""
    if name not in ALL_FIXTURES:
        raise ContractError(f"unknown fixture {name!r}; available: {', '.join(ALL_FIXTURES)}")
    blob = resources.files(__package__).joinpath(f"{name}.json").read_text(encoding="utf-8")
    return json.loads(blob)


def model_from_config(cfg: dict):
    """Dispatch a config mapping to a mechanism or a discrete process."""
    if isinstance(cfg, dict) and cfg.get("family") == "dsbp":
        return discrete_from_config(cfg)
    return mechanism_from_config(cfg)


def load_fixture(name: str) -> BranchingMechanism | DiscreteBranching:
    return model_from_config(fixture_config(name))


def load_model(path: str) -> BranchingMechanism | DiscreteBranching:
    """Read a mechanism or discrete process from a JSON text file."""
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_config(json.load(fh))
