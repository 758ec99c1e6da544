"""Shared fixtures: a one-sector toy SAM, its agent economy and the sample tables."""

from pathlib import Path

import pytest

from deployers.models.config import RunConfig
from deployers.models.tables import IcioTable, SamTable, ScaledTargets
from deployers.services.economy import CountryState, build_country_state
from deployers.services.figaro import read_figaro
from deployers.services.sam_format import read_sam
from deployers.services.storage import LocalStorageBackend
from deployers.services.targets import scale_to_agents

ROOT = Path(__file__).parent.parent
FIXTURES = Path(__file__).parent / "fixtures"
DATA = ROOT / "data"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def toy_sam_path() -> Path:
    return FIXTURES / "toy.sam"


@pytest.fixture
def toy_sam(toy_sam_path: Path) -> SamTable:
    return read_sam(toy_sam_path)


@pytest.fixture
def toy_config() -> RunConfig:
    return RunConfig(n_active=200, seed=7)


@pytest.fixture
def toy_targets(toy_sam: SamTable, toy_config: RunConfig) -> ScaledTargets:
    return scale_to_agents(toy_sam, toy_config.n_active)


@pytest.fixture
def toy_state(toy_targets: ScaledTargets, toy_config: RunConfig) -> CountryState:
    return build_country_state(toy_targets, toy_config)


@pytest.fixture
def make_toy_state(toy_targets: ScaledTargets, toy_config: RunConfig):
    """Factory for independent toy states, optionally with another seed."""

    def make(seed: int | None = None) -> CountryState:
        config = toy_config if seed is None else toy_config.model_copy(update={"seed": seed})
        return build_country_state(toy_targets, config)

    return make


@pytest.fixture
def icio() -> IcioTable:
    return read_figaro(DATA / "synthetic_icio_2x2.csv")


@pytest.fixture
def storage(tmp_path: Path) -> LocalStorageBackend:
    return LocalStorageBackend(tmp_path / "out")
