"""Tests for run configuration models and CLI option helpers."""

import argparse
import json
import logging

import pytest
from pydantic import ValidationError

from deployers.cli.options import (
    EXIT_FAILURE,
    EXIT_INVALID,
    EXIT_IO,
    EXIT_TABLE,
    exit_code_for,
    load_run_config,
    output_location,
    parse_assignments,
    setup_storage,
)
from deployers.errors import (
    AnalysisError,
    ExtractionError,
    ScalingError,
    ScenarioError,
    SnapshotError,
    TableBalanceError,
    TableFormatError,
)
from deployers.models.config import LaborShareRule, RunConfig, set_dotted

logger = logging.getLogger("deployers.tests")


class TestRunConfig:
    def test_shipped_defaults(self):
        config = load_run_config(None, [], logger)
        assert config.inputs.sam == "data/mcaesp08.sam"
        assert config.model_dump(exclude={"inputs"}) == RunConfig().model_dump(exclude={"inputs"})

    def test_population_floor(self):
        with pytest.raises(ValidationError, match="minimum viable population"):
            RunConfig(n_active=10)

    def test_unknown_top_level_key(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"agents": 10})

    def test_hash_changes_with_any_parameter(self):
        base = RunConfig()
        assert base.config_hash() == RunConfig().config_hash()
        assert base.config_hash() != base.with_overrides({"household.kappa": 0.2}).config_hash()

    def test_with_overrides_validates(self):
        config = RunConfig().with_overrides({"seed": 9, "bank.risk.rho": 0.3})
        assert (config.seed, config.bank.risk.rho) == (9, 0.3)
        with pytest.raises(ValidationError):
            RunConfig().with_overrides({"household.kappa": 3.0})

    def test_set_dotted_unknown_path(self):
        data = {"a": {"b": 1}}
        set_dotted(data, "a.b", 2)
        assert data == {"a": {"b": 2}}
        for path in ("a.c", "x.b", "a.b.c"):
            with pytest.raises(KeyError):
                set_dotted(data, path, 0)

    def test_labor_share_overrides(self):
        rule = LaborShareRule(default=0.5, overrides={"A01": 0.7})
        assert rule.share("A01") == 0.7
        assert rule.share("C10") == 0.5


class TestLoadRunConfig:
    def test_file_then_assignments(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 3, "n_active": 400}))
        config = load_run_config(str(path), ["seed=4", "firm.technology=cobb_douglas"], logger)
        assert (config.seed, config.n_active, config.firm.technology) == (4, 400, "cobb_douglas")

    @pytest.mark.parametrize(
        "assignments", [["household.nope=1"], ["n_active=10"], ["kappa"]]
    )
    def test_bad_assignments(self, assignments):
        assert load_run_config(None, assignments, logger) is None

    def test_missing_file(self, tmp_path):
        assert load_run_config(str(tmp_path / "none.json"), [], logger) is None

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{seed: 3")
        assert load_run_config(str(path), [], logger) is None


def test_parse_assignments():
    assert parse_assignments(["a=1", "b=x", "c=true", "d=[1,2]"]) == {"a": 1, "b": "x", "c": True, "d": [1, 2]}
    with pytest.raises(ValueError):
        parse_assignments(["=1"])


def test_output_location_precedence(monkeypatch):
    monkeypatch.setenv("DEPLOYERS_OUTPUT_DIR", "/env/out")
    assert output_location(argparse.Namespace(output_folder="cli")) == "cli"
    assert output_location(argparse.Namespace(output_folder=None)) == "/env/out"
    monkeypatch.delenv("DEPLOYERS_OUTPUT_DIR")
    assert output_location(argparse.Namespace(), RunConfig(output_dir="cfg")) == "cfg"


def test_setup_storage(tmp_path):
    storage = setup_storage(str(tmp_path / "out"), logger)
    assert storage is not None
    assert list((tmp_path / "out").iterdir()) == []
    assert setup_storage("abfss://broken", logger) is None


@pytest.mark.parametrize(
    ("error", "code"),
    [
        (TableFormatError("bad", line=1), EXIT_TABLE),
        (TableBalanceError("H09_Households", 0.1, 1e-3), EXIT_TABLE),
        (ExtractionError("no FR"), EXIT_TABLE),
        (ScalingError("too few"), EXIT_TABLE),
        (SnapshotError("file", "missing"), EXIT_IO),
        (OSError("disk"), EXIT_IO),
        (ScenarioError("key"), EXIT_INVALID),
        (AnalysisError("window"), EXIT_FAILURE),
        (RuntimeError("boom"), EXIT_FAILURE),
    ],
)
def test_exit_codes(error, code):
    assert exit_code_for(error) == code
