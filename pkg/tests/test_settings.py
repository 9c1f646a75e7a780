"""Tests for the settings manager."""

import json

import pytest

from convexlab.core.settings import THREADS_ENV_VAR, LabSettings


@pytest.fixture
def settings(tmp_path, monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    return LabSettings(str(tmp_path / "config.json"), persist=False)


def test_defaults_are_valid(settings, tmp_path):
    assert settings.validate() == {}
    assert settings.get('mesh', 'n_levels') == [4, 8, 16, 32]
    assert settings.get('study', 'constraints') is None
    assert settings.get('nope') is None
    assert not (tmp_path / "config.json").exists()


def test_set_converts_values(settings):
    assert settings.set('study', 'degree', "2")
    assert settings.get('study', 'degree') == 2
    assert settings.set('mesh', 'domain', [1.0, 1.0, 2.0, 2.0])
    assert settings.get('mesh', 'domain') == [1.0, 1.0, 2.0, 2.0]
    assert settings.set('study', 'constraints', "conformal")
    assert settings.set('output', 'write_svg', 0)
    assert settings.get('output', 'write_svg') is False
    assert not settings.set('study', 'degree', "two")
    assert not settings.set('study', 'missing', 1)
    assert not settings.set('missing', 'degree', 1)


def test_validate_reports_sections(settings):
    settings.set('mesh', 'n_levels', [8, 4])
    settings.set('study', 'constraints', "concave")
    settings.set('study', 'alpha', 1.5)
    settings.set('solver', 'alpha', 2.5)
    errors = settings.validate()
    assert set(errors) == {"mesh", "study", "solver"}
    assert len(errors["study"]) == 2


def test_save_and_load(settings, tmp_path):
    settings.set('study', 'eta', 2.5)
    settings.set('mesh', 'kind', "mesh3")
    path = tmp_path / "saved.json"
    assert settings.save(str(path))

    loaded = LabSettings(str(path), persist=False)
    assert loaded.get('study', 'eta') == 2.5
    assert loaded.get('mesh', 'kind') == "mesh3"
    assert loaded.settings.first_run is False


def test_partial_file_keeps_other_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    path = tmp_path / "partial.json"
    path.write_text(json.dumps({"solver": {"max_iter": "500"}, "unknown": 1}))
    settings = LabSettings(str(path), persist=False)
    assert settings.get('solver', 'max_iter') == 500
    assert settings.get('solver', 'eps_abs') == 1e-8


def test_broken_file_is_reported(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    settings = LabSettings(str(path), persist=False)
    assert settings.load() is False


def test_persist_writes_default_file(tmp_path):
    path = tmp_path / "sub" / "config.json"
    LabSettings(str(path), persist=True)
    data = json.loads(path.read_text())
    assert data["mesh"]["kind"] == "mesh1"


def test_thread_environment_override(tmp_path, monkeypatch):
    monkeypatch.setenv(THREADS_ENV_VAR, "3")
    capped = LabSettings(str(tmp_path / "c.json"), persist=False)
    assert capped.get('study', 'threads') == 3
    assert capped.capped_threads(8) == 3
    assert capped.capped_threads(2) == 2
    monkeypatch.setenv(THREADS_ENV_VAR, "zero")
    ignored = LabSettings(str(tmp_path / "c.json"), persist=False)
    assert ignored.get('study', 'threads') == 1
    assert ignored.capped_threads(8) == 8
