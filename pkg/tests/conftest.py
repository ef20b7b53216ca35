import pytest

from luscan.config import default_config
from luscan.scripts import full_blue_script
from luscan.session import SessionRuntime


@pytest.fixture(scope="session")
def blue_session(tmp_path_factory):
    """One complete scripted protocol run, shared by integration tests."""
    out = tmp_path_factory.mktemp("sessions") / "blue"
    cfg = default_config()
    runtime = SessionRuntime(cfg, out_dir=out)
    code = runtime.run_script(full_blue_script(cfg))
    return {"dir": out, "code": code, "cfg": cfg,
            "report": runtime.build_report()}


@pytest.fixture(scope="session")
def surrogate_session(tmp_path_factory):
    """A second complete run with a slightly different force configuration."""
    out = tmp_path_factory.mktemp("sessions") / "surrogate"
    cfg = default_config()
    cfg["session"]["seed"] = 777
    cfg["session"]["label"] = "manual-surrogate"
    cfg["spring"]["m_cw_kg"] = 0.51
    runtime = SessionRuntime(cfg, out_dir=out)
    code = runtime.run_script(full_blue_script(cfg))
    return {"dir": out, "code": code, "cfg": cfg,
            "report": runtime.build_report()}
