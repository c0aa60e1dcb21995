import numpy as np
import pytest

from ecofl.scenario import default_scenario


@pytest.fixture
def cfg():
    return default_scenario()


@pytest.fixture
def small_cfg():
    # short mission for fast solver tests; the eight-slot bound needs a looser target and a smaller model
    return default_scenario(N=8, T=120.0, eps_G=40.0, Q=2e6)


def pytest_configure(config):
    np.set_printoptions(precision=6, suppress=True)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for ac in sorted(RESULTS):
        checks = RESULTS[ac]
        failed = [c for c in checks if not c[1]]
        status = "PASS" if not failed else "FAIL"
        tr.write_line(f"{ac} {status}: {len(checks) - len(failed)}/{len(checks)} checks"
                      + (f"; failing: {'; '.join(f'{c} ({d})' for c, _, d in failed)}" if failed else ""))
        for name, passed, detail in checks:
            tr.write_line(f"      {'ok' if passed else 'no'}  {name}  {detail}")
