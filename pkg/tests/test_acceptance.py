"""Acceptance criteria 1-13, each backed by one built-in suite config.

Every criterion appends one ``criterion N: PASS|FAIL ...`` line that the
terminal summary prints at the end of the run.
"""

import pytest

from nlvar.harness import run_experiment
from nlvar.suites import SUITES, suite_config, suite_names

from conftest import ACCEPTANCE_LINES

FIRST_RUN_CSV = {}


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def _fmt(v):
    return f"{v:.3g}" if isinstance(v, float) else str(v)


def _run_criterion(n, outdir):
    names = suite_names(n)
    assert names, f"no suite for criterion {n}"
    failed, shown = [], []
    for name in names:
        res = run_experiment(suite_config(name), out=outdir / name)
        FIRST_RUN_CSV[name] = (res.out_dir / "results.csv").read_bytes()
        for key, c in res.outcome.checks.items():
            label = f"{name}.{key}" if len(names) > 1 else key
            if isinstance(c["value"], dict):
                shown.append(f"{label}={'ok' if c['pass'] else 'failed'}")
            else:
                shown.append(f"{label}={_fmt(c['value'])}")
            if not c["pass"]:
                failed.append(f"{label}: value {_fmt(c['value'])} vs limit {_fmt(c['limit'])}")
    status = "PASS" if not failed else "FAIL"
    detail = "; ".join(failed) if failed else ", ".join(shown)
    ACCEPTANCE_LINES.append(f"criterion {n}: {status}  {detail}")
    assert not failed, "; ".join(failed)


@pytest.mark.parametrize("n", range(1, 13))
def test_criterion(n, outdir):
    _run_criterion(n, outdir)


def test_criterion_13_determinism(outdir):
    names = [k for k in SUITES if SUITES[k]["criterion"] is not None]
    mismatched = []
    for name in names:
        first = FIRST_RUN_CSV.get(name)
        if first is None:
            res = run_experiment(suite_config(name), out=outdir / "first" / name)
            first = (res.out_dir / "results.csv").read_bytes()
        again = run_experiment(suite_config(name), out=outdir / "rerun" / name)
        if (again.out_dir / "results.csv").read_bytes() != first:
            mismatched.append(name)
    status = "PASS" if not mismatched else "FAIL"
    detail = f"{len(names) - len(mismatched)}/{len(names)} configs byte-identical on rerun"
    if mismatched:
        detail += f"; differing: {', '.join(mismatched)}"
    ACCEPTANCE_LINES.append(f"criterion 13: {status}  {detail}")
    assert not mismatched
