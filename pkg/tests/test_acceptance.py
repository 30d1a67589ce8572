"""Acceptance criteria at their stated tolerances.

Each test prints the criterion line; the lines are repeated in the pytest
terminal summary.  Run the file directly for the lines alone.
"""

import filecmp
from pathlib import Path

import pytest

from torusflow.acceptance import CRITERIA, verify_all

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def verify_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    return out, verify_all(out)


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1), ids=lambda n: f"criterion{n:02d}")
def test_criterion(verify_run, number):
    _, rep = verify_run
    res = next(r for r in rep.results if r.number == number)
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line


@pytest.mark.slow
def test_verify_stream_is_reproducible(verify_run, tmp_path):
    out, _ = verify_run
    verify_all(tmp_path)
    names = sorted(p.relative_to(out).as_posix() for p in out.rglob("*.ndjson"))
    assert "verify.ndjson" in names and len(names) > 1
    diff = [n for n in names if not filecmp.cmp(out / n, tmp_path / n, shallow=False)]
    assert not diff


if __name__ == "__main__":
    import sys
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        rep = verify_all(Path(d), echo=print)
    sys.exit(0 if rep.passed else 1)
