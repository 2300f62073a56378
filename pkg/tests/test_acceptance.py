"""The twelve acceptance criteria at their stated tolerances and runtime limits.

Each test prints one PASS/FAIL line (visible with ``pytest -s`` or in the
captured output of a failure) and asserts the verdict.
"""

import pytest

from transwave import acceptance


@pytest.mark.parametrize("check", acceptance.ALL, ids=lambda c: c.__name__)
def test_criterion(check):
    result = check()
    print(result.line)
    assert result.passed, result.line


def test_criterion_12(tmp_path):
    result = acceptance.criterion_12(tmp_path)
    print(result.line)
    assert result.passed, result.line
