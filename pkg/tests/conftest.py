import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from lppacking.lp_space import CoordId, SparsePoint, SpaceParams  # noqa: E402

P_VALUES = (1.0, 1.5, 2.0, 3.0)

coords = st.builds(CoordId, st.integers(1, 4), st.integers(0, 5))
values = st.floats(min_value=-10, max_value=10, allow_nan=False).filter(lambda v: abs(v) > 1e-6)
points = st.dictionaries(coords, values, max_size=6).map(SparsePoint)
exponents = st.sampled_from(P_VALUES)


@pytest.fixture(params=P_VALUES, ids=lambda p: f"p={p}")
def params(request):
    return SpaceParams(request.param)


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
