import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ast_attn.prompt import TokenClass, classify_tokens, parse_prompt_spec  # noqa: E402

RED_CUBE_SOURCE = """\
# "Red cube in a forest"
d_c = 7
sub = "Red cube" 0 3
sub = "in a forest" 3 7 background
"""

RED_CUBE_LEXICON = {
    "red": TokenClass.ATTRIBUTE,
    "cube": TokenClass.INSTANCE,
    "forest": TokenClass.BACKGROUND,
    "in": TokenClass.FILLER,
    "a": TokenClass.FILLER,
}


@pytest.fixture
def red_cube_spec():
    return classify_tokens(parse_prompt_spec(RED_CUBE_SOURCE), RED_CUBE_LEXICON)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
