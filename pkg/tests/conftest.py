"""Shared fixtures and the acceptance-criteria terminal summary."""

from __future__ import annotations

import pytest
from hypothesis import settings

from sptparse import Sentence, Token, TemplateConfig, build_vocab, parse_conllu

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# One pass/fail line per acceptance criterion, echoed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


FIGURE_CONLLU = """\
# sent_id = fig-1
1\tHe\t_\tPRON\t_\t_\t2\tnsubj\t_\t_
2\tloves\t_\tVERB\t_\t_\t0\troot\t_\t_
3\this\t_\tPRON\t_\t_\t4\tposs\t_\t_
4\trabbits\t_\tNOUN\t_\t_\t2\tdobj\t_\t_
"""

FIGURE_FLAT = "[1][2][nsubj]He [2][0][root]loves [3][4][poss]his [4][2][dobj]rabbits"
FIGURE_MASKED = (
    "[1][HEAD][DEP]He [2][HEAD][DEP]loves [3][HEAD][DEP]his [4][HEAD][DEP]rabbits"
)


@pytest.fixture
def figure_sentence() -> Sentence:
    return parse_conllu(FIGURE_CONLLU)[0]


@pytest.fixture
def figure_vocab(figure_sentence):
    """Vocabulary over the four-word example, POS prompts off."""
    config = TemplateConfig(use_abs=True, use_pos=False, max_index=16)
    return build_vocab([[figure_sentence]], config), config


def make_sentence(heads_labels: list[tuple[int, str]], pos: str | None = "X") -> Sentence:
    tokens = tuple(
        Token(index=i + 1, form=f"w{i + 1}", head=h, label=lab, pos=pos)
        for i, (h, lab) in enumerate(heads_labels)
    )
    return Sentence(tokens=tokens)
