import numpy as np
import pytest

from coreg.pullback import N_BINS, Modality, Pullback, RawFrame, SideBranch


def make_frame(idx, area=5.0, is_ed=True, position=None, radius=None, side_branch=None,
               calcium=None):
    if radius is None:
        radius = [1.2] * N_BINS
    if calcium is None:
        calcium = [0] * N_BINS
    elif isinstance(calcium, int):
        calcium = [1] * calcium + [0] * (N_BINS - calcium)
    if isinstance(side_branch, tuple):
        side_branch = SideBranch(*side_branch)
    return RawFrame(idx, float(idx * 0.5 if position is None else position), is_ed, float(area),
                    radius, calcium, side_branch)


def make_pullback(n=5, modality="IVUS", ed=None, spacing=0.5, **kw):
    frames = []
    for k in range(n):
        is_ed = True if ed is None else k in ed
        frames.append(make_frame(k, is_ed=is_ed, position=k * spacing, **kw))
    return Pullback(Modality.parse(modality), frames, spacing)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance lines collected during the run and echoed in the terminal summary.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
