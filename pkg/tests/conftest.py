from dataclasses import replace

import pytest

from gtssm.compiler import compile_group
from gtssm.group_core import construct_group

TASK_SPECS = [
    "cyclic:2",
    "cyclic:6",
    "cyclic:24",
    "cyclic:60",
    "product:cyclic:2,cyclic:4",
    "product:cyclic:3,cyclic:6",
    "symmetric:3",
    "alternating:4",
]

_GROUPS = {}
_MODELS = {}


def group(spec):
    if spec not in _GROUPS:
        _GROUPS[spec] = construct_group(spec)
    return _GROUPS[spec]


def model(spec):
    if spec not in _MODELS:
        _MODELS[spec] = compile_group(group(spec))
    return _MODELS[spec]


@pytest.fixture(scope="session")
def S3():
    return group("symmetric:3")


@pytest.fixture(scope="session")
def C60():
    return group("cyclic:60")


@pytest.fixture(scope="session")
def A4():
    return group("alternating:4")


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, note = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {note}")


def negate_entry(m, r, c, t, j):
    """Copy of ``m`` with one lambda entry negated."""
    layer = m.layers[r]
    lam = layer.lam.copy()
    lam[c, t, j] = -lam[c, t, j]
    new = replace(layer, lam=lam)
    return replace(m, layers=m.layers[:r] + (new,) + m.layers[r + 1:])


def perturb_anchor(m, i, j, delta):
    """Copy of ``m`` with decoder anchor ``i`` moved by ``delta`` in coordinate ``j``."""
    anchors = m.decoder_anchors.copy()
    anchors[i, j] += delta
    return replace(m, decoder_anchors=anchors)
