"""Hand-built S3 tracker: a two-automaton cascade and the matching two-layer SSM.

Elements are written ``s^alpha r^beta`` with ``s = (12)`` and ``r = (123)``.
The first automaton holds ``q1 = ±1`` and flips on every ``s``.  The second
holds a cube root of unity and rotates by ``exp(-2πi beta/3)`` when the
*updated* ``q1`` is +1 and by the inverse when it is -1.

Both automaton coordinates are stored exactly as integer angle numerators
``p`` with value ``exp(2πi p/6)``, so the golden model never accumulates
rounding error.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import group_core as gc
from .errors import UnknownState
from .group_core import FiniteGroup
from .ssm import DcdSsm, FinitePrecisionConfig, LayerTable

ANGLE_DENOMINATOR = 6
S_LABEL, R_LABEL = "(12)", "(123)"


@lru_cache(maxsize=None)
def s3_group() -> FiniteGroup:
    return gc.symmetric(3)


@dataclass(frozen=True)
class S3Encoding:
    alpha: int
    beta: int

    def __post_init__(self):
        if self.alpha not in (0, 1) or self.beta not in (0, 1, 2):
            raise ValueError("alpha must be 0/1 and beta 0/1/2")


@dataclass(frozen=True)
class CascadeState:
    """Angles over ``ANGLE_DENOMINATOR``: q1 = exp(2πi p1/6), q2 = exp(2πi p2/6)."""

    p1: int = 0
    p2: int = 0

    def __post_init__(self):
        if self.p1 % 6 not in (0, 3) or self.p2 % 2:
            raise ValueError("q1 must be ±1 and q2 a cube root of unity")
        object.__setattr__(self, "p1", self.p1 % 6)
        object.__setattr__(self, "p2", self.p2 % 6)

    @property
    def q1(self) -> int:
        return 1 if self.p1 == 0 else -1

    @property
    def q2(self) -> complex:
        return cmath.exp(2j * math.pi * self.p2 / ANGLE_DENOMINATOR)

    def as_vector(self) -> np.ndarray:
        return np.array([self.q1, self.q2], dtype=np.complex128)


INITIAL_STATE = CascadeState(0, 0)


@lru_cache(maxsize=None)
def _word(alpha: int, beta: int) -> int:
    G = s3_group()
    s, r = G.index_of(S_LABEL), G.index_of(R_LABEL)
    return gc.multiply(G, gc.power(G, s, alpha), gc.power(G, r, beta))


def decode_s3(enc: S3Encoding) -> int:
    return _word(enc.alpha, enc.beta)


@lru_cache(maxsize=None)
def encode_s3(g: int) -> S3Encoding:
    for alpha in (0, 1):
        for beta in (0, 1, 2):
            if _word(alpha, beta) == g:
                return S3Encoding(alpha, beta)
    raise ValueError(f"{g} is not an S3 element index")


def cascade_step(state: CascadeState, enc: S3Encoding) -> CascadeState:
    p1 = state.p1 + 3 * enc.alpha
    sign = 1 if p1 % 6 == 0 else -1
    # rotation by exp(-2πi beta/3) is -2 beta sixths of a turn
    p2 = state.p2 - 2 * enc.beta * sign
    return CascadeState(p1, p2)


# Automaton state -> element, as (p1, p2) angle numerators.
_STATE_TABLE = {
    (0, 0): (0, 0),  # (1, 1) -> e
    (3, 0): (1, 0),  # (-1, 1) -> s
    (3, 4): (1, 2),  # (-1, e^{i4π/3}) -> s r^2
    (3, 2): (1, 1),  # (-1, e^{i2π/3}) -> s r
    (0, 4): (0, 1),  # (1, e^{-i2π/3}) -> r
    (0, 2): (0, 2),  # (1, e^{-i4π/3}) -> r^2
}


def cascade_decode(state: CascadeState) -> int:
    try:
        alpha, beta = _STATE_TABLE[(state.p1, state.p2)]
    except KeyError:
        raise UnknownState(f"no element for state {state}") from None
    return _word(alpha, beta)


def cascade_run(seq) -> list[int]:
    state = INITIAL_STATE
    out = []
    for g in seq:
        state = cascade_step(state, encode_s3(g))
        out.append(cascade_decode(state))
    return out


def cascade_closed_form(seq) -> CascadeState:
    """State from cumulative swap parity A and signed rotation count R.

    ``(exp(-iπA), exp(-2πi R/3))`` where each token contributes ``beta``
    signed by the first automaton's value after that token.
    """
    A = 0
    R = 0
    for g in seq:
        enc = encode_s3(g)
        A = (A + enc.alpha) % 2
        R += enc.beta * (1 if A == 0 else -1)
    return CascadeState(3 * A, -2 * R)


def analytic_model(precision: FinitePrecisionConfig | None = None) -> DcdSsm:
    """Two-layer SSM equal to the cascade.

    Layer 1: ``lam = exp(-iπ alpha)``.  Layer 2 is keyed on the pre-update
    value of layer 1; the post-update value it needs is that times
    ``(-1)^alpha``, so ``lam = exp(-2πi beta q1_post / 3)``.
    """
    precision = precision or FinitePrecisionConfig()
    digits = precision.round_digits
    G = s3_group()

    def rounded(z: complex) -> complex:
        return complex(round(z.real, digits), round(z.imag, digits))

    lam1 = np.zeros((1, G.order, 1), dtype=np.complex128)
    lam2 = np.zeros((2, G.order, 1), dtype=np.complex128)
    q1_anchors = [1, -1]
    for g in range(G.order):
        enc = encode_s3(g)
        lam1[0, g, 0] = rounded(cmath.exp(-1j * math.pi * enc.alpha))
        for c, q1_pre in enumerate(q1_anchors):
            q1_post = q1_pre * (-1) ** enc.alpha
            lam2[c, g, 0] = rounded(cmath.exp(-2j * math.pi * enc.beta * q1_post / 3))
    anchors = []
    elements = []
    for (p1, p2), (alpha, beta) in _STATE_TABLE.items():
        st = CascadeState(p1, p2)
        anchors.append([rounded(complex(st.q1)), rounded(st.q2)])
        elements.append(_word(alpha, beta))
    return DcdSsm(
        layers=(
            LayerTable(1, 0, np.zeros((1, 0)), lam1, np.zeros_like(lam1)),
            LayerTable(1, 1, np.array(q1_anchors, dtype=np.complex128)[:, None], lam2,
                       np.zeros_like(lam2)),
        ),
        h0=(np.ones(1), np.ones(1)),
        decoder_anchors=np.array(anchors),
        decoder_elements=np.array(elements),
        group_spec=G.spec,
        precision=precision,
    )


def reproduce_cayley() -> list[list[int]]:
    """Run the cascade on every pair ``[a, b]`` and decode the final state."""
    G = s3_group()
    return [[cascade_run([a, b])[-1] for b in range(G.order)] for a in range(G.order)]


# Published S3 product table, transcribed verbatim (row ⊙ column). It is not
# associative, so no group reproduces it entirely; see tests/test_s3_reference.py.
PUBLISHED_CAYLEY_LABELS = (
    ("e", "(12)", "(13)", "(23)", "(123)", "(132)"),
    ("(12)", "e", "(132)", "(123)", "(13)", "(23)"),
    ("(13)", "(123)", "e", "(132)", "(23)", "(12)"),
    ("(23)", "(132)", "(123)", "e", "(12)", "(13)"),
    ("(123)", "(13)", "(23)", "(12)", "(132)", "e"),
    ("(132)", "(23)", "(12)", "(13)", "e", "(123)"),
)


def published_cayley() -> list[list[int]]:
    G = s3_group()
    return [[G.index_of(x) for x in row] for row in PUBLISHED_CAYLEY_LABELS]


def state_table() -> list[tuple[tuple[int, complex], str]]:
    """The six automaton states with their decoded labels."""
    G = s3_group()
    rows = []
    for (p1, p2), (alpha, beta) in _STATE_TABLE.items():
        st = CascadeState(p1, p2)
        rows.append(((st.q1, st.q2), G.label(_word(alpha, beta))))
    return rows
