"""One-dimensional complex affine maps ``h -> lam * h + b``.

A diagonal SSM coordinate evolves by exactly such maps, so this module holds
the scalar toolkit: classification of the long-run behaviour, composition,
closed-form iteration, and the witnesses used to drive two neutral rotations
with different centers apart.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCenters, NotFound

NEUTRAL_TOL = 1e-9
INF_THRESHOLD = 1e12
INF = complex(math.inf, 0.0)


def is_diverged(z: complex) -> bool:
    return not cmath.isfinite(z)


@dataclass(frozen=True)
class AffineMap1D:
    lam: complex
    b: complex = 0j

    def __post_init__(self):
        lam, b = complex(self.lam), complex(self.b)
        if not (cmath.isfinite(lam) and cmath.isfinite(b)):
            raise ValueError("affine map components must be finite")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "b", b)

    def __call__(self, x: complex) -> complex:
        return self.lam * x + self.b

    @classmethod
    def identity(cls) -> "AffineMap1D":
        return cls(1, 0)

    @classmethod
    def rotation(cls, lam: complex, center: complex) -> "AffineMap1D":
        """Map multiplying distances to ``center`` by ``lam``."""
        return cls(lam, (1 - lam) * center)


class Dynamics(enum.Enum):
    CONTRACTION = "contraction"
    NEUTRAL_ROTATION = "neutral_rotation"
    ALL_FIXED = "all_fixed"
    TRANSLATION = "translation"
    EXPANSIVE = "expansive"


@dataclass(frozen=True)
class DynamicsClass:
    kind: Dynamics
    center: complex | None = None


def classify(m: AffineMap1D, tol: float = NEUTRAL_TOL) -> DynamicsClass:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    r = abs(m.lam)
    if abs(r - 1) <= tol:
        if abs(m.lam - 1) <= tol:
            kind = Dynamics.ALL_FIXED if abs(m.b) <= tol else Dynamics.TRANSLATION
            return DynamicsClass(kind)
        return DynamicsClass(Dynamics.NEUTRAL_ROTATION, fixed_point(m))
    kind = Dynamics.CONTRACTION if r < 1 else Dynamics.EXPANSIVE
    return DynamicsClass(kind, fixed_point(m))


def fixed_point(m: AffineMap1D) -> complex | None:
    if m.lam == 1:
        return None
    return m.b / (1 - m.lam)


def compose(f: AffineMap1D, g: AffineMap1D) -> AffineMap1D:
    """``g ∘ f``: apply ``f`` first."""
    return AffineMap1D(g.lam * f.lam, g.lam * f.b + g.b)


def iterate(m: AffineMap1D, x0: complex, t: int, inf_threshold: float = INF_THRESHOLD) -> complex:
    x = complex(x0)
    for _ in range(t):
        x = m.lam * x + m.b
        if abs(x) > inf_threshold or not cmath.isfinite(x):
            return INF
    return x


def closed_form(m: AffineMap1D, x0: complex, t: int, inf_threshold: float = INF_THRESHOLD) -> complex:
    """State after ``t`` steps, ``lam^t (x0 - c) + c`` (or ``x0 + t b`` when lam = 1).

    Evaluated as ``lam^t x0 + b (lam^t - 1)/(lam - 1)`` with ``expm1``/``log1p``
    so the geometric factor stays accurate as lam approaches 1.  Magnitudes
    above ``inf_threshold`` return the ``INF`` sentinel.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    x0 = complex(x0)
    if t == 0:
        x = x0
    elif m.lam == 1:
        x = x0 + t * m.b
    elif m.lam == 0:
        x = m.b
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            dl = m.lam - 1
            if abs(dl) < 0.5:
                geom = complex(np.expm1(t * np.log1p(np.complex128(dl)))) / dl
            else:
                geom = (m.lam ** t - 1) / dl
            x = m.lam ** t * x0 + m.b * geom
    if not cmath.isfinite(x) or abs(x) > inf_threshold:
        return INF
    return x


def neutral_translation(lam: complex, c1: complex, c2: complex, tol: float = NEUTRAL_TOL) -> complex:
    """Net shift from rotating by ``lam`` about ``c1`` then by ``conj(lam)`` about ``c2``."""
    lam = complex(lam)
    if abs(abs(lam) - 1) > tol or abs(lam - 1) <= tol:
        raise ValueError("lam must be unit modulus and different from 1")
    if c1 == c2:
        raise DegenerateCenters("centers coincide; the translation would be zero")
    return (1 - lam.conjugate()) * (c2 - c1)


@dataclass(frozen=True)
class Witness:
    alpha1: int
    alpha2: int
    residual: float  # |lam1^alpha1 lam2^alpha2 - 1|
    block: AffineMap1D
    translation: complex

    def __iter__(self):
        return iter((self.alpha1, self.alpha2))


def divergence_witness(
    m1: AffineMap1D, m2: AffineMap1D, bound: int = 720, tol: float = NEUTRAL_TOL
) -> Witness:
    """Powers (a1, a2) with ``lam1^a1 lam2^a2 ≈ 1`` and neither factor ≈ 1.

    Among all pairs in ``1..bound`` meeting ``tol`` the shortest block wins
    (smallest ``a1 + a2``, then smallest ``a1``).  Running ``m1`` a1 times and
    then ``m2`` a2 times is then a nonzero translation.
    """
    k1, k2 = classify(m1, tol), classify(m2, tol)
    if k1.kind is not Dynamics.NEUTRAL_ROTATION or k2.kind is not Dynamics.NEUTRAL_ROTATION:
        raise ValueError("both maps must be neutral rotations")
    if abs(k1.center - k2.center) <= tol:
        raise DegenerateCenters("rotations share a center")
    exps = np.arange(1, bound + 1)
    # unit-modulus powers via angles keep the search free of magnitude drift
    p1 = np.exp(1j * cmath.phase(m1.lam) * exps) * abs(m1.lam) ** exps
    p2 = np.exp(1j * cmath.phase(m2.lam) * exps) * abs(m2.lam) ** exps
    resid = np.abs(p1[:, None] * p2[None, :] - 1)
    ok = (resid <= tol) & (np.abs(p1 - 1) > tol)[:, None] & (np.abs(p2 - 1) > tol)[None, :]
    if not ok.any():
        raise NotFound(f"no exponent pair up to {bound} within {tol}")
    i, j = np.nonzero(ok)
    best = np.lexsort((i, i + j))[0]
    a1, a2 = int(exps[i[best]]), int(exps[j[best]])
    block = power_map(m1, a1)
    block = compose(block, power_map(m2, a2))
    mu1 = complex(p1[i[best]])
    translation = (1 - mu1.conjugate()) * (k2.center - k1.center)
    return Witness(a1, a2, float(resid[i[best], j[best]]), block, translation)


def power_map(m: AffineMap1D, k: int) -> AffineMap1D:
    """``m`` composed with itself ``k`` times."""
    out = AffineMap1D.identity()
    base = m
    while k:
        if k & 1:
            out = compose(out, base)
        base = compose(base, base)
        k >>= 1
    return out
