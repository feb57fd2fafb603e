"""Check SSMs against brute-force prefix products of the group.

``verify_exhaustive`` covers every token sequence up to a length.  Sequences
are grouped into classes that share the same quantized model state and the
same expected prefix product: the future behaviour of every member of a
class is identical, so expanding one representative per class checks all of
them.  Classes are kept in lexicographic order of their smallest member,
which makes the first counterexample the shortest, then lexicographically
least, failing sequence.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import group_core as gc
from .affine import AffineMap1D, divergence_witness, is_diverged
from .errors import BudgetExceeded, DegenerateCenters
from .group_core import FiniteGroup
from .sampling import STREAM_VERSION, token_batch
from .ssm import NO_ELEMENT, DcdSsm, Trace, quantize, run_sequential

EXHAUSTIVE_BUDGET = 10**8
RANDOM_CHUNK = 1000


@dataclass
class Counterexample:
    sequence: list[int]
    step: int  # 0-based position of the first wrong output
    expected: int
    decoded: int | None


@dataclass
class TrackingReport:
    passed: bool
    mode: str
    sequences_checked: int = 0
    prefixes_checked: int = 0
    first_counterexample: Counterexample | None = None
    max_modulus_drift: float = 0.0
    max_decode_distance: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "TrackingReport":
        doc = dict(doc)
        doc.pop("verdict", None)
        cx = doc.get("first_counterexample")
        if cx is not None:
            doc["first_counterexample"] = Counterexample(**cx)
        return cls(**doc)


def _step_classes(model: DcdSsm, joint: np.ndarray, tok: np.ndarray):
    """One step from explicit joint states; returns (new joint, alive, drift)."""
    splits = np.cumsum(model.dims)[:-1]
    pre = np.split(joint, splits, axis=1)
    new, alive, drift_max = [], np.ones(len(tok), dtype=bool), 0.0
    for r, layer in enumerate(model.layers):
        ctx = model.context_index(r, pre)
        safe = np.maximum(ctx, 0)
        lam, b = layer.lam[safe, tok], layer.b[safe, tok]
        miss = (ctx < 0) | np.isnan(lam).any(axis=1) | np.isnan(b).any(axis=1)
        alive &= ~miss
        h = np.where(miss[:, None], np.nan, lam * pre[r] + b)
        h, drift = quantize(h, model.precision, return_drift=True)
        if alive.any():
            drift_max = max(drift_max, float(np.nanmax(drift[alive])))
        new.append(h)
    return np.concatenate(new, axis=1), alive, drift_max


def verify_exhaustive(model: DcdSsm, G: FiniteGroup, max_len: int,
                      budget: int = EXHAUSTIVE_BUDGET) -> TrackingReport:
    """Check every sequence of length 1..max_len at every prefix."""
    if max_len < 0:
        raise ValueError("max_len must be nonnegative")
    n = G.order
    report = TrackingReport(True, "exhaustive", details={"max_len": max_len, "classes": []})
    joint = np.concatenate(model.h0)[None, :]
    expected = np.array([G.identity_index])
    counts = [1]  # Python ints: sequence counts overflow int64 quickly
    parents: list[np.ndarray] = []
    tokens_at: list[np.ndarray] = []
    work = 0
    for depth in range(1, max_len + 1):
        m = len(expected)
        work += m * n
        if work > budget:
            raise BudgetExceeded(f"exhaustive check needs more than {budget} class expansions")
        parent = np.repeat(np.arange(m), n)
        tok = np.tile(np.arange(n), m)
        new_joint, alive, drift = _step_classes(model, joint[parent], tok)
        want = G.cayley[expected[parent], tok]
        got, dist = model.decode_joint(new_joint)
        got = np.where(alive, got, NO_ELEMENT)
        report.max_modulus_drift = max(report.max_modulus_drift, drift)
        fin = dist[np.isfinite(dist)]
        if fin.size:
            report.max_decode_distance = max(report.max_decode_distance, float(fin.max()))
        level_total = sum(counts) * n
        bad = np.flatnonzero(got != want)
        if bad.size:
            i = int(bad[0])
            seq = _reconstruct(parents, tokens_at, int(parent[i])) + [int(tok[i])]
            dec = int(got[i])
            report.passed = False
            report.first_counterexample = Counterexample(
                seq, depth - 1, int(want[i]), None if dec == NO_ELEMENT else dec)
            # sequences of this length before the failing one were all fine
            report.sequences_checked += sum(counts[: int(parent[i])]) * n + int(tok[i]) + 1
            report.prefixes_checked = report.sequences_checked
            return report
        report.sequences_checked += level_total
        # merge classes with identical state and expected element
        canon = new_joint + 0.0  # fold -0.0 into 0.0
        key = np.concatenate([
            np.ascontiguousarray(canon.real).view(np.uint8).reshape(len(tok), -1),
            np.ascontiguousarray(canon.imag).view(np.uint8).reshape(len(tok), -1),
            want.astype(np.int64).view(np.uint8).reshape(len(tok), -1),
        ], axis=1)
        _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        keep = first[order]
        new_counts = [0] * len(keep)
        for src, dst in zip(parent.tolist(), rank[inverse.ravel()].tolist()):
            new_counts[dst] += counts[src]
        parents.append(parent[keep])
        tokens_at.append(tok[keep])
        joint, expected, counts = new_joint[keep], want[keep], new_counts
        report.details["classes"].append(len(keep))
    report.prefixes_checked = report.sequences_checked
    return report


def _reconstruct(parents, tokens_at, idx: int) -> list[int]:
    seq = []
    for level in range(len(parents) - 1, -1, -1):
        seq.append(int(tokens_at[level][idx]))
        idx = int(parents[level][idx])
    return seq[::-1]


def verify_random(model: DcdSsm, G: FiniteGroup, count: int, length: int, seed: int,
                  chunk: int = RANDOM_CHUNK) -> TrackingReport:
    """``count`` uniform sequences of ``length`` tokens (see ``sampling``)."""
    report = TrackingReport(True, "random", details={
        "count": count, "len": length, "seed": seed, "stream": STREAM_VERSION})
    if length == 0 or count == 0:
        report.sequences_checked = count
        return report
    for start in range(0, count, chunk):
        k = min(chunk, count - start)
        toks = token_batch(seed, k, length, G.order, start=start)
        trace = Trace()
        got = run_sequential(model, toks, trace)
        want = gc.prefix_products_batch(G, toks)
        report.max_modulus_drift = max(report.max_modulus_drift, trace.max_modulus_drift)
        report.max_decode_distance = max(report.max_decode_distance, trace.max_anchor_distance)
        bad = got != want
        if bad.any():
            row = int(np.flatnonzero(bad.any(axis=1))[0])
            t = int(np.flatnonzero(bad[row])[0])
            dec = int(got[row, t])
            report.passed = False
            report.first_counterexample = Counterexample(
                toks[row].tolist(), t, int(want[row, t]), None if dec == NO_ELEMENT else dec)
            report.sequences_checked += row + 1
            report.prefixes_checked += row * length + t + 1
            return report
        report.sequences_checked += k
        report.prefixes_checked += k * length
    return report


@dataclass
class DriftReport:
    max_modulus_drift: float  # | |h_j| - 1 | before projection, worst step and coordinate
    max_post_drift: float  # same after the precision regime
    max_anchor_distance: float


def drift_probe(model: DcdSsm, seq) -> DriftReport:
    trace = Trace()
    run_sequential(model, np.asarray([list(seq)], dtype=np.int64).reshape(1, -1), trace)
    return DriftReport(trace.max_modulus_drift, trace.max_post_drift, trace.max_anchor_distance)


@dataclass
class DivergenceSummary:
    alpha1: int
    alpha2: int
    block_length: int
    translation: complex
    displacements: list[float]  # |x_k - x_0| after each block
    expected_final: float
    relative_error: float
    monotone: bool
    crossing_step: int | None  # first step with |x| > inf_threshold during the run
    projected_crossing_step: int  # step at which the linear drift crosses the threshold


def divergence_demo(lambda1: complex, c1: complex, lambda2: complex, c2: complex,
                    repeats: int, x0: complex = 0j, inf_threshold: float = 1e12,
                    bound: int = 720, tol: float = 1e-9) -> DivergenceSummary:
    """Drive two neutral rotations with distinct centers apart by repeating a witness block."""
    if abs(complex(c1) - complex(c2)) <= tol:
        raise DegenerateCenters("rotation centers coincide")
    m1 = AffineMap1D.rotation(lambda1, c1)
    m2 = AffineMap1D.rotation(lambda2, c2)
    w = divergence_witness(m1, m2, bound=bound, tol=tol)
    block_len = w.alpha1 + w.alpha2
    x = complex(x0)
    disp = []
    crossing = None
    step_no = 0
    for _ in range(repeats):
        for m, times in ((m1, w.alpha1), (m2, w.alpha2)):
            for _ in range(times):
                x = m(x)
                step_no += 1
                if crossing is None and (is_diverged(x) or abs(x) > inf_threshold):
                    crossing = step_no
        disp.append(abs(x - x0))
    tau = w.translation
    expected = repeats * abs(tau)
    rel = abs(disp[-1] - expected) / expected if repeats else 0.0
    monotone = all(b > a for a, b in zip(disp, disp[1:]))
    # smallest k with |x0 + k tau| > threshold
    a = abs(tau) ** 2
    bq = 2 * (complex(x0) * tau.conjugate()).real
    cq = abs(x0) ** 2 - inf_threshold ** 2
    k_star = (-bq + math.sqrt(bq * bq - 4 * a * cq)) / (2 * a)
    projected = (math.floor(k_star) + 1) * block_len
    return DivergenceSummary(w.alpha1, w.alpha2, block_len, tau, disp, expected, rel,
                             monotone, crossing, projected)
