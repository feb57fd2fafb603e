"""Multi-layer diagonal complex SSMs with tabular, input-dependent transitions.

Layer ``r`` holds a diagonal state ``h in C^d``.  On each token every layer is
updated, in order, by ``h_j <- lam_j h_j + b_j`` where ``(lam, b)`` is looked
up from a table keyed on ``(context, token)``.  The context is the
*pre-update* joint state of layers ``1..r-1`` snapped to the nearest of a
finite list of context anchors.  After the update each coordinate goes
through the finite-precision regime (unit-circle projection, decimal
rounding, divergence pinning).  The joint state is decoded to a group
element by nearest-anchor lookup.

Evaluation is batched over sequences: ``run_sequential`` steps through time,
``run_scan`` evaluates each layer with an affine prefix scan over time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .affine import AffineMap1D, compose
from .errors import InvalidModel, MissingTableEntry, StateExplosion

MODEL_FORMAT = "gtssm-model/1"
UNIT_BAND = 1e-6  # coordinates this close to the unit circle get projected onto it
MAX_REACHABLE = 10**6
NO_ELEMENT = -1  # decoded output marker for a decode miss


@dataclass(frozen=True)
class FinitePrecisionConfig:
    round_digits: int = 12
    renormalize_unit: bool = True
    decode_tolerance: float = 1e-6
    inf_threshold: float = 1e12

    def __post_init__(self):
        if not 4 <= self.round_digits <= 15:
            raise ValueError("round_digits must lie in [4, 15]")
        if self.decode_tolerance < 0:
            raise ValueError("decode_tolerance must be nonnegative")


def quantize(h: np.ndarray, precision: FinitePrecisionConfig, return_drift: bool = False):
    """Apply the finite-precision regime to complex states (any shape).

    Idempotent: coordinates already on the unit circle up to the rounding
    resolution are left alone by the projection step.
    """
    h = np.asarray(h, dtype=np.complex128)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        mod = np.abs(h)
        drift = np.abs(mod - 1)
        if precision.renormalize_unit:
            resolution = 10.0 ** -precision.round_digits
            snap = (drift <= UNIT_BAND) & (drift > resolution)
            h = np.where(snap, h / np.where(snap, mod, 1), h)
        out = np.round(h.real, precision.round_digits) + 1j * np.round(h.imag, precision.round_digits)
        bad = ~np.isfinite(out) | (np.abs(out) > precision.inf_threshold)
        # NaN marks a lost state (missing table entry); keep it distinct from divergence
        lost = np.isnan(h)
        out = np.where(bad & ~lost, complex(math.inf, 0.0), out)
    if return_drift:
        return out, drift
    return out


def _as_real(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.complex128)
    return np.concatenate([points.real, points.imag], axis=-1)


class AnchorIndex:
    """Nearest-anchor lookup with a rejection radius."""

    def __init__(self, anchors: np.ndarray, tolerance: float):
        self.anchors = np.asarray(anchors, dtype=np.complex128)
        self.tolerance = tolerance
        self.dim = self.anchors.shape[1]
        self._tree = cKDTree(_as_real(self.anchors)) if self.dim else None

    def query(self, points: np.ndarray):
        """Return (index or -1, distance) for each row of ``points``."""
        points = np.asarray(points, dtype=np.complex128)
        lead = points.shape[:-1]
        flat = points.reshape(-1, self.dim)
        idx = np.full(flat.shape[0], -1, dtype=np.int64)
        dist = np.full(flat.shape[0], np.inf)
        if self.dim == 0:
            idx[:] = 0
            dist[:] = 0.0
            return idx.reshape(lead), dist.reshape(lead)
        ok = np.isfinite(flat).all(axis=1)
        if ok.any():
            d, i = self._tree.query(_as_real(flat[ok]), k=1)
            hit = d <= self.tolerance
            sub = np.where(hit, i, -1)
            idx[ok] = sub
            dist[ok] = d
        return idx.reshape(lead), dist.reshape(lead)


@dataclass(frozen=True, eq=False)
class LayerTable:
    """One diagonal layer.

    ``lam`` and ``b`` have shape ``(n_contexts, n_tokens, dim)``; NaN entries
    are contexts that were never compiled.  ``context_anchors`` has shape
    ``(n_contexts, sum of earlier layer dims)``; it is ``(1, 0)`` for a layer
    that reads no earlier layers.
    """

    dim: int
    context_arity: int
    context_anchors: np.ndarray
    lam: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("context_anchors", "lam", "b"):
            arr = np.array(getattr(self, name), dtype=np.complex128)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.lam.ndim != 3 or self.lam.shape[2] != self.dim:
            raise InvalidModel("lam table must have shape (contexts, tokens, dim)")
        if self.b.shape != self.lam.shape:
            raise InvalidModel("b table must match lam table shape")
        if self.context_anchors.shape[0] != self.lam.shape[0]:
            raise InvalidModel("one context anchor per table row is required")

    @property
    def n_contexts(self) -> int:
        return self.lam.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.lam.shape[1]

    def entry(self, context: int, token: int) -> tuple[np.ndarray, np.ndarray]:
        lam, b = self.lam[context, token], self.b[context, token]
        if np.isnan(lam).any() or np.isnan(b).any():
            raise MissingTableEntry(f"no transition for context {context}, token {token}")
        return lam, b


@dataclass(frozen=True, eq=False)
class DcdSsm:
    layers: tuple[LayerTable, ...]
    h0: tuple[np.ndarray, ...]
    decoder_anchors: np.ndarray
    decoder_elements: np.ndarray
    group_spec: str
    precision: FinitePrecisionConfig = field(default_factory=FinitePrecisionConfig)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        h0 = tuple(np.array(h, dtype=np.complex128).reshape(-1) for h in self.h0)
        object.__setattr__(self, "h0", h0)
        anchors = np.array(self.decoder_anchors, dtype=np.complex128)
        anchors = anchors.reshape(len(anchors), -1)
        elems = np.array(self.decoder_elements, dtype=np.int64)
        object.__setattr__(self, "decoder_anchors", anchors)
        object.__setattr__(self, "decoder_elements", elems)
        self._validate()
        tol = self.precision.decode_tolerance
        object.__setattr__(self, "_decoder", AnchorIndex(anchors, tol))
        object.__setattr__(
            self, "_contexts", tuple(AnchorIndex(l.context_anchors, tol) for l in self.layers)
        )

    def _validate(self):
        if len(self.h0) != len(self.layers):
            raise InvalidModel("one initial state per layer is required")
        offset = 0
        tokens = {l.n_tokens for l in self.layers}
        if len(tokens) > 1:
            raise InvalidModel("layers disagree on the token alphabet")
        for r, layer in enumerate(self.layers):
            if layer.context_arity != r and layer.context_arity != 0:
                raise InvalidModel("layer context must read all earlier layers or none")
            want = offset if layer.context_arity else 0
            if layer.context_anchors.shape[1] != want:
                raise InvalidModel(f"layer {r} context anchors have the wrong width")
            if self.h0[r].shape != (layer.dim,):
                raise InvalidModel(f"layer {r} initial state has the wrong size")
            mags = np.abs(layer.lam[~np.isnan(layer.lam)])
            if (mags > 1 + 1e-9).any():
                raise InvalidModel(f"layer {r} has an expansive transition")
            offset += layer.dim
        if self.decoder_anchors.shape[1] != offset:
            raise InvalidModel("decoder anchors must span the joint state")
        if len(self.decoder_elements) != len(self.decoder_anchors):
            raise InvalidModel("one element per decoder anchor is required")
        if len(self.decoder_anchors) > 1:
            pts = _as_real(self.decoder_anchors)
            d, _ = cKDTree(pts).query(pts, k=2)
            if d[:, 1].min() <= 2 * self.precision.decode_tolerance:
                raise InvalidModel("decoder anchors closer than twice the decode tolerance")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_tokens(self) -> int:
        return self.layers[0].n_tokens if self.layers else 0

    @property
    def dims(self) -> list[int]:
        return [l.dim for l in self.layers]

    def initial_state(self) -> "SsmState":
        return SsmState(tuple(h.copy() for h in self.h0), 0)

    def decode_joint(self, joint: np.ndarray):
        """Map joint states (..., D) to (element or NO_ELEMENT, anchor distance)."""
        idx, dist = self._decoder.query(joint)
        out = np.where(idx >= 0, self.decoder_elements[np.maximum(idx, 0)], NO_ELEMENT)
        return out, dist

    def context_index(self, r: int, pre_states: Sequence[np.ndarray]):
        layer = self.layers[r]
        if layer.context_arity == 0:
            lead = pre_states[0].shape[:-1] if pre_states else ()
            return np.zeros(lead, dtype=np.int64)
        ctx = np.concatenate(list(pre_states[: layer.context_arity]), axis=-1)
        return self._contexts[r].query(ctx)[0]

    def with_precision(self, precision: FinitePrecisionConfig) -> "DcdSsm":
        return replace(self, precision=precision)


@dataclass(frozen=True, eq=False)
class SsmState:
    layers: tuple[np.ndarray, ...]
    step_counter: int = 0

    def joint(self) -> np.ndarray:
        return np.concatenate(self.layers) if self.layers else np.zeros(0, complex)


# -- single-sequence API -----------------------------------------------------


def step(model: DcdSsm, state: SsmState, token: int) -> SsmState:
    if not 0 <= token < model.n_tokens:
        raise ValueError(f"token {token} outside alphabet of size {model.n_tokens}")
    pre = state.layers
    new = []
    for r, layer in enumerate(model.layers):
        ctx = int(model.context_index(r, [p[None, :] for p in pre])[0]) if layer.context_arity else 0
        if ctx < 0:
            raise MissingTableEntry(f"layer {r}: earlier-layer state matches no context anchor")
        lam, b = layer.entry(ctx, token)
        new.append(quantize(lam * pre[r] + b, model.precision))
    return SsmState(tuple(new), state.step_counter + 1)


def decode(model: DcdSsm, state: SsmState) -> int:
    out, _ = model.decode_joint(state.joint()[None, :])
    return int(out[0])


def forward(model: DcdSsm, seq: Sequence[int]) -> list[int | None]:
    """Decoded element after every token; ``None`` marks a decode miss."""
    out = run_sequential(model, np.asarray([list(seq)], dtype=np.int64).reshape(1, -1))
    return [None if v < 0 else int(v) for v in out[0]]


def scan_forward(model: DcdSsm, seq: Sequence[int]) -> list[int | None]:
    out = run_scan(model, np.asarray([list(seq)], dtype=np.int64).reshape(1, -1))
    return [None if v < 0 else int(v) for v in out[0]]


# -- batched evaluation ------------------------------------------------------


@dataclass
class Trace:
    """Per-step diagnostics collected by ``run_sequential``."""

    max_modulus_drift: float = 0.0
    max_post_drift: float = 0.0
    max_anchor_distance: float = 0.0


def _check_tokens(model: DcdSsm, tokens: np.ndarray) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2:
        raise ValueError("tokens must be a (count, length) array")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= model.n_tokens):
        raise ValueError("token index outside the model's alphabet")
    return tokens


def run_sequential(model: DcdSsm, tokens: np.ndarray, trace: Trace | None = None) -> np.ndarray:
    """Step all sequences in lockstep; returns decoded elements, -1 for misses.

    A context miss (earlier-layer state off every anchor, or an uncompiled
    table entry) poisons the sequence: every later output is -1.
    """
    tokens = _check_tokens(model, tokens)
    n, T = tokens.shape
    states = [np.broadcast_to(h, (n, h.size)).copy() for h in model.h0]
    alive = np.ones(n, dtype=bool)
    out = np.empty((n, T), dtype=np.int64)
    for t in range(T):
        tok = tokens[:, t]
        pre = states
        new = []
        for r, layer in enumerate(model.layers):
            ctx = model.context_index(r, pre)
            safe = np.maximum(ctx, 0)
            lam = layer.lam[safe, tok]
            b = layer.b[safe, tok]
            miss = (ctx < 0) | np.isnan(lam).any(axis=1) | np.isnan(b).any(axis=1)
            alive &= ~miss
            h = np.where(miss[:, None], np.nan, lam * pre[r] + b)
            h, drift = quantize(h, model.precision, return_drift=True)
            if trace is not None and alive.any():
                trace.max_modulus_drift = max(trace.max_modulus_drift, float(np.nanmax(drift[alive])))
                post = np.abs(np.abs(h[alive]) - 1)
                trace.max_post_drift = max(trace.max_post_drift, float(np.nanmax(post)))
            new.append(h)
        states = new
        joint = np.concatenate(states, axis=1)
        dec, dist = model.decode_joint(joint)
        out[:, t] = np.where(alive, dec, NO_ELEMENT)
        if trace is not None and alive.any():
            finite = dist[alive][np.isfinite(dist[alive])]
            if finite.size:
                trace.max_anchor_distance = max(trace.max_anchor_distance, float(finite.max()))
    return out


def affine_prefix_scan(lam: np.ndarray, b: np.ndarray, axis: int = 1):
    """Inclusive prefix composition of affine maps along ``axis`` (Hillis-Steele).

    Element ``t`` of the result is the map ``m_t ∘ ... ∘ m_1``.  The tree
    shape depends only on the length, so results are deterministic.
    """
    A = np.moveaxis(np.array(lam, dtype=np.complex128), axis, 0)
    B = np.moveaxis(np.array(b, dtype=np.complex128), axis, 0)
    T = A.shape[0]
    off = 1
    while off < T:
        A_new, B_new = A.copy(), B.copy()
        A_new[off:] = A[off:] * A[:-off]
        B_new[off:] = A[off:] * B[:-off] + B[off:]
        A, B = A_new, B_new
        off *= 2
    return np.moveaxis(A, 0, axis), np.moveaxis(B, 0, axis)


def run_scan(model: DcdSsm, tokens: np.ndarray) -> np.ndarray:
    """Same contract as ``run_sequential``, evaluated layer by layer with scans.

    Layer ``r``'s transitions depend on earlier layers only, so once layers
    ``< r`` are materialized for every time step, layer ``r`` is a plain
    time-varying affine recurrence and is solved by one prefix scan.
    Quantization is applied at materialization points only.
    """
    tokens = _check_tokens(model, tokens)
    n, T = tokens.shape
    if T == 0:
        return np.empty((n, 0), dtype=np.int64)
    alive = np.ones((n, T), dtype=bool)
    history = []  # per layer: (n, T + 1, d) with index 0 = h0
    for r, layer in enumerate(model.layers):
        pre = [h[:, :-1, :] for h in history]
        ctx = model.context_index(r, pre) if layer.context_arity else np.zeros((n, T), np.int64)
        safe = np.maximum(ctx, 0)
        lam = layer.lam[safe, tokens]
        b = layer.b[safe, tokens]
        miss = (ctx < 0) | np.isnan(lam).any(axis=2) | np.isnan(b).any(axis=2)
        alive &= ~miss
        lam = np.where(miss[..., None], 1.0, lam)
        b = np.where(miss[..., None], 0.0, b)
        A, B = affine_prefix_scan(lam, b, axis=1)
        h = quantize(A * model.h0[r] + B, model.precision)
        start = np.broadcast_to(model.h0[r], (n, 1, layer.dim))
        history.append(np.concatenate([start, h], axis=1))
    alive = np.logical_and.accumulate(alive, axis=1)
    joint = np.concatenate([h[:, 1:, :] for h in history], axis=2)
    dec, _ = model.decode_joint(joint)
    return np.where(alive, dec, NO_ELEMENT)


def lift_sequence(layer: LayerTable, coord: int, steps: Sequence[tuple[int, int]]) -> AffineMap1D:
    """Single affine map equal to running coordinate ``coord`` over ``(context, token)`` steps."""
    out = AffineMap1D.identity()
    for ctx, tok in steps:
        lam, b = layer.entry(ctx, tok)
        out = compose(out, AffineMap1D(lam[coord], b[coord]))
    return out


# -- reachability ------------------------------------------------------------


def _dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    """Indices of a maximal subset of rows that are pairwise farther than ``tol``."""
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64)
    real = _as_real(points)
    tree = cKDTree(real)
    keep = np.ones(len(points), dtype=bool)
    for i, j in sorted(tree.query_pairs(tol)):
        if keep[i] and keep[j]:
            keep[j] = False
    return np.flatnonzero(keep)


def _step_joint(model: DcdSsm, joint: np.ndarray, tok: np.ndarray) -> np.ndarray:
    splits = np.cumsum(model.dims)[:-1]
    pre = np.split(joint, splits, axis=1)
    new = []
    for r, layer in enumerate(model.layers):
        ctx = model.context_index(r, pre)
        safe = np.maximum(ctx, 0)
        lam, b = layer.lam[safe, tok], layer.b[safe, tok]
        if (ctx < 0).any() or np.isnan(lam).any() or np.isnan(b).any():
            raise MissingTableEntry(f"layer {r}: reachable state has no compiled transition")
        new.append(quantize(lam * pre[r] + b, model.precision))
    return np.concatenate(new, axis=1)


def reachable_states(model: DcdSsm, horizon: int | None = None, limit: int = MAX_REACHABLE) -> np.ndarray:
    """Breadth-first closure of joint states from ``h0`` over all tokens.

    States within ``decode_tolerance`` of each other are identified, which is
    what makes the set finite under the precision regime.
    """
    if horizon is not None and horizon < 0:
        raise ValueError("horizon must be nonnegative")
    tol = model.precision.decode_tolerance
    found = np.concatenate(model.h0)[None, :]
    frontier = found
    depth = 0
    toks = np.arange(model.n_tokens)
    while len(frontier) and (horizon is None or depth < horizon):
        joint = np.repeat(frontier, len(toks), axis=0)
        tok = np.tile(toks, len(frontier))
        cand = _step_joint(model, joint, tok)
        cand = cand[_dedupe(cand, tol)]
        d, _ = cKDTree(_as_real(found)).query(_as_real(cand), k=1)
        fresh = cand[d > tol]
        found = np.concatenate([found, fresh])
        if len(found) > limit:
            raise StateExplosion(f"more than {limit} reachable states")
        frontier = fresh
        depth += 1
    return found


def transition_form_violations(model: DcdSsm, tol: float = 1e-9) -> list[tuple[int, int, int, int]]:
    """Table entries whose lam is neither unit modulus nor zero: (layer, ctx, token, coord)."""
    bad = []
    for r, layer in enumerate(model.layers):
        mag = np.abs(layer.lam)
        off = ~np.isnan(mag) & (np.abs(mag - 1) > tol) & (mag > tol)
        bad.extend((r, int(c), int(t), int(j)) for c, t, j in zip(*np.nonzero(off)))
    return bad


# -- serialization -----------------------------------------------------------


def _cpair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _cvec(v) -> list[list[float]]:
    return [_cpair(z) for z in v]


def _from_pairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def model_to_dict(model: DcdSsm) -> dict:
    layers = []
    for layer in model.layers:
        lam, b = {}, {}
        for c in range(layer.n_contexts):
            for t in range(layer.n_tokens):
                if np.isnan(layer.lam[c, t]).any():
                    continue
                key = f"{c}:{t}"
                lam[key] = _cvec(layer.lam[c, t])
                b[key] = _cvec(layer.b[c, t])
        layers.append({
            "dim": layer.dim,
            "context_arity": layer.context_arity,
            "context_anchors": [_cvec(a) for a in layer.context_anchors],
            "lambda": lam,
            "b": b,
        })
    p = model.precision
    return {
        "format": MODEL_FORMAT,
        "group": model.group_spec,
        "precision": {
            "round_digits": p.round_digits,
            "renormalize_unit": p.renormalize_unit,
            "decode_tolerance": p.decode_tolerance,
            "inf_threshold": p.inf_threshold,
        },
        "n_tokens": model.n_tokens,
        "h0": [_cvec(h) for h in model.h0],
        "layers": layers,
        "decoder": [
            {"state": _cvec(a), "element": int(e)}
            for a, e in zip(model.decoder_anchors, model.decoder_elements)
        ],
    }


def model_from_dict(doc: dict) -> DcdSsm:
    from .errors import FormatVersionMismatch

    if doc.get("format") != MODEL_FORMAT:
        raise FormatVersionMismatch(f"expected {MODEL_FORMAT}, got {doc.get('format')!r}")
    n_tokens = int(doc["n_tokens"])
    layers = []
    for spec in doc["layers"]:
        dim = int(spec["dim"])
        anchors = spec["context_anchors"]
        width = len(anchors[0]) if anchors else 0
        ctx = np.array([_from_pairs(a) if width else np.zeros(0) for a in anchors],
                       dtype=np.complex128).reshape(len(anchors), width)
        lam = np.full((len(anchors), n_tokens, dim), np.nan, dtype=np.complex128)
        b = np.full_like(lam, np.nan)
        for key, vec in spec["lambda"].items():
            c, t = (int(x) for x in key.split(":"))
            lam[c, t] = _from_pairs(vec)
            b[c, t] = _from_pairs(spec["b"][key])
        layers.append(LayerTable(dim, int(spec["context_arity"]), ctx, lam, b))
    dec = doc["decoder"]
    total = sum(l.dim for l in layers)
    anchors = np.array([_from_pairs(d["state"]) for d in dec], dtype=np.complex128).reshape(len(dec), total)
    return DcdSsm(
        layers=tuple(layers),
        h0=tuple(_from_pairs(h) for h in doc["h0"]),
        decoder_anchors=anchors,
        decoder_elements=np.array([d["element"] for d in dec], dtype=np.int64),
        group_spec=doc["group"],
        precision=FinitePrecisionConfig(**doc["precision"]),
    )


def save_model(model: DcdSsm, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path) -> DcdSsm:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
