"""1D layered velocity model and first-arrival travel times.

The model is a stack of constant-velocity flat layers over a half-space.
First arrivals are computed with classical ray theory as the minimum of

* the direct (upgoing) ray, found by bisection on the ray parameter so that
  the horizontal offset of the up-path matches the requested epicentral
  distance, and
* head waves critically refracted along each interface below the source
  (ray parameter equal to the slowness of the faster medium), kept when the
  critical offset of the two legs fits within the requested distance.

Receivers sit at the surface.  A flat-earth geometry is used; at the local
distances this package targets (<~100 km) the sphericity error is
negligible compared to the half-second pick errors being modeled.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

_BISECT_ITERS = 110          # bisection bracket shrinks below float resolution
_DIST_TOL_KM = 1e-9          # target residual on horizontal offset


class Phase(IntEnum):
    """Seismic phase type: compressional (P) or shear (S)."""

    P = 0
    S = 1

    @classmethod
    def parse(cls, text) -> "Phase":
        if isinstance(text, Phase):
            return text
        if isinstance(text, (int, np.integer)):
            return cls(int(text))
        t = str(text).strip().upper()
        if t == "P":
            return cls.P
        if t == "S":
            return cls.S
        raise ValueError(f"unknown phase {text!r}")


@dataclass(frozen=True)
class LayeredModel:
    """Ordered stack of (top depth km, vp km/s, vs km/s); bottom layer is a half-space."""

    top_depths: tuple[float, ...]
    vp: tuple[float, ...]
    vs: tuple[float, ...]

    def __post_init__(self):
        n = len(self.top_depths)
        if n == 0:
            raise ValueError("model has no layers")
        if len(self.vp) != n or len(self.vs) != n:
            raise ValueError("top_depths/vp/vs lengths differ")
        if self.top_depths[0] != 0.0:
            raise ValueError(f"first layer must start at depth 0, got {self.top_depths[0]}")
        for i in range(1, n):
            if not self.top_depths[i] > self.top_depths[i - 1]:
                raise ValueError(
                    f"non-increasing depth at layer {i}: "
                    f"{self.top_depths[i]} after {self.top_depths[i - 1]}")
        for i in range(n):
            if not (self.vp[i] > 0.0 and self.vs[i] > 0.0):
                raise ValueError(f"non-positive velocity at layer {i}")
            if not self.vp[i] > self.vs[i]:
                raise ValueError(f"vp must exceed vs at layer {i}: "
                                 f"vp={self.vp[i]} vs={self.vs[i]}")

    @property
    def n_layers(self) -> int:
        return len(self.top_depths)

    def velocities(self, phase: Phase) -> np.ndarray:
        return np.asarray(self.vp if Phase.parse(phase) == Phase.P else self.vs,
                          dtype=float)

    def layer_index(self, depth: float) -> int:
        """Index of the layer containing ``depth`` (tops belong to the layer below)."""
        tops = np.asarray(self.top_depths)
        return int(np.searchsorted(tops, depth, side="right") - 1)


def load_model(path) -> LayeredModel:
    """Read a model file: one ``top_depth_km vp_kms vs_kms`` line per layer, ``#`` comments."""
    tops: list[float] = []
    vp: list[float] = []
    vs: list[float] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields "
                                 f"(top_depth vp vs), got {len(parts)}")
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            tops.append(values[0])
            vp.append(values[1])
            vs.append(values[2])
    if not tops:
        raise ValueError(f"{path}: no layers found")
    try:
        return LayeredModel(tuple(tops), tuple(vp), tuple(vs))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def travel_time(model: LayeredModel, source_depth: float, epi_dist: float,
                phase: Phase) -> float:
    """First-arrival time in seconds from a source at depth to a surface receiver."""
    t = travel_times(model,
                     np.asarray([source_depth], dtype=float),
                     np.asarray([epi_dist], dtype=float), phase)
    return float(t[0])


def travel_times(model: LayeredModel, source_depths: np.ndarray,
                 epi_dists: np.ndarray, phase: Phase) -> np.ndarray:
    """Vectorized :func:`travel_time` over paired depth/distance arrays."""
    depths = np.asarray(source_depths, dtype=float)
    dists = np.asarray(epi_dists, dtype=float)
    if depths.shape != dists.shape:
        raise ValueError("source_depths and epi_dists must have the same shape")
    if depths.size == 0:
        return np.empty_like(depths)
    if np.any(depths < 0.0):
        raise ValueError("negative source depth")
    if np.any(dists < 0.0):
        raise ValueError("negative epicentral distance")

    v = model.velocities(phase)
    tops = np.asarray(model.top_depths)
    out = np.empty(depths.shape, dtype=float)
    layer_of = np.searchsorted(tops, depths, side="right") - 1
    for src_layer in np.unique(layer_of):
        sel = layer_of == src_layer
        out[sel] = _first_arrivals(v, tops, int(src_layer), depths[sel], dists[sel])
    return out


def _up_path(v, tops, src_layer, depths):
    """Thicknesses traversed by the up-going leg, per layer 0..src_layer.

    Returns (thicknesses list, each scalar or per-source vector).
    """
    segs = []
    for i in range(src_layer):
        segs.append(tops[i + 1] - tops[i])
    segs.append(depths - tops[src_layer])  # partial source layer, vector
    return segs


def _first_arrivals(v, tops, src_layer, depths, dists):
    """First arrivals for sources all lying in one layer (vector over sources)."""
    u = 1.0 / v
    n_layers = len(v)
    best = _direct_times(u, tops, src_layer, depths, dists)

    # Head waves along each interface below the source.  Both legs traverse
    # every layer above refractor n: the receiver leg covers layers 0..n-1
    # once in full; the source leg covers the part of the source layer below
    # the source plus layers src_layer+1..n-1 in full.
    for n in range(src_layer + 1, n_layers):
        p = u[n]
        u_above = u[:n]
        if not np.all(u_above > p):
            continue  # no critical refraction through a slower-or-equal stack
        q = np.sqrt(u_above ** 2 - p * p)
        x_legs = np.zeros_like(depths)
        t_legs = np.zeros_like(depths)
        for i in range(n):
            if i < src_layer:
                w = tops[i + 1] - tops[i]
            elif i == src_layer:
                w = (tops[i + 1] - tops[i]) + (tops[i + 1] - depths)
            else:
                w = 2.0 * (tops[i + 1] - tops[i])
            x_legs = x_legs + w * (p / q[i])
            t_legs = t_legs + w * (u_above[i] ** 2 / q[i])
        ok = x_legs <= dists
        if np.any(ok):
            t_head = t_legs + (dists - x_legs) * p
            best = np.where(ok & (t_head < best), t_head, best)
    return best


def _direct_times(u, tops, src_layer, depths, dists):
    """Direct (upgoing) ray times via bisection on the ray parameter.

    The time is evaluated in the tau-p intercept form t = p*x + sum(h_i q_i),
    which is stationary at the geometric ray, so the bisection's residual on
    p enters the time only at second order.  When the distance exceeds the
    maximum offset the up-going family can reach (source sitting essentially
    on top of the fastest path layer), the bisection runs to the critical
    parameter and the same expression yields the grazing continuation along
    the top of that layer.
    """
    segs = _up_path(1.0 / u, tops, src_layer, depths)
    u_path = u[: src_layer + 1]
    p_hi = float(u_path.min()) * (1.0 - 1e-12)

    surface = depths <= tops[src_layer] if src_layer == 0 else np.zeros(depths.shape, bool)
    # A surface source has no vertical path; the direct wave grazes the top layer.
    out = np.where(surface, dists * u[0], 0.0)

    active = ~surface
    if np.any(active):
        d_a = dists[active]
        lo = np.zeros_like(d_a)
        hi = np.full_like(d_a, p_hi)
        segs_a = [s[active] if isinstance(s, np.ndarray) else s for s in segs]
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            x = _offset(segs_a, u_path, mid)
            too_far = x > d_a
            hi = np.where(too_far, mid, hi)
            lo = np.where(too_far, lo, mid)
        p = 0.5 * (lo + hi)
        t = p * d_a
        for seg, ui in zip(segs_a, u_path):
            t = t + seg * np.sqrt(np.maximum(ui * ui - p * p, 0.0))
        out[active] = t
    return out


def _offset(segs, u_path, p):
    """Horizontal offset of the up-going ray at ray parameter ``p``."""
    x = np.zeros_like(p)
    for seg, ui in zip(segs, u_path):
        q = np.sqrt(np.maximum(ui * ui - p * p, 1e-300))
        x = x + seg * (p / q)
    return x
