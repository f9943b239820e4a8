"""Independent brute-force reference implementations used by the test suite.

Nothing in here may call back into the library code paths it is checking:
travel times are recomputed by a dense ray-parameter scan, GRU outputs by
scalar hand-unrolled recurrences, losses by naive summation loops.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# travel-time oracle: dense ray-parameter scan
# ---------------------------------------------------------------------------

def scan_first_arrival(model, source_depth, epi_dist, phase,
                       n_coarse=100_000, n_fine=10_000):
    """First arrival by brute-force minimum over a dense ray-parameter scan.

    Scans a dense grid of ray parameters p in [0, min slowness on the
    up-path).  Two families of kinematically connected source-to-receiver
    paths are evaluated:

    * upgoing rays, via the tau-p intercept form t(p) = p*x + sum(h_i q_i);
      the direct arrival is the stationary (maximal) value over p, refined
      with a second dense scan around the coarse argmax;
    * dive-and-glide paths: the ray descends until it meets a layer it
      cannot enter (u_m <= p), glides along that interface at the lower
      medium's speed, and returns to the surface; by Fermat every such path
      bounds the first arrival from above, and the bound is tight at the
      critical parameter p = u_m, which is inserted into the grid exactly.

    The reported value is the minimum over both families.
    """
    tops = np.asarray(model.top_depths, dtype=float)
    v = model.velocities(phase)
    u = 1.0 / v
    z = float(source_depth)
    x = float(epi_dist)
    L = len(v)
    s = int(np.searchsorted(tops, z, side="right") - 1)

    # per-layer vertical extents covered by the receiver leg + source legs
    up_segs = [(tops[i + 1] - tops[i]) for i in range(s)] + [z - tops[s]]
    u_up = u[: s + 1]
    p_max = float(u_up.min())

    grid = np.linspace(0.0, p_max * (1.0 - 1e-12), n_coarse)
    crit = [u[m] for m in range(s + 1, L) if u[m] < p_max]
    p = np.unique(np.concatenate([grid, np.asarray(crit, dtype=float)]))

    def q_of(ui, pp):
        return np.sqrt(np.maximum(ui * ui - pp * pp, 0.0))

    # --- upgoing (direct) branch: maximize the intercept form -------------
    if z <= 0.0:
        direct = x * u[0]
    else:
        def intercept(pp):
            tau = np.zeros_like(pp)
            for seg, ui in zip(up_segs, u_up):
                tau += seg * q_of(ui, pp)
            return pp * x + tau

        f = intercept(p)
        j = int(np.argmax(f))
        lo = p[max(j - 1, 0)]
        hi = p[min(j + 1, len(p) - 1)]
        fine = np.linspace(lo, hi, n_fine)
        direct = float(max(f[j], intercept(fine).max()))

    # --- dive-and-glide branch --------------------------------------------
    # The receiver leg climbs from the glide interface to the surface through
    # layers 0..m-1 in full; the source leg descends from the source, covering
    # the bottom part of the source layer and layers s+1..m-1 in full.
    best_glide = math.inf
    alive = np.ones(p.shape, dtype=bool)
    x_legs = np.zeros_like(p)
    t_legs = np.zeros_like(p)
    if s + 1 <= L - 1:
        leg_w = [tops[i + 1] - tops[i] for i in range(s)]          # receiver leg
        leg_w.append((tops[s + 1] - tops[s]) + (tops[s + 1] - z))  # receiver + descent
        for seg, ui in zip(leg_w, u_up):
            q = q_of(ui, p)
            with np.errstate(divide="ignore", invalid="ignore"):
                x_legs += np.where(alive, seg * p / np.maximum(q, 1e-300), 0.0)
                t_legs += np.where(alive, seg * ui * ui / np.maximum(q, 1e-300), 0.0)
    else:
        alive[:] = False
    for m in range(s + 1, L):
        stops = alive & (p >= u[m])
        if np.any(stops):
            ok = stops & (x_legs <= x)
            if np.any(ok):
                t = t_legs[ok] + (x - x_legs[ok]) * u[m]
                best_glide = min(best_glide, float(t.min()))
        alive &= p < u[m]
        if m < L - 1:
            seg = 2.0 * (tops[m + 1] - tops[m])
            q = q_of(u[m], p)
            with np.errstate(divide="ignore", invalid="ignore"):
                x_legs += np.where(alive, seg * p / np.maximum(q, 1e-300), 0.0)
                t_legs += np.where(alive, seg * u[m] * u[m] / np.maximum(q, 1e-300), 0.0)

    return min(direct, best_glide)


# ---------------------------------------------------------------------------
# spherical distance oracle: chord through the sphere
# ---------------------------------------------------------------------------

def chord_distance_km(lat1, lon1, lat2, lon2, radius_km=6371.0):
    """Great-circle distance derived from the 3-D chord between the points."""
    def xyz(lat, lon):
        la, lo = math.radians(lat), math.radians(lon)
        return (math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la))

    ax, ay, az = xyz(lat1, lon1)
    bx, by, bz = xyz(lat2, lon2)
    chord = math.sqrt((ax - bx) ** 2 + (ay - by) ** 2 + (az - bz) ** 2)
    return 2.0 * radius_km * math.asin(min(chord / 2.0, 1.0))


# ---------------------------------------------------------------------------
# GRU / loss oracles: scalar hand-unrolled computations
# ---------------------------------------------------------------------------

def _sig(a):
    return 1.0 / (1.0 + math.exp(-a))


def naive_gru_direction(x, w, uu, b, reverse=False):
    """One GRU direction unrolled with scalar loops.

    x: (T, D); w: (D, 3H); uu: (H, 3H); b: (3H,) with gate blocks ordered
    (update z, reset r, candidate h).  Returns (T, H) hidden states aligned
    to the input order.
    """
    T, D = x.shape
    H = uu.shape[0]
    hs = np.zeros((T, H))
    h = [0.0] * H
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        az = [0.0] * H
        ar = [0.0] * H
        ah = [0.0] * H
        for j in range(H):
            for d in range(D):
                az[j] += x[t, d] * w[d, j]
                ar[j] += x[t, d] * w[d, H + j]
                ah[j] += x[t, d] * w[d, 2 * H + j]
            for k in range(H):
                az[j] += h[k] * uu[k, j]
                ar[j] += h[k] * uu[k, H + j]
            az[j] += b[j]
            ar[j] += b[H + j]
        z = [_sig(a) for a in az]
        r = [_sig(a) for a in ar]
        for j in range(H):
            for k in range(H):
                ah[j] += (r[k] * h[k]) * uu[k, 2 * H + j]
            ah[j] += b[2 * H + j]
        c = [math.tanh(a) for a in ah]
        h = [z[j] * h[j] + (1.0 - z[j]) * c[j] for j in range(H)]
        hs[t] = h
    return hs


def naive_bce(labels, probs, eps=1e-7):
    """Binary cross-entropy by plain python accumulation."""
    total = 0.0
    for y, pr in zip(labels, probs):
        pc = min(max(float(pr), eps), 1.0 - eps)
        total += float(y) * math.log(pc) + (1.0 - float(y)) * math.log(1.0 - pc)
    return -total / len(labels)


def finite_difference_grad(f, theta, step=1e-5):
    """Central finite differences of scalar f with respect to array theta."""
    g = np.zeros_like(theta)
    flat = theta.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        f_hi = f()
        flat[i] = keep - step
        f_lo = f()
        flat[i] = keep
        gflat[i] = (f_hi - f_lo) / (2.0 * step)
    return g


# ---------------------------------------------------------------------------
# Jaccard oracle: brute-force set overlap
# ---------------------------------------------------------------------------

def brute_best_jaccard(target, others):
    """max over others of |target & o| / |target | o|, zero when empty."""
    best = 0.0
    ta = set(target)
    for o in others:
        ob = set(o)
        union = ta | ob
        if not union:
            continue
        best = max(best, len(ta & ob) / len(union))
    return best
