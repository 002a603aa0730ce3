"""Independent reference implementations used as test oracles.

These are written as plain loops over scalars, sharing no code with the
package, so agreement is evidence rather than tautology.
"""
from __future__ import annotations

import itertools
import math


def brute_pace(frames, factor: float, out_len: int):
    """Per-joint, per-coordinate 1-D linear interpolation at i*factor*(T-1)/(out_len-1)."""
    T = len(frames)
    V = len(frames[0])
    C = len(frames[0][0])
    out = []
    for i in range(out_len):
        t = 0.0 if out_len == 1 else i * factor * (T - 1) / (out_len - 1)
        t = min(max(t, 0.0), T - 1)
        k = int(math.floor(t))
        row = []
        for v in range(V):
            coords = []
            for c in range(C):
                if k >= T - 1:
                    coords.append(float(frames[T - 1][v][c]))
                else:
                    a = float(frames[k][v][c])
                    b = float(frames[k + 1][v][c])
                    coords.append(a + (t - k) * (b - a))
            row.append(coords)
        out.append(row)
    return out


def scalar_kalman_update(x: float, p: float, z: float, r: float) -> tuple[float, float]:
    """One-dimensional Kalman update: returns (posterior mean, posterior variance)."""
    k = p / (p + r)
    return x + k * (z - x), (1.0 - k) * p


def brute_assignment(scores) -> tuple[float, list[tuple[int, int]]]:
    """Maximum-total one-to-one assignment by enumerating every injection."""
    n_rows = len(scores)
    n_cols = len(scores[0]) if n_rows else 0
    best, best_pairs = -1.0, []
    if n_rows <= n_cols:
        for cols in itertools.permutations(range(n_cols), n_rows):
            total = sum(scores[i][cols[i]] for i in range(n_rows))
            if total > best + 1e-12:
                best, best_pairs = total, [(i, cols[i]) for i in range(n_rows)]
    else:
        for rows in itertools.permutations(range(n_rows), n_cols):
            total = sum(scores[rows[j]][j] for j in range(n_cols))
            if total > best + 1e-12:
                best, best_pairs = total, sorted((rows[j], j) for j in range(n_cols))
    return best, best_pairs


def supcon_loop(z, labels, tau: float) -> float:
    """SupCon "out" loss evaluated term by term in Python floats."""
    n = len(z)
    total = 0.0
    for i in range(n):
        logits = {a: sum(z[i][d] * z[a][d] for d in range(len(z[i]))) / tau for a in range(n) if a != i}
        m = max(logits.values())
        log_denom = m + math.log(sum(math.exp(v - m) for v in logits.values()))
        positives = [p for p in range(n) if p != i and labels[p] == labels[i]]
        total += -sum(logits[p] - log_denom for p in positives) / len(positives)
    return total / n


def median(values):
    s = sorted(values)
    n = len(s)
    mid = n // 2
    return s[mid] if n % 2 else 0.5 * (s[mid - 1] + s[mid])


def normalize_loop(frames):
    """Hip-midpoint centering, x / shoulder width, y / trunk length, with median fallback."""
    widths, trunks = [], []
    for f in frames:
        widths.append(abs(f[6][0] - f[5][0]))
        neck_y = 0.5 * (f[5][1] + f[6][1])
        pelvis_y = 0.5 * (f[11][1] + f[12][1])
        trunks.append(abs(neck_y - pelvis_y))
    mw, mt = median(widths), median(trunks)
    out = []
    for f, w, h in zip(frames, widths, trunks):
        w = w if w >= 0.1 * mw else mw
        h = h if h >= 0.1 * mt else mt
        px = 0.5 * (f[11][0] + f[12][0])
        py = 0.5 * (f[11][1] + f[12][1])
        out.append([[(j[0] - px) / w, (j[1] - py) / h] for j in f])
    return out


def leg_velocity_loop(frames) -> float:
    total, count = 0.0, 0
    for t in range(1, len(frames)):
        for j in (13, 14, 15, 16):
            dx = frames[t][j][0] - frames[t - 1][j][0]
            dy = frames[t][j][1] - frames[t - 1][j][1]
            total += math.hypot(dx, dy)
            count += 1
    return total / count
