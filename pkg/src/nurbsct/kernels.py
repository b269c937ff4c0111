"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names at the bottom are bound to one flavour at import time
according to ``NURBSCT_NUMBA`` (see :mod:`nurbsct._accel`).  Both flavours use
the same floating-point expressions so that their outputs agree bit for bit;
the test-suite checks this and the benchmark script times them side by side.

Geometry conventions (shared by every kernel): coordinates are centred on the
image square ``[-W/2, W/2]^2``; pixel ``(i, j)`` of an ``N x N`` grid has its
centre at ``x = -W/2 + (j + 1/2) h``, ``y = W/2 - (i + 1/2) h`` with
``h = W / N``; images are flattened row-major.
"""
import math

import numpy as np

from ._accel import njit, select

# ---------------------------------------------------------------------------
# pixel-centre containment (even-odd rule, boundary counts as inside)
# ---------------------------------------------------------------------------


def _centres(n, width):
    h = width / n
    idx = np.arange(n)
    xc = -0.5 * width + (idx + 0.5) * h
    yc = 0.5 * width - (idx + 0.5) * h
    return xc, yc


@njit(cache=True)
def _scanline_fill_nb(px, py, n, width):
    h = width / n
    half = 0.5 * width
    n_e = px.shape[0]
    out = np.zeros((n, n), dtype=np.bool_)
    xc = np.empty(n)
    yc = np.empty(n)
    for k in range(n):
        xc[k] = -half + (k + 0.5) * h
        yc[k] = half - (k + 0.5) * h

    # pass 1: count crossings per row
    counts = np.zeros(n, dtype=np.int64)
    for e in range(n_e):
        x1 = px[e]
        y1 = py[e]
        e2 = e + 1 if e + 1 < n_e else 0
        y2 = py[e2]
        if y1 == y2:
            continue
        ylo = min(y1, y2)
        yhi = max(y1, y2)
        i0 = max(0, int(math.floor((half - yhi) / h - 0.5)) - 1)
        i1 = min(n - 1, int(math.floor((half - ylo) / h - 0.5)) + 1)
        for i in range(i0, i1 + 1):
            if ylo <= yc[i] and yc[i] < yhi:
                counts[i] += 1
    offs = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        offs[i + 1] = offs[i] + counts[i]
    xs = np.empty(offs[n])
    fill = offs[:n].copy()

    # pass 2: crossing abscissae
    for e in range(n_e):
        x1 = px[e]
        y1 = py[e]
        e2 = e + 1 if e + 1 < n_e else 0
        x2 = px[e2]
        y2 = py[e2]
        if y1 == y2:
            continue
        ylo = min(y1, y2)
        yhi = max(y1, y2)
        i0 = max(0, int(math.floor((half - yhi) / h - 0.5)) - 1)
        i1 = min(n - 1, int(math.floor((half - ylo) / h - 0.5)) + 1)
        for i in range(i0, i1 + 1):
            if ylo <= yc[i] and yc[i] < yhi:
                xs[fill[i]] = x1 + (yc[i] - y1) * (x2 - x1) / (y2 - y1)
                fill[i] += 1

    for i in range(n):
        row = np.sort(xs[offs[i]:offs[i + 1]])
        for q in range(0, row.shape[0] - 1, 2):
            a = row[q]
            b = row[q + 1]
            for j in range(n):
                if a <= xc[j] and xc[j] <= b:
                    out[i, j] = True

    # centres lying exactly on horizontal edges or on vertices
    for e in range(n_e):
        x1 = px[e]
        y1 = py[e]
        e2 = e + 1 if e + 1 < n_e else 0
        x2 = px[e2]
        y2 = py[e2]
        ic = int(math.floor((half - y1) / h - 0.5))
        for i in range(max(0, ic - 1), min(n, ic + 3)):
            if yc[i] == y1:
                lo = min(x1, x2) if y1 == y2 else x1
                hi = max(x1, x2) if y1 == y2 else x1
                for j in range(n):
                    if lo <= xc[j] and xc[j] <= hi:
                        out[i, j] = True
    return out


def _scanline_fill_np(px, py, n, width):
    px = np.ascontiguousarray(px, dtype=float)
    py = np.ascontiguousarray(py, dtype=float)
    xc, yc = _centres(n, width)
    x1, y1 = px, py
    x2, y2 = np.roll(px, -1), np.roll(py, -1)
    ylo = np.minimum(y1, y2)
    yhi = np.maximum(y1, y2)
    slanted = y1 != y2
    out = np.zeros((n, n), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(n):
            y = yc[i]
            hit = slanted & (ylo <= y) & (y < yhi)
            cx = x1[hit] + (y - y1[hit]) * (x2[hit] - x1[hit]) / (y2[hit] - y1[hit])
            if cx.size:
                right = (cx[None, :] > xc[:, None]).sum(axis=1)
                on = (cx[None, :] == xc[:, None]).any(axis=1)
                out[i] = (right % 2 == 1) | on
            horiz = (y1 == y) & ~slanted
            for e in np.nonzero(horiz)[0]:
                out[i] |= (min(x1[e], x2[e]) <= xc) & (xc <= max(x1[e], x2[e]))
            for e in np.nonzero((y1 == y) & slanted)[0]:
                out[i] |= xc == x1[e]
    return out


@njit(cache=True)
def _points_in_polygon_nb(qx, qy, px, py):
    n_q = qx.shape[0]
    n_e = px.shape[0]
    out = np.zeros(n_q, dtype=np.bool_)
    for k in range(n_q):
        x = qx[k]
        y = qy[k]
        parity = False
        on = False
        for e in range(n_e):
            x1 = px[e]
            y1 = py[e]
            e2 = e + 1 if e + 1 < n_e else 0
            x2 = px[e2]
            y2 = py[e2]
            if y1 == y2:
                if y == y1 and min(x1, x2) <= x and x <= max(x1, x2):
                    on = True
                continue
            if y == y1 and x == x1:
                on = True
            if min(y1, y2) <= y and y < max(y1, y2):
                cx = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if cx > x:
                    parity = not parity
                elif cx == x:
                    on = True
        out[k] = parity or on
    return out


def _points_in_polygon_np(qx, qy, px, py, chunk=4096):
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    x1, y1 = np.asarray(px, dtype=float), np.asarray(py, dtype=float)
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    slanted = y1 != y2
    out = np.empty(qx.size, dtype=bool)
    for s in range(0, qx.size, chunk):
        x = qx[s:s + chunk, None]
        y = qy[s:s + chunk, None]
        hit = slanted & (np.minimum(y1, y2) <= y) & (y < np.maximum(y1, y2))
        with np.errstate(divide="ignore", invalid="ignore"):
            cx = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        parity = ((hit & (cx > x)).sum(axis=1) % 2) == 1
        on = (hit & (cx == x)).any(axis=1)
        on |= (~slanted & (y == y1) & (np.minimum(x1, x2) <= x) & (x <= np.maximum(x1, x2))).any(axis=1)
        on |= (slanted & (y == y1) & (x == x1)).any(axis=1)
        out[s:s + chunk] = parity | on
    return out


# ---------------------------------------------------------------------------
# Siddon ray traversal
# ---------------------------------------------------------------------------


@njit(cache=True)
def _plane_alphas(s, d, n, h, half):
    out = np.empty(n + 1)
    den = d - s
    for k in range(n + 1):
        out[k] = ((-half + k * h) - s) / den
    if den < 0:
        out = out[::-1].copy()
    return out


@njit(cache=True)
def _siddon_nb(sx, sy, dx, dy, n, width):
    h = width / n
    half = 0.5 * width
    n_r = sx.shape[0]
    cap = n_r * (2 * n + 2)
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap)
    nnz = 0
    for r in range(n_r):
        x0 = sx[r]
        y0 = sy[r]
        x1 = dx[r]
        y1 = dy[r]
        length = math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2)
        amin = 0.0
        amax = 1.0
        if x1 != x0:
            ax = _plane_alphas(x0, x1, n, h, half)
            amin = max(amin, ax[0])
            amax = min(amax, ax[n])
        else:
            ax = np.empty(0)
            if not (-half <= x0 and x0 <= half):
                continue
        if y1 != y0:
            ay = _plane_alphas(y0, y1, n, h, half)
            amin = max(amin, ay[0])
            amax = min(amax, ay[n])
        else:
            ay = np.empty(0)
            if not (-half <= y0 and y0 <= half):
                continue
        if amax <= amin:
            continue
        # incremental merge of the two ascending plane sequences
        ix = 0
        iy = 0
        while ix < ax.shape[0] and ax[ix] <= amin:
            ix += 1
        while iy < ay.shape[0] and ay[iy] <= amin:
            iy += 1
        a_prev = amin
        while True:
            nx = ax[ix] if ix < ax.shape[0] else 2.0
            ny = ay[iy] if iy < ay.shape[0] else 2.0
            a_next = min(nx, ny, amax)
            if a_next > a_prev:
                am = 0.5 * (a_prev + a_next)
                xm = x0 + am * (x1 - x0)
                ym = y0 + am * (y1 - y0)
                col = int(math.floor((xm + half) / h))
                row = int(math.floor((half - ym) / h))
                col = min(max(col, 0), n - 1)
                row = min(max(row, 0), n - 1)
                rows[nnz] = r
                cols[nnz] = row * n + col
                vals[nnz] = (a_next - a_prev) * length
                nnz += 1
                a_prev = a_next
            if a_next >= amax:
                break
            if nx == a_next:
                ix += 1
            if ny == a_next:
                iy += 1
    return rows[:nnz], cols[:nnz], vals[:nnz]


def _siddon_np(sx, sy, dx, dy, n, width):
    h = width / n
    half = 0.5 * width
    planes = -half + np.arange(n + 1) * h
    rows, cols, vals = [], [], []
    for r in range(len(sx)):
        x0, y0, x1, y1 = float(sx[r]), float(sy[r]), float(dx[r]), float(dy[r])
        length = math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2)
        amin, amax = 0.0, 1.0
        parts = []
        if x1 != x0:
            ax = (planes - x0) / (x1 - x0)
            ax = ax if x1 > x0 else ax[::-1]
            amin, amax = max(amin, ax[0]), min(amax, ax[-1])
            parts.append(ax)
        elif not -half <= x0 <= half:
            continue
        if y1 != y0:
            ay = (planes - y0) / (y1 - y0)
            ay = ay if y1 > y0 else ay[::-1]
            amin, amax = max(amin, ay[0]), min(amax, ay[-1])
            parts.append(ay)
        elif not -half <= y0 <= half:
            continue
        if amax <= amin:
            continue
        a = np.concatenate(parts)
        a = np.unique(np.concatenate([[amin], a[(a > amin) & (a < amax)], [amax]]))
        da = a[1:] - a[:-1]
        am = 0.5 * (a[:-1] + a[1:])
        xm = x0 + am * (x1 - x0)
        ym = y0 + am * (y1 - y0)
        col = np.clip(np.floor((xm + half) / h).astype(np.int64), 0, n - 1)
        row = np.clip(np.floor((half - ym) / h).astype(np.int64), 0, n - 1)
        rows.append(np.full(da.size, r, dtype=np.int64))
        cols.append(row * n + col)
        vals.append(da * length)
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


# ---------------------------------------------------------------------------
# control-polygon hard constraints
# ---------------------------------------------------------------------------


@njit(cache=True)
def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


@njit(cache=True)
def _segments_intersect(ax, ay, cx, cy, ex, ey, fx, fy):
    efx = fx - ex
    efy = fy - ey
    d1 = _cross(ax - ex, ay - ey, efx, efy)
    d2 = _cross(cx - ex, cy - ey, efx, efy)
    acx = cx - ax
    acy = cy - ay
    d3 = _cross(ex - ax, ey - ay, acx, acy)
    d4 = _cross(fx - ax, fy - ay, acx, acy)
    if d1 * d2 > 0 or d3 * d4 > 0:
        return False
    if d1 == 0 and d2 == 0 and d3 == 0 and d4 == 0:
        # collinear: overlap of the projections on the dominant axis
        if abs(acx) >= abs(acy):
            return max(min(ax, cx), min(ex, fx)) <= min(max(ax, cx), max(ex, fx))
        return max(min(ay, cy), min(ey, fy)) <= min(max(ay, cy), max(ey, fy))
    return True


@njit(cache=True)
def _constraints_code_nb(r, th, lo, hi, r_max, osc_k, check_intersection):
    """0 when feasible, else 1..4 for the first failing clause (a..d)."""
    m = r.shape[0]
    two_pi = 2.0 * math.pi
    for i in range(m):
        d_lo = (th[i] - lo[i]) % two_pi
        d_hi = (hi[i] - th[i]) % two_pi
        width = (hi[i] - lo[i]) % two_pi
        if d_lo > width or d_hi > width:
            return 1
        if m > 2:
            prev = (th[i] - th[(i - 2) % m] + math.pi) % two_pi - math.pi
            nxt = (th[(i + 2) % m] - th[i] + math.pi) % two_pi - math.pi
            if prev < 0 or nxt < 0:
                return 1
    for i in range(m):
        if not (r[i] >= 0 and r[i] <= r_max):
            return 2
    x = r * np.cos(th)
    y = r * np.sin(th)
    for i in range(m):
        a = i
        b = (i + 1) % m
        c = (i + 2) % m
        d = (i + 3) % m
        ab = math.sqrt((x[a] - x[b]) ** 2 + (y[a] - y[b]) ** 2)
        cd = math.sqrt((x[d] - x[c]) ** 2 + (y[d] - y[c]) ** 2)
        if cd > osc_k * ab:
            return 3
    if check_intersection:
        for i in range(m):
            i2 = (i + 1) % m
            for j in range(i + 2, m):
                j2 = (j + 1) % m
                if j2 == i:
                    continue
                if _segments_intersect(x[i], y[i], x[i2], y[i2], x[j], y[j], x[j2], y[j2]):
                    return 4
    return 0


def window_ok_np(th, lo, hi):
    two_pi = 2.0 * np.pi
    width = np.mod(hi - lo, two_pi)
    return (np.mod(th - lo, two_pi) <= width) & (np.mod(hi - th, two_pi) <= width)


def ordering_ok_np(th):
    m = th.size
    if m <= 2:
        return np.ones(m, dtype=bool)
    prev = np.mod(th - np.roll(th, 2) + np.pi, 2 * np.pi) - np.pi
    nxt = np.mod(np.roll(th, -2) - th + np.pi, 2 * np.pi) - np.pi
    return (prev >= 0) & (nxt >= 0)


def oscillation_ok_np(x, y, osc_k):
    ab = np.hypot(x - np.roll(x, -1), y - np.roll(y, -1))
    cd = np.hypot(np.roll(x, -3) - np.roll(x, -2), np.roll(y, -3) - np.roll(y, -2))
    return ~(cd > osc_k * ab)


def edge_pairs(m):
    """Non-adjacent edge pairs ``(i, j)`` of an ``m``-gon, edge i = (P_i, P_{i+1})."""
    out = [(i, j) for i in range(m) for j in range(i + 2, m) if (j + 1) % m != i]
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def crossing_pairs_np(x, y):
    m = x.size
    pairs = edge_pairs(m)
    if pairs.size == 0:
        return pairs
    i, j = pairs[:, 0], pairs[:, 1]
    i2, j2 = (i + 1) % m, (j + 1) % m
    ax, ay, cx, cy = x[i], y[i], x[i2], y[i2]
    ex, ey, fx, fy = x[j], y[j], x[j2], y[j2]
    efx, efy = fx - ex, fy - ey
    d1 = (ax - ex) * efy - (ay - ey) * efx
    d2 = (cx - ex) * efy - (cy - ey) * efx
    acx, acy = cx - ax, cy - ay
    d3 = (ex - ax) * acy - (ey - ay) * acx
    d4 = (fx - ax) * acy - (fy - ay) * acx
    hit = ~((d1 * d2 > 0) | (d3 * d4 > 0))
    col = (d1 == 0) & (d2 == 0) & (d3 == 0) & (d4 == 0)
    xdom = np.abs(acx) >= np.abs(acy)
    ox = np.maximum(np.minimum(ax, cx), np.minimum(ex, fx)) <= np.minimum(np.maximum(ax, cx), np.maximum(ex, fx))
    oy = np.maximum(np.minimum(ay, cy), np.minimum(ey, fy)) <= np.minimum(np.maximum(ay, cy), np.maximum(ey, fy))
    hit = np.where(col, np.where(xdom, ox, oy), hit)
    return pairs[hit]


def _constraints_code_np(r, th, lo, hi, r_max, osc_k, check_intersection):
    if not (window_ok_np(th, lo, hi).all() and ordering_ok_np(th).all()):
        return 1
    if not np.all((r >= 0) & (r <= r_max)):
        return 2
    x, y = r * np.cos(th), r * np.sin(th)
    if not oscillation_ok_np(x, y, osc_k).all():
        return 3
    if check_intersection and crossing_pairs_np(x, y).size:
        return 4
    return 0


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

scanline_fill = select(_scanline_fill_nb, _scanline_fill_np)
points_in_polygon = select(_points_in_polygon_nb, _points_in_polygon_np)
siddon = select(_siddon_nb, _siddon_np)
constraints_code = select(_constraints_code_nb, _constraints_code_np)

IMPLEMENTATIONS = {
    "scanline_fill": (_scanline_fill_nb, _scanline_fill_np),
    "points_in_polygon": (_points_in_polygon_nb, _points_in_polygon_np),
    "siddon": (_siddon_nb, _siddon_np),
    "constraints_code": (_constraints_code_nb, _constraints_code_np),
}
