"""File formats: PGM/CSV rasters, sinograms, sweep tables, SVG outlines, quick-look plots."""
import csv
import struct

import numpy as np

from .errors import DomainError
from .projector import Sinogram
from .raster import DEFAULT_WIDTH, RasterImage, curve_polyline

__all__ = ["write_pgm", "read_pgm", "write_raster_csv", "read_raster_csv", "write_sinogram",
           "read_sinogram", "write_sweep_csv", "read_sweep_csv", "shape_svg", "write_svg",
           "write_histograms_csv", "write_traces_csv", "plot_pgm", "SINO_MAGIC"]

SINO_MAGIC = b"SINO"


def _values(img):
    return np.asarray(getattr(img, "values", img), dtype=float)


def write_pgm(path, img, vmax=None):
    """Binary 8-bit PGM; ``vmax`` (default: image maximum) maps to 255."""
    v = _values(img)
    top = float(v.max()) if vmax is None else float(vmax)
    scaled = np.zeros(v.shape) if top <= 0 else np.clip(v / top, 0.0, 1.0) * 255.0
    data = np.rint(scaled).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (v.shape[1], v.shape[0]))
        fh.write(data.tobytes())


def read_pgm(path):
    """Read a binary (P5) or ASCII (P2) 8-bit PGM into a uint8 array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise DomainError("only 8-bit PGM is supported", maxval=maxval)
    if magic == b"P5":
        return np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)
    if magic == b"P2":
        return np.array(raw[pos:].split(), dtype=np.uint8).reshape(h, w)
    raise DomainError("not a PGM file", magic=magic)


def write_raster_csv(path, img):
    np.savetxt(path, _values(img), delimiter=",", fmt="%.17g")


def read_raster_csv(path, width=DEFAULT_WIDTH):
    return RasterImage(np.loadtxt(path, delimiter=",", ndmin=2), width=width)


def write_sinogram(path, sino, fmt=None):
    """Sinogram as CSV (``views,bins`` header then one row per view) or binary.

    The binary layout is the 4-byte magic ``SINO``, little-endian uint32
    views and bins, 4 reserved bytes, then float64 values view-major.
    ``fmt`` defaults from the extension (``.csv`` or anything else = binary).
    """
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "bin")
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([sino.views, sino.bins])
            for row in sino.as_2d():
                w.writerow([repr(float(x)) for x in row])
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(SINO_MAGIC + struct.pack("<III", sino.views, sino.bins, 0))
            fh.write(np.asarray(sino.values, dtype="<f8").tobytes())
    else:
        raise DomainError("sinogram format must be 'csv' or 'bin'", fmt=fmt)


def read_sinogram(path):
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == SINO_MAGIC:
        with open(path, "rb") as fh:
            raw = fh.read()
        views, bins, _ = struct.unpack("<III", raw[4:16])
        vals = np.frombuffer(raw[16:], dtype="<f8")
        if vals.size != views * bins:
            raise DomainError("truncated sinogram file", expected=views * bins, found=vals.size)
        return Sinogram(vals.astype(float), views, bins)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    views, bins = int(rows[0][0]), int(rows[0][1])
    vals = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    if vals.shape != (views, bins):
        raise DomainError("sinogram CSV does not match its header", header=(views, bins),
                          found=vals.shape)
    return Sinogram(vals, views, bins)


def write_sweep_csv(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "beta", "shape_error_percent"])
        for a, b, e in table:
            w.writerow([repr(float(a)), repr(float(b)), repr(float(e))])


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return [(float(a), float(b), float(e)) for a, b, e in rows]


def shape_svg(v, n, width=DEFAULT_WIDTH, degree=3, m=720, stroke="red", stroke_width=None):
    """Closed SVG path of the curve in the pixel frame of an ``n x n`` raster.

    Pixel ``(i, j)`` covers ``[j, j+1] x [i, i+1]`` in the SVG user space, so
    the outline overlays the raster pixel-exact.
    """
    if m < 360:
        raise DomainError("SVG export needs at least 360 samples", m=m)
    vec = v.vector if hasattr(v, "vector") else np.asarray(v, dtype=float)
    px, py = curve_polyline(vec, degree=degree, m=m)
    u = (px + width / 2.0) / width * n
    w = (width / 2.0 - py) / width * n
    sw = n / 256.0 if stroke_width is None else stroke_width
    pts = " L ".join(f"{a:.4f},{b:.4f}" for a, b in zip(u, w))
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{n}" height="{n}" '
            f'viewBox="0 0 {n} {n}">\n'
            f'<path d="M {pts} Z" fill="none" stroke="{stroke}" stroke-width="{sw:.4g}"/>\n'
            f'</svg>\n')


def write_svg(path, v, n, **kw):
    with open(path, "w") as fh:
        fh.write(shape_svg(v, n, **kw))


def write_histograms_csv(path, hists):
    """One block per component: ``component,bin_left,bin_right,count``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "bin_left", "bin_right", "count"])
        for name, (counts, edges) in hists.items():
            for k, cnt in enumerate(counts):
                w.writerow([name, repr(float(edges[k])), repr(float(edges[k + 1])), int(cnt)])


def write_traces_csv(path, traces):
    names = list(traces)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + names)
        cols = [traces[k] for k in names]
        for i in range(len(cols[0])):
            w.writerow([i] + [repr(float(c[i])) for c in cols])


def plot_pgm(path, y, kind="trace", height=120, width=400):
    """Quick-look PGM plot of a trace (line) or histogram counts (bars)."""
    y = np.asarray(y, dtype=float)
    canvas = np.full((height, width), 255.0)
    if y.size == 0:
        write_pgm(path, canvas, vmax=255)
        return
    lo, hi = float(y.min()), float(y.max())
    span = hi - lo if hi > lo else 1.0
    if kind == "hist":
        lo, span = 0.0, hi if hi > 0 else 1.0
    cols = np.minimum((np.arange(y.size) * width) // y.size, width - 1)
    rows = (height - 1) - np.rint((y - lo) / span * (height - 1)).astype(int)
    rows = np.clip(rows, 0, height - 1)
    if kind == "hist":
        for c, r in zip(cols, rows):
            canvas[r:, c] = 0.0
    elif kind == "trace":
        canvas[rows, cols] = 0.0
    else:
        raise DomainError("plot kind must be 'trace' or 'hist'", kind=kind)
    write_pgm(path, canvas, vmax=255)
