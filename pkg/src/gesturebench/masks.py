"""Binary hand masks: PGM I/O, wrist annotations and the normalization
pipeline (rotate by the wrist line, cut below it, crop, scale to a fixed
width).
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NormalizationError, PgmError, WristCsvError


@dataclass
class BinaryMask:
    """Rectangular 0/1 raster; pixels[r, c] is True on the hand."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=bool)
        if self.pixels.ndim != 2:
            raise ValueError("mask must be a 2-D grid")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("mask must have width >= 1 and height >= 1")

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


@dataclass(frozen=True)
class WristAnnotation:
    """Left and right wrist points in (x, y) pixel coordinates."""

    left: tuple
    right: tuple

    def __post_init__(self):
        if tuple(self.left) == tuple(self.right):
            raise ValueError("wrist points coincide")


@dataclass(frozen=True)
class NormalizationConfig:
    target_width: int = 100

    def __post_init__(self):
        if self.target_width < 8:
            raise ValueError("target_width must be >= 8")


@dataclass
class NormalizedMask:
    """Output of normalize(): fixed-width, wrist-at-bottom mask plus the
    transform that produced it."""

    mask: BinaryMask
    source_id: str = ""
    rotation_applied: float = 0.0
    scale_applied: float = 1.0
    _packed: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def grid(self):
        return self.mask.pixels

    @property
    def packed(self):
        """uint8 view of the grid, cached for the template-matching kernel."""
        if self._packed is None:
            self._packed = np.ascontiguousarray(self.mask.pixels, dtype=np.uint8)
        return self._packed


# ---------------------------------------------------------------------------
# PGM I/O

def _header_tokens(data, count):
    """Read `count` whitespace-separated header tokens, honoring # comments.
    Returns (tokens, index just past the last token)."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i] in b" \t\r\n\x0b\x0c":
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] != ord("\n"):
                i += 1
            continue
        if i >= n:
            raise PgmError("truncated PGM header")
        j = i
        while j < n and data[j] not in b" \t\r\n\x0b\x0c#":
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def load_mask(path):
    """Load a P5 (binary) or P2 (ASCII) grayscale PGM as a BinaryMask.

    Pixels with value >= 128 become True. Raises PgmError on malformed or
    zero-area images; missing files raise FileNotFoundError.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2 or data[:2] not in (b"P5", b"P2"):
        raise PgmError(f"{path}: not a P5/P2 PGM")
    magic = data[:2]
    try:
        tokens, pos = _header_tokens(data[2:], 3)
        width, height, maxval = (int(t) for t in tokens)
    except (ValueError, PgmError) as exc:
        raise PgmError(f"{path}: malformed header ({exc})") from None
    if width <= 0 or height <= 0:
        raise PgmError(f"{path}: zero-area image ({width}x{height})")
    if not 0 < maxval < 256:
        raise PgmError(f"{path}: unsupported maxval {maxval}")
    if magic == b"P5":
        start = 2 + pos + 1  # single whitespace byte after maxval
        raster = data[start:start + width * height]
        if len(raster) < width * height:
            raise PgmError(f"{path}: truncated raster")
        values = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    else:
        body = data[2 + pos:]
        # strip comments, then whitespace-split
        lines = [ln.split(b"#", 1)[0] for ln in body.split(b"\n")]
        fields = b" ".join(lines).split()
        if len(fields) < width * height:
            raise PgmError(f"{path}: truncated raster")
        try:
            values = np.array(fields[:width * height], dtype=np.int64).reshape(height, width)
        except ValueError:
            raise PgmError(f"{path}: non-numeric sample") from None
    return BinaryMask(values >= 128)


def save_mask(mask, path):
    """Write a BinaryMask (or NormalizedMask) as a P5 PGM, True -> 255.

    Round-trips bit-exactly through load_mask.
    """
    grid = mask.grid if isinstance(mask, NormalizedMask) else mask.pixels
    h, w = grid.shape
    raster = np.where(grid, 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


# ---------------------------------------------------------------------------
# wrist annotation CSV

def load_wrist_annotations(path):
    """Parse a wrist CSV (header id,lx,ly,rx,ry; # comments allowed) into a
    dict of id -> WristAnnotation."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(ln for ln in fh if not ln.lstrip().startswith("#"))
        try:
            header = next(rows)
        except StopIteration:
            raise WristCsvError(f"{path}: empty file") from None
        if [c.strip().lower() for c in header] != ["id", "lx", "ly", "rx", "ry"]:
            raise WristCsvError(f"{path}: expected header id,lx,ly,rx,ry")
        for lineno, row in enumerate(rows, 2):
            if not row:
                continue
            if len(row) != 5:
                raise WristCsvError(f"{path}:{lineno}: expected 5 fields")
            key = row[0].strip()
            try:
                lx, ly, rx, ry = (int(v) for v in row[1:])
            except ValueError:
                raise WristCsvError(f"{path}:{lineno}: non-integer coordinate") from None
            if key in out:
                raise WristCsvError(f"{path}:{lineno}: duplicate id {key!r}")
            if (lx, ly) == (rx, ry):
                raise WristCsvError(f"{path}:{lineno}: degenerate wrist (left == right)")
            out[key] = WristAnnotation(left=(lx, ly), right=(rx, ry))
    return out


def save_wrist_annotations(annotations, path):
    """Write id -> WristAnnotation entries as the wrist CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "lx", "ly", "rx", "ry"])
        for key in sorted(annotations):
            ann = annotations[key]
            writer.writerow([key, int(ann.left[0]), int(ann.left[1]),
                             int(ann.right[0]), int(ann.right[1])])


# ---------------------------------------------------------------------------
# normalization

def _rotate_points(xs, ys, theta, cx, cy):
    c, s = math.cos(theta), math.sin(theta)
    dx = xs - cx
    dy = ys - cy
    return cx + c * dx - s * dy, cy + s * dx + c * dy


def normalize(mask, wrist, cfg=None, source_id=""):
    """Normalize a mask: rotate about the wrist midpoint until the wrist
    segment is horizontal with the hand centroid above it, discard pixels
    strictly below the wrist line, crop to the tight bounding box and
    rescale to cfg.target_width with nearest-neighbor sampling.
    """
    cfg = cfg or NormalizationConfig()
    grid = mask.pixels
    ys, xs = np.nonzero(grid)
    if len(xs) == 0:
        raise NormalizationError(f"{source_id or 'mask'}: no hand pixels")

    lx, ly = wrist.left
    rx, ry = wrist.right
    mid_x = (lx + rx) / 2.0
    mid_y = (ly + ry) / 2.0
    theta = -math.atan2(ry - ly, rx - lx)

    # orient the hand upwards: centroid must land above the horizontal
    # wrist line (smaller y in image coordinates)
    _, cy_rot = _rotate_points(xs.mean(), ys.mean(), theta, mid_x, mid_y)
    if cy_rot > mid_y:
        theta += math.pi
    if theta > math.pi:
        theta -= 2.0 * math.pi
    elif theta <= -math.pi:
        theta += 2.0 * math.pi

    # rotated canvas: bounding box of the rotated true pixels, clipped to
    # the wrist line (rows strictly below it are discarded)
    rx_all, ry_all = _rotate_points(xs.astype(np.float64), ys.astype(np.float64),
                                    theta, mid_x, mid_y)
    x0 = int(np.floor(rx_all.min())) - 1
    x1 = int(np.ceil(rx_all.max())) + 1
    y0 = int(np.floor(ry_all.min())) - 1
    y1 = min(int(np.ceil(ry_all.max())) + 1, int(np.floor(mid_y)))
    if y1 < y0:
        raise NormalizationError(f"{source_id or 'mask'}: empty after wrist cut")

    out_x, out_y = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    src_x, src_y = _rotate_points(out_x.astype(np.float64), out_y.astype(np.float64),
                                  -theta, mid_x, mid_y)
    sx = np.rint(src_x).astype(np.int64)
    sy = np.rint(src_y).astype(np.int64)
    inside = (sx >= 0) & (sx < grid.shape[1]) & (sy >= 0) & (sy < grid.shape[0])
    rotated = np.zeros(out_x.shape, dtype=bool)
    rotated[inside] = grid[sy[inside], sx[inside]]

    ys2, xs2 = np.nonzero(rotated)
    if len(xs2) == 0:
        raise NormalizationError(f"{source_id or 'mask'}: empty after wrist cut")
    cropped = rotated[ys2.min():ys2.max() + 1, xs2.min():xs2.max() + 1]

    h_c, w_c = cropped.shape
    out_w = cfg.target_width
    out_h = max(1, round(h_c * out_w / w_c))
    col_idx = (np.rint(np.arange(out_w) * (w_c - 1) / (out_w - 1)).astype(np.int64)
               if out_w > 1 else np.zeros(1, dtype=np.int64))
    row_idx = (np.rint(np.arange(out_h) * (h_c - 1) / (out_h - 1)).astype(np.int64)
               if out_h > 1 else np.zeros(1, dtype=np.int64))
    scaled = cropped[np.ix_(row_idx, col_idx)]

    return NormalizedMask(
        mask=BinaryMask(scaled),
        source_id=source_id,
        rotation_applied=theta,
        scale_applied=out_w / w_c,
    )


def as_normalized(mask, source_id="", expected_width=None):
    """Wrap an already-normalized mask loaded from disk.

    Checks the fixed-width invariant when expected_width is given; the
    recorded transform is the identity since the original is unknown.
    """
    if expected_width is not None and mask.width != expected_width:
        raise NormalizationError(
            f"{source_id or 'mask'}: width {mask.width} != expected {expected_width}"
            " (run the normalize step first)")
    return NormalizedMask(mask=mask, source_id=source_id)
