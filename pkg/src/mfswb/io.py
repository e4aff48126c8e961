"""Point-cloud and image readers, CSV / text / PNG writers, run manifests."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .measures import DiscreteMeasure

METRICS_HEADER = ("iteration", "F", "W", "objective")


class ParseError(ValueError):
    def __init__(self, path, line: int | None, msg: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {msg}")
        self.line = line


class FormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# --------------------------------------------------------------------------- point clouds

def _parse_xyz(path, lines):
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(path, lineno, f"expected 3 coordinates, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    return rows


def _parse_ply(path, lines):
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, 1, "missing 'ply' magic")
    fmt = None
    elements = []  # (name, count, [property names])
    end = None
    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            fmt = tok[1] if len(tok) > 1 else None
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError(path, lineno, "malformed element line")
            try:
                elements.append((tok[1], int(tok[2]), []))
            except ValueError:
                raise ParseError(path, lineno, f"bad element count {tok[2]!r}") from None
        elif tok[0] == "property":
            if not elements:
                raise ParseError(path, lineno, "property before any element")
            elements[-1][2].append(tok[-1])
        elif tok[0] == "end_header":
            end = lineno
            break
        else:
            raise ParseError(path, lineno, f"unexpected header keyword {tok[0]!r}")
    if end is None:
        raise ParseError(path, None, "missing end_header")
    if fmt != "ascii":
        raise ParseError(path, None, f"only ASCII PLY is supported, got format {fmt!r}")
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise ParseError(path, None, "no vertex element")
    lineno = end
    body = lines[end:]
    pos = 0
    rows = []
    for name, count, props in elements:
        if name == "vertex":
            try:
                cols = [props.index(c) for c in ("x", "y", "z")]
            except ValueError:
                raise ParseError(path, None, "vertex element lacks x/y/z properties") from None
        for _ in range(count):
            if pos >= len(body):
                raise ParseError(path, lineno + pos + 1, f"unexpected end of file in element {name!r}")
            if name == "vertex":
                parts = body[pos].split()
                if len(parts) < len(props):
                    raise ParseError(path, lineno + pos + 1, f"expected {len(props)} values, got {len(parts)}")
                try:
                    rows.append([float(parts[c]) for c in cols])
                except ValueError as exc:
                    raise ParseError(path, lineno + pos + 1, str(exc)) from None
            pos += 1
    return rows


def load_pointcloud(path) -> DiscreteMeasure:
    """Uniform empirical measure over the points of an XYZ-text or ASCII-PLY file."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    is_ply = path.suffix.lower() == ".ply" or (lines and lines[0].strip() == "ply")
    rows = _parse_ply(path, lines) if is_ply else _parse_xyz(path, lines)
    if not rows:
        raise ParseError(path, None, "no points")
    pts = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ParseError(path, None, "non-finite coordinates")
    return DiscreteMeasure.uniform(pts)


def write_points(points, path) -> None:
    """One whitespace-separated row per point (XYZ-text for 3D clouds)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in pts:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def write_ply(points, path) -> None:
    pts = np.asarray(points, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"ply\nformat ascii 1.0\nelement vertex {pts.shape[0]}\n")
        fh.write("property float x\nproperty float y\nproperty float z\nend_header\n")
        for row in pts:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


# --------------------------------------------------------------------------- images

@dataclass(frozen=True)
class ImagePalette:
    width: int
    height: int
    pixels: np.ndarray  # (width * height, 3) RGB in [0, 255], row-major

    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.uniform(self.pixels)


def load_image_palette(path) -> tuple[ImagePalette, DiscreteMeasure]:
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("RGB", "RGBA"):
                raise FormatError(f"{path}: expected an 8-bit RGB image, got mode {im.mode!r}")
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"{path}: cannot decode image ({exc})") from None
    h, w, _ = arr.shape
    palette = ImagePalette(w, h, arr.reshape(-1, 3))
    return palette, palette.measure()


def quantize_colors(colors) -> np.ndarray:
    return np.rint(np.clip(np.asarray(colors, dtype=np.float64), 0.0, 255.0)).astype(np.uint8)


def write_image_palette(palette: ImagePalette, colors, path) -> None:
    """Write ``colors`` (n x 3, same pixel order as ``palette``) as an 8-bit RGB PNG."""
    colors = np.asarray(colors, dtype=np.float64)
    n = palette.width * palette.height
    if colors.shape != (n, 3):
        raise ValueError(f"colors have shape {colors.shape}, expected ({n}, 3)")
    img = quantize_colors(colors).reshape(palette.height, palette.width, 3)
    Image.fromarray(img).save(path, format="PNG")


# --------------------------------------------------------------------------- metrics & manifests

def write_metrics_csv(trace, path) -> None:
    records = trace.records if hasattr(trace, "records") else trace
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in records:
            w.writerow([int(r.iteration), _fmt(r.F), _fmt(r.W), _fmt(r.objective)])


def read_metrics_csv(path):
    from .optimizer import MetricsRecord

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != METRICS_HEADER:
            raise ParseError(path, 1, f"bad header {header!r}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ParseError(path, lineno, f"expected 4 fields, got {len(row)}")
            try:
                out.append(MetricsRecord(int(row[0]), float(row[1]), float(row[2]), float(row[3])))
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return out


def write_manifest(params: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(params, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
