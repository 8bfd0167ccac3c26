"""Bit-exact trinary map persistence: binary PGM raster + YAML metadata.

Pixel encoding follows the ROS map_server convention: 0 = occupied,
254 = free, 205 = unknown, with row 0 at the top of the map (largest y).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .errors import MapFormatError
from .geometry import GridMeta, Pose2D
from .mapping import FREE, OCCUPIED, UNKNOWN, TrinaryGrid

PIXEL_OCCUPIED = 0
PIXEL_UNKNOWN = 205
PIXEL_FREE = 254

_STATE_TO_PIXEL = {int(OCCUPIED): PIXEL_OCCUPIED, int(UNKNOWN): PIXEL_UNKNOWN, int(FREE): PIXEL_FREE}
_PIXEL_TO_STATE = {v: k for k, v in _STATE_TO_PIXEL.items()}


def encode_pgm(grid: TrinaryGrid) -> bytes:
    """Serialize to P5 bytes; top raster row is the map's highest y row."""
    h, w = grid.meta.shape
    pixels = np.empty((h, w), dtype=np.uint8)
    for state, pixel in _STATE_TO_PIXEL.items():
        pixels[grid.cells == state] = pixel
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + pixels[::-1, :].tobytes()


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments between header tokens
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise MapFormatError(f"unexpected end of PGM header at byte {start}")
    return data[start:pos], pos


def decode_pgm(data: bytes, meta: GridMeta) -> TrinaryGrid:
    """Parse P5 bytes against the given metadata; strict on values and size."""
    magic, pos = _read_token(data, 0)
    if magic != b"P5":
        raise MapFormatError(f"not a binary PGM (magic {magic!r} at byte 0)")
    w_tok, pos = _read_token(data, pos)
    h_tok, pos = _read_token(data, pos)
    maxval_tok, pos = _read_token(data, pos)
    try:
        w, h, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    except ValueError as exc:
        raise MapFormatError(f"bad PGM header near byte {pos}: {exc}") from exc
    if maxval != 255:
        raise MapFormatError(f"PGM maxval must be 255, got {maxval}")
    if (w, h) != (meta.width, meta.height):
        raise MapFormatError(f"PGM is {w}x{h} but metadata says {meta.width}x{meta.height}")
    pos += 1  # single whitespace byte after maxval
    body = data[pos:pos + w * h]
    if len(body) != w * h:
        raise MapFormatError(f"PGM truncated: expected {w * h} pixels, got {len(body)} (at byte {pos})")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(h, w)[::-1, :]
    cells = np.empty((h, w), dtype=np.int8)
    known = np.zeros((h, w), dtype=bool)
    for pixel, state in _PIXEL_TO_STATE.items():
        mask = pixels == pixel
        cells[mask] = state
        known |= mask
    if not known.all():
        bad = int(pixels[~known].flat[0])
        raise MapFormatError(f"unexpected pixel value {bad} (expected 0/205/254)")
    return TrinaryGrid(meta=meta, cells=cells)


def save_map(grid: TrinaryGrid, pgm_path, yaml_path=None) -> tuple[Path, Path]:
    """Write the PGM + YAML pair; YAML goes next to the PGM by default."""
    pgm_path = Path(pgm_path)
    yaml_path = Path(yaml_path) if yaml_path else pgm_path.with_suffix(".yaml")
    pgm_path.write_bytes(encode_pgm(grid))
    origin = grid.meta.origin
    yaml_path.write_text(
        f"image: {pgm_path.name}\n"
        f"resolution: {grid.meta.resolution}\n"
        f"origin: [{origin.x}, {origin.y}, {origin.theta}]\n"
        "negate: 0\n"
        "occupied_thresh: 0.65\n"
        "free_thresh: 0.196\n",
        encoding="ascii")
    return pgm_path, yaml_path


def load_map(yaml_path) -> TrinaryGrid:
    """Read a PGM + YAML pair back into a trinary grid."""
    yaml_path = Path(yaml_path)
    try:
        doc = yaml.safe_load(yaml_path.read_text(encoding="ascii"))
    except yaml.YAMLError as exc:
        raise MapFormatError(f"bad map YAML {yaml_path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise MapFormatError(f"map YAML {yaml_path} is not a mapping")
    try:
        image = doc["image"]
        resolution = float(doc["resolution"])
        ox, oy, yaw = (float(v) for v in doc["origin"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MapFormatError(f"map YAML {yaml_path} missing/bad key: {exc}") from exc
    pgm_path = yaml_path.parent / image
    if not pgm_path.exists():
        raise MapFormatError(f"map image {pgm_path} does not exist")
    data = pgm_path.read_bytes()
    magic, pos = _read_token(data, 0)
    w_tok, pos = _read_token(data, pos)
    h_tok, pos = _read_token(data, pos)
    try:
        w, h = int(w_tok), int(h_tok)
    except ValueError as exc:
        raise MapFormatError(f"bad PGM header in {pgm_path}: {exc}") from exc
    meta = GridMeta(resolution=resolution, origin=Pose2D(ox, oy, yaw), width=w, height=h)
    return decode_pgm(data, meta)
