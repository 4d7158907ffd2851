"""Multiband raster data model and bit-exact file I/O.

Supported containers:

* ENVI-flavored BSQ: a UTF-8 text header of ``key = value`` lines stored
  next to a raw binary payload (header at ``<data>.hdr``; either path may
  be passed to the loader). Recognized keys: ``samples``, ``lines``,
  ``bands``, ``data type`` (1 = uint8, 12 = uint16), ``interleave``
  (must be ``bsq``) and ``byte order`` (must be 0, little-endian).
  Unknown keys and lines without ``=`` are ignored.
* Binary PPM (P6, maxval <= 255): read as a 3-band 8-bit image, and used
  as the preview output format.
* Label rasters: ``<path>`` holds row-major little-endian uint32 ids
  (0 = unlabeled) and ``<path>.json`` is a sidecar carrying ``width``,
  ``height`` and ``label_count``.

Loading is strict: any size mismatch between a header and its payload is
rejected rather than repaired.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FormatError, UnsupportedFormatError

_DEPTH_DTYPES = {8: np.uint8, 16: np.uint16}

# ENVI numeric type codes accepted for input payloads.
_ENVI_TYPE_TO_DEPTH = {1: 8, 12: 16}
_DEPTH_TO_ENVI_TYPE = {8: 1, 16: 12}


@dataclass
class MultibandImage:
    """A width x height grid of N-band digital-level vectors.

    ``data`` has shape (height, width, bands) in row-major order, with
    dtype uint8 for ``depth`` 8 and uint16 for ``depth`` 16, so every
    sample is bounded by the declared bit depth.
    """

    data: np.ndarray
    depth: int

    def __post_init__(self):
        if self.depth not in _DEPTH_DTYPES:
            raise ContractError(f"unsupported bit depth {self.depth}; expected 8 or 16")
        if self.data.ndim != 3:
            raise ContractError("image data must have shape (height, width, bands)")
        if self.data.dtype != _DEPTH_DTYPES[self.depth]:
            raise ContractError(
                f"image dtype {self.data.dtype} does not match depth {self.depth}"
            )
        h, w, n = self.data.shape
        if h < 1 or w < 1 or n < 1:
            raise ContractError("image dimensions and band count must be >= 1")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def max_level(self) -> int:
        """Largest representable digital level, 2**depth - 1."""
        return (1 << self.depth) - 1


@dataclass
class LabelRaster:
    """Row-major uint32 label ids aligned with a source image; 0 = null."""

    labels: np.ndarray

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise ContractError("label raster must have shape (height, width)")
        if self.labels.dtype != np.uint32:
            raise ContractError("label raster dtype must be uint32")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def label_count(self) -> int:
        """Number of distinct nonzero ids present."""
        ids = np.unique(self.labels)
        return int(len(ids) - (1 if len(ids) and ids[0] == 0 else 0))


def _envi_paths(path):
    # Either the header ('x.hdr') or the payload path may be given.
    if path.endswith(".hdr"):
        return path, path[:-4]
    return path + ".hdr", path


def _parse_envi_header(text):
    fields = {}
    for line in text.splitlines():
        if "=" not in line:
            continue  # banner lines and comments
        key, _, value = line.partition("=")
        fields[key.strip().lower()] = value.strip()
    return fields


def _header_int(fields, key):
    if key not in fields:
        raise FormatError(f"ENVI header missing required key '{key}'")
    try:
        return int(fields[key])
    except ValueError:
        raise FormatError(f"ENVI header key '{key}' is not an integer: {fields[key]!r}")


def load_envi_bsq(path) -> MultibandImage:
    """Load a band-sequential raster from its header/payload pair."""
    header_path, data_path = _envi_paths(path)
    if not os.path.exists(header_path):
        raise FormatError(f"ENVI header not found: {header_path}")
    if not os.path.exists(data_path):
        raise FormatError(f"ENVI payload not found: {data_path}")
    with open(header_path, "r", encoding="utf-8") as fh:
        fields = _parse_envi_header(fh.read())

    samples = _header_int(fields, "samples")
    lines = _header_int(fields, "lines")
    bands = _header_int(fields, "bands")
    type_code = _header_int(fields, "data type")
    if samples < 1 or lines < 1 or bands < 1:
        raise FormatError("ENVI header dimensions must be >= 1")
    if type_code not in _ENVI_TYPE_TO_DEPTH:
        raise UnsupportedFormatError(f"unsupported ENVI data type code {type_code}")
    interleave = fields.get("interleave", "bsq").lower()
    if interleave != "bsq":
        raise UnsupportedFormatError(f"unsupported interleave '{interleave}'; only bsq")
    byte_order = fields.get("byte order", "0")
    if byte_order.strip() != "0":
        raise UnsupportedFormatError("only byte order 0 (little-endian) is supported")

    depth = _ENVI_TYPE_TO_DEPTH[type_code]
    dtype = np.dtype(_DEPTH_DTYPES[depth]).newbyteorder("<")
    expected = samples * lines * bands * dtype.itemsize
    with open(data_path, "rb") as fh:
        payload = fh.read()
    if len(payload) != expected:
        raise FormatError(
            f"ENVI payload is {len(payload)} bytes, header declares {expected}"
        )
    planes = np.frombuffer(payload, dtype=dtype).reshape(bands, lines, samples)
    data = np.ascontiguousarray(planes.transpose(1, 2, 0)).astype(
        _DEPTH_DTYPES[depth], copy=False
    )
    return MultibandImage(data=data, depth=depth)


def save_envi_bsq(image: MultibandImage, path) -> None:
    """Write ``image`` as a BSQ payload plus sidecar text header."""
    header_path, data_path = _envi_paths(path)
    planes = np.ascontiguousarray(image.data.transpose(2, 0, 1))
    payload = planes.astype(planes.dtype.newbyteorder("<"), copy=False).tobytes()
    header = (
        "ENVI\n"
        f"samples = {image.width}\n"
        f"lines = {image.height}\n"
        f"bands = {image.bands}\n"
        f"data type = {_DEPTH_TO_ENVI_TYPE[image.depth]}\n"
        "interleave = bsq\n"
        "byte order = 0\n"
    )
    with open(data_path, "wb") as fh:
        fh.write(payload)
    with open(header_path, "w", encoding="utf-8") as fh:
        fh.write(header)


def _ppm_tokens(buf, count):
    """Read ``count`` whitespace/comment separated ASCII tokens after the magic.

    Returns (tokens, offset) where offset points at the first payload byte,
    i.e. just past the single whitespace byte terminating the last token.
    """
    tokens = []
    i = 2  # past 'P6'
    n = len(buf)
    while len(tokens) < count:
        while i < n and buf[i : i + 1].isspace():
            i += 1
        if i < n and buf[i : i + 1] == b"#":
            while i < n and buf[i] not in (0x0A, 0x0D):
                i += 1
            continue
        start = i
        while i < n and not buf[i : i + 1].isspace() and buf[i : i + 1] != b"#":
            i += 1
        if i == start:
            raise FormatError("truncated PPM header")
        tokens.append(buf[start:i])
        if len(tokens) == count:
            if i >= n:
                raise FormatError("truncated PPM header")
            i += 1  # exactly one whitespace byte before the payload
    return tokens, i


def load_ppm(path) -> MultibandImage:
    """Load a binary P6 PPM as a 3-band, 8-bit image."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] != b"P6":
        raise FormatError("not a binary PPM (P6) file")
    tokens, offset = _ppm_tokens(buf, 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError("PPM header fields are not integers")
    if width < 1 or height < 1:
        raise FormatError("PPM dimensions must be >= 1")
    if maxval < 1 or maxval > 65535:
        raise FormatError(f"invalid PPM maxval {maxval}")
    if maxval > 255:
        raise UnsupportedFormatError("16-bit PPM is not supported; maxval must be <= 255")
    expected = width * height * 3
    payload = buf[offset:]
    if len(payload) != expected:
        raise FormatError(f"PPM payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return MultibandImage(data=data, depth=8)


def save_ppm(data: np.ndarray, path) -> None:
    """Write an (H, W, 3) uint8 array as binary P6, maxval 255."""
    if data.ndim != 3 or data.shape[2] != 3 or data.dtype != np.uint8:
        raise ContractError("PPM payload must be (H, W, 3) uint8")
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(data).tobytes())


def load_image(path, format=None) -> MultibandImage:
    """Load a multiband image, inferring the container from the extension.

    ``format`` may be 'envi-bsq' or 'ppm'; when None, '.ppm'/'.pnm' selects
    PPM and anything else the ENVI-BSQ pair.
    """
    if format is None:
        ext = os.path.splitext(path)[1].lower()
        format = "ppm" if ext in (".ppm", ".pnm") else "envi-bsq"
    if format == "ppm":
        return load_ppm(path)
    if format == "envi-bsq":
        return load_envi_bsq(path)
    raise ContractError(f"unknown image format '{format}'")


def save_label_raster(raster: LabelRaster, path) -> None:
    """Write raw little-endian uint32 labels plus a JSON sidecar.

    The sidecar at ``<path>.json`` records width, height and the number of
    distinct nonzero ids, so ``load_label_raster`` can rebuild the grid.
    """
    payload = raster.labels.astype("<u4", copy=False).tobytes()
    sidecar = {
        "width": raster.width,
        "height": raster.height,
        "label_count": raster.label_count(),
    }
    with open(path, "wb") as fh:
        fh.write(payload)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def load_label_raster(path) -> LabelRaster:
    sidecar_path = path + ".json"
    if not os.path.exists(sidecar_path):
        raise FormatError(f"label raster sidecar not found: {sidecar_path}")
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        try:
            sidecar = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid label raster sidecar: {exc}")
    try:
        width = int(sidecar["width"])
        height = int(sidecar["height"])
    except (KeyError, TypeError, ValueError):
        raise FormatError("label raster sidecar must carry integer width/height")
    if width < 1 or height < 1:
        raise FormatError("label raster dimensions must be >= 1")
    with open(path, "rb") as fh:
        payload = fh.read()
    expected = width * height * 4
    if len(payload) != expected:
        raise FormatError(
            f"label raster payload is {len(payload)} bytes, sidecar declares {expected}"
        )
    labels = (
        np.frombuffer(payload, dtype="<u4").reshape(height, width).astype(np.uint32)
    )
    return LabelRaster(labels=labels)


def save_preview(
    image: MultibandImage,
    labels: LabelRaster,
    signatures,
    band_triple,
    path,
) -> None:
    """Render each labeled cell with its signature color and write a PPM.

    ``signatures`` maps every nonzero id present in ``labels`` to an N-vector
    of digital levels; the (r, g, b) samples taken at ``band_triple`` are
    rescaled from the image depth to 8 bit. Null cells render black.
    """
    if labels.height != image.height or labels.width != image.width:
        raise ContractError("label raster dimensions do not match the image")
    triple = tuple(int(b) for b in band_triple)
    if len(triple) != 3:
        raise ContractError("band_triple must have exactly three entries")
    if any(b < 0 or b >= image.bands for b in triple):
        raise ContractError(f"band triple {triple} out of range for {image.bands} bands")

    ids = np.unique(labels.labels)
    ids = ids[ids != 0]
    table = np.zeros((len(ids) + 1, 3), dtype=np.uint8)
    maxv = image.max_level
    for row, lab in enumerate(ids, start=1):
        key = int(lab)
        if key not in signatures:
            raise ContractError(f"no signature for label {key}")
        sig = np.asarray(signatures[key])
        samples = sig[list(triple)].astype(np.int64)
        # rounded rescale from [0, 2^depth - 1] to [0, 255]
        table[row] = ((samples * 255 + maxv // 2) // maxv).astype(np.uint8)

    # index 0 -> black; nonzero labels -> their table row
    idx = np.searchsorted(ids, labels.labels)
    rows = np.where(labels.labels == 0, 0, idx + 1)
    save_ppm(table[rows], path)
