"""Mask file I/O: 8-bit grayscale PGM (P5/P2) and PNG.

Foreground is 255, background 0; thresholding at 128 on read tolerates
antialiased sources.
"""

import numpy as np

from .errors import DataError
from .mask import BinaryMask


def _write_pgm(bits, path):
    h, w = bits.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write((bits.astype(np.uint8) * 255).tobytes())


def _read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        # skip whitespace and comments
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            j = data.find(b"\n", i)
            i = len(data) if j < 0 else j + 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    if len(tokens) < 4 or tokens[0] not in (b"P5", b"P2"):
        raise DataError(f"not a P5/P2 PGM file: {path}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if tokens[0] == b"P5":
        i += 1  # single whitespace byte after maxval
        raw = np.frombuffer(data, np.uint8, count=w * h, offset=i)
        if raw.size != w * h:
            raise DataError(f"truncated PGM payload: {path}")
        img = raw.reshape(h, w)
    else:
        vals = np.array(data[i:].split(), dtype=np.int64)
        if vals.size != w * h:
            raise DataError(f"truncated P2 payload: {path}")
        img = vals.reshape(h, w)
    return img, maxval


def save_mask(mask, path):
    """Write a mask as .pgm (binary P5) or .png by file extension."""
    path = str(path)
    if path.endswith(".pgm"):
        _write_pgm(mask.bits, path)
    elif path.endswith(".png"):
        import cv2

        ok = cv2.imwrite(path, mask.bits.astype(np.uint8) * 255)
        if not ok:
            raise DataError(f"failed to write {path}")
    else:
        raise DataError(f"unsupported mask extension: {path}")
    return path


def load_mask(path, gsd):
    """Read a .pgm/.png mask; pixels above half intensity are foreground."""
    path = str(path)
    if path.endswith(".pgm"):
        img, maxval = _read_pgm(path)
        thresh = maxval / 2
    elif path.endswith(".png"):
        import cv2

        img = cv2.imread(path, cv2.IMREAD_GRAYSCALE)
        if img is None:
            raise DataError(f"cannot read {path}")
        thresh = 127.5
    else:
        raise DataError(f"unsupported mask extension: {path}")
    return BinaryMask(bits=img > thresh, gsd=gsd)
