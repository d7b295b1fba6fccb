"""Depth/intensity image files: 16-bit ASCII PGM (P2) with a JSON metadata sidecar, PNG previews."""

import json

import numpy as np

import config
from error_logger import log_debug, log_error, log_library_check
from errors import ParseError
from geom.camera import CameraModel
from geom.depth_image import DepthImage, OrthoGrid
from geom.transforms import RigidTransform

try:
    from PIL import Image
    PIL_AVAILABLE = True
except ImportError:
    PIL_AVAILABLE = False

_CODE_SPAN = config.DepthImages.PGM_MAX - 1


def _quantisation(img: DepthImage):
    valid = img.valid_values()
    if len(valid) == 0:
        return 1.0, 0.0
    lo, hi = float(valid.min()), float(valid.max())
    scale = (hi - lo) / _CODE_SPAN if hi > lo else 1.0
    return scale, lo


def write_depth_image(img: DepthImage, path):
    """Write `img` as P2 PGM plus a sidecar JSON next to it.

    Code 0 marks invalid pixels; a valid value v is stored as 1 + round((v - offset) / scale),
    so the round-trip error is at most scale / 2.
    """
    scale, offset = _quantisation(img)
    codes = np.zeros(img.values.shape, dtype=np.int64)
    codes[img.mask] = 1 + np.rint((img.valid_values() - offset) / scale).astype(np.int64)
    np.clip(codes, 0, config.DepthImages.PGM_MAX, out=codes)

    sidecar = {
        "app_signature": config.App.SIGNATURE,
        "schema_version": config.App.SCHEMA_VERSION,
        "kind": img.kind,
        "width": img.width,
        "height": img.height,
        "sentinel": config.DepthImages.PGM_SENTINEL,
        "scale": scale,
        "offset": offset,
        "mm_per_px": None if img.ortho is None else img.ortho.mm_per_px,
        "camera": None if img.camera is None else img.camera.to_dict(),
        "cam_pose": None if img.cam_pose is None else img.cam_pose.to_list(),
        "ortho": None if img.ortho is None else img.ortho.to_dict(),
    }
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"P2\n# {config.App.NAME} {img.kind}\n{img.width} {img.height}\n"
                    f"{config.DepthImages.PGM_MAX}\n")
            np.savetxt(f, codes, fmt="%d")
        with open(config.Files.sidecar_path(path), "w", encoding="utf-8") as f:
            json.dump(sidecar, f, indent=2)
    except OSError as e:
        log_error(f"Failed to write depth image {path}", e)
        raise
    log_debug(f"Wrote {img.kind} image {img.width}x{img.height} to {path}")


def _pgm_tokens(text):
    """(token, line_number) pairs with comments stripped."""
    for number, line in enumerate(text.splitlines(), start=1):
        for token in line.split("#", 1)[0].split():
            yield token, number


def read_depth_image(path) -> DepthImage:
    """Read a PGM written by `write_depth_image` together with its sidecar."""
    try:
        with open(path, "r", encoding="ascii") as f:
            text = f.read()
        with open(config.Files.sidecar_path(path), "r", encoding="utf-8") as f:
            meta = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid sidecar JSON: {e.msg}", e.lineno)
    except (OSError, UnicodeDecodeError) as e:
        log_error(f"Failed to read depth image {path}", e)
        raise

    tokens = list(_pgm_tokens(text))
    if not tokens or tokens[0][0] != "P2":
        raise ParseError("missing 'P2' magic", 1)
    try:
        width, height, maxval = (int(t) for t, _ in tokens[1:4])
    except ValueError:
        raise ParseError("malformed PGM header", tokens[1][1] if len(tokens) > 1 else 1)
    body = tokens[4:]
    if len(body) != width * height:
        line = body[-1][1] if body else tokens[-1][1]
        raise ParseError(f"expected {width * height} samples, found {len(body)}", line)
    try:
        codes = np.array([int(t) for t, _ in body], dtype=np.int64).reshape(height, width)
    except ValueError:
        bad = next(n for t, n in body if not t.lstrip("-").isdigit())
        raise ParseError("non-integer sample", bad)
    if codes.min(initial=0) < 0 or codes.max(initial=0) > maxval:
        raise ParseError("sample outside [0, maxval]")

    sentinel = int(meta.get("sentinel", config.DepthImages.PGM_SENTINEL))
    mask = codes != sentinel
    values = np.full(codes.shape, np.nan)
    values[mask] = float(meta["offset"]) + (codes[mask] - 1) * float(meta["scale"])

    camera = None if meta.get("camera") is None else CameraModel.from_dict(meta["camera"])
    cam_pose = None if meta.get("cam_pose") is None else RigidTransform.from_list(meta["cam_pose"])
    ortho = None if meta.get("ortho") is None else OrthoGrid.from_dict(meta["ortho"])
    return DepthImage(values, meta.get("kind", "depth"), mask, camera, cam_pose, ortho)


def export_preview_png(img: DepthImage, path):
    """8-bit greyscale preview: intensity maps directly, depth is stretched near=white.

    Returns False when Pillow is unavailable.
    """
    log_library_check("Pillow", PIL_AVAILABLE)
    if not PIL_AVAILABLE:
        return False

    grey = np.full(img.values.shape, config.DepthImages.PREVIEW_INVALID_GREY, dtype=np.uint8)
    valid = img.valid_values()
    if len(valid):
        if img.kind == "intensity":
            level = np.clip(valid, 0.0, 1.0)
        else:
            lo, hi = valid.min(), valid.max()
            level = (hi - valid) / (hi - lo) if hi > lo else np.ones_like(valid)
        grey[img.mask] = np.rint(level * 255).astype(np.uint8)

    try:
        Image.fromarray(grey).save(path)
    except OSError as e:
        log_error(f"Failed to write preview {path}", e)
        raise
    log_debug(f"Preview written: {path}")
    return True
