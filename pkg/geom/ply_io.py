"""ASCII PLY reading and writing (vertex element only)."""

import numpy as np

from error_logger import log_debug, log_error
from errors import MissingCoordinateProperty, ParseError
from geom.cloud import PointCloud

_SCALAR_TYPES = {"char", "uchar", "short", "ushort", "int", "uint", "float", "double",
                 "int8", "uint8", "int16", "uint16", "int32", "uint32", "float32", "float64"}
_FRAME_COMMENT = "frame_id"


def write_ply(c: PointCloud, path):
    """Write x y z [nx ny nz] [intensity] per vertex with round-trip float precision."""
    names = ["x", "y", "z"]
    columns = [c.points]
    if c.has_normals:
        names += ["nx", "ny", "nz"]
        columns.append(c.normals)
    if c.has_intensities:
        names.append("intensity")
        columns.append(c.intensities.reshape(-1, 1))
    data = np.hstack(columns) if len(c) else np.zeros((0, len(names)))

    header = ["ply", "format ascii 1.0", f"comment {_FRAME_COMMENT} {c.frame_id}",
              f"element vertex {len(c)}"]
    header += [f"property double {name}" for name in names]
    header.append("end_header")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(header) + "\n")
            np.savetxt(f, data, fmt="%.17g")
    except OSError as e:
        log_error(f"Failed to write PLY {path}", e)
        raise
    log_debug(f"Wrote {len(c)} vertices to {path}")


def _parse_header(lines):
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1)
    properties = []
    count = None
    frame_id = "camera"
    in_vertex = False
    for number, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens:
            continue
        keyword = tokens[0]
        if keyword == "format":
            if tokens[1:] != ["ascii", "1.0"]:
                raise ParseError(f"unsupported format '{' '.join(tokens[1:])}'", number)
        elif keyword == "comment":
            if len(tokens) >= 3 and tokens[1] == _FRAME_COMMENT:
                frame_id = tokens[2]
        elif keyword == "obj_info":
            continue
        elif keyword == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", number)
            if tokens[1] != "vertex":
                raise ParseError(f"unsupported element '{tokens[1]}'", number)
            try:
                count = int(tokens[2])
            except ValueError:
                raise ParseError(f"bad vertex count '{tokens[2]}'", number)
            in_vertex = True
        elif keyword == "property":
            if not in_vertex:
                raise ParseError("property outside vertex element", number)
            if len(tokens) != 3 or tokens[1] not in _SCALAR_TYPES:
                raise ParseError(f"unsupported property '{raw.strip()}'", number)
            properties.append(tokens[2])
        elif keyword == "end_header":
            if count is None:
                raise ParseError("no vertex element declared", number)
            return properties, count, frame_id, number
        else:
            raise ParseError(f"unexpected header keyword '{keyword}'", number)
    raise ParseError("missing end_header", len(lines))


def read_ply(path) -> PointCloud:
    """Read an ASCII PLY written by `write_ply` or any tool using the same subset."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        log_error(f"Failed to read PLY {path}", e)
        raise

    properties, count, frame_id, header_end = _parse_header(lines)
    for axis in ("x", "y", "z"):
        if axis not in properties:
            raise MissingCoordinateProperty(f"vertex element lacks '{axis}' property", header_end)

    data = np.empty((count, len(properties)))
    row = 0
    number = header_end
    for number, raw in enumerate(lines[header_end:], start=header_end + 1):
        if row == count:
            break
        tokens = raw.split()
        if not tokens:
            continue
        if len(tokens) != len(properties):
            raise ParseError(f"expected {len(properties)} values, got {len(tokens)}", number)
        try:
            data[row] = [float(t) for t in tokens]
        except ValueError:
            raise ParseError(f"non-numeric value in '{raw.strip()}'", number)
        row += 1
    if row < count:
        raise ParseError(f"expected {count} vertices, found {row}", number)

    column = {name: i for i, name in enumerate(properties)}
    points = data[:, [column["x"], column["y"], column["z"]]]
    normals = None
    if all(name in column for name in ("nx", "ny", "nz")):
        normals = data[:, [column["nx"], column["ny"], column["nz"]]]
        lengths = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = normals / np.where(lengths > 0, lengths, 1.0)
    intensities = data[:, column["intensity"]] if "intensity" in column else None

    try:
        return PointCloud(points, normals, intensities, frame_id)
    except ValueError as e:
        raise ParseError(str(e))
