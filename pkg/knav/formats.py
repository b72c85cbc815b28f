"""
On-disk formats.

Frame files (snapshot sequences, forecasts, operator matrices) are plain text: a header line
``rows cols frames``, optional ``#`` comment lines, then the frames separated by one blank line, each
frame being ``rows`` lines of ``cols`` comma-separated values. Everything tabular is CSV; run manifests
are JSON with sorted keys.
"""

from knav.lifting import DensitySnapshot
from knav.jsons import dumps
from knav.simulation import LOG_COLUMNS
from pathlib import Path
import numpy as np
import hashlib
import json
import csv
import logging

logger = logging.getLogger(__name__)


class FormatError(ValueError):
    pass


def _number(value) -> str:
    return repr(float(value))


def write_frames(path: Path, frames, comments=()):
    frames = [np.atleast_2d(np.asarray(f, dtype=float)) for f in frames]
    if not frames:
        raise FormatError("nothing to write to {0}".format(path))
    rows, cols = frames[0].shape
    if any(f.shape != (rows, cols) for f in frames):
        raise FormatError("all frames written to {0} must share one shape".format(path))
    with open(path, "w", newline="\n") as f:
        f.write("{0} {1} {2}\n".format(rows, cols, len(frames)))
        for comment in comments:
            f.write("# {0}\n".format(comment))
        for index, frame in enumerate(frames):
            if index:
                f.write("\n")
            for row in frame:
                f.write(",".join(_number(v) for v in row))
                f.write("\n")


def read_frames(path: Path):
    """
    returns (frames, comments)
    """
    with open(path, "r") as f:
        lines = f.read().splitlines()
    if not lines:
        raise FormatError("{0} is empty".format(path))
    try:
        rows, cols, count = [int(v) for v in lines[0].split()]
    except ValueError:
        raise FormatError('{0}: bad header "{1}", expected "rows cols frames"'.format(path, lines[0]))
    comments = []
    frames = []
    current = []
    for number, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if stripped.startswith("#"):
            comments.append(stripped[1:].strip())
            continue
        if not stripped:
            if current:
                frames.append(current)
                current = []
            continue
        try:
            values = [float(v) for v in stripped.split(",")]
        except ValueError:
            raise FormatError("{0}:{1}: cannot parse values".format(path, number))
        if len(values) != cols:
            raise FormatError("{0}:{1}: expected {2} values, got {3}".format(path, number, cols, len(values)))
        current.append(values)
    if current:
        frames.append(current)
    if len(frames) != count:
        raise FormatError("{0}: header announces {1} frames, found {2}".format(path, count, len(frames)))
    for index, frame in enumerate(frames):
        if len(frame) != rows:
            raise FormatError("{0}: frame {1} has {2} rows, expected {3}".format(path, index, len(frame), rows))
    return [np.array(frame) for frame in frames], comments


def write_snapshots(path: Path, snapshots, comments=()):
    write_frames(path, [s.values for s in snapshots], comments)


def read_snapshots(path: Path, start: int = 0):
    frames, _ = read_frames(path)
    try:
        return [DensitySnapshot(frame, start + index) for index, frame in enumerate(frames)]
    except ValueError as e:
        raise FormatError("{0}: {1}".format(path, e))


def write_matrix(path: Path, matrix: np.ndarray, comments=()):
    write_frames(path, [matrix], comments)


def read_matrix(path: Path) -> np.ndarray:
    frames, _ = read_frames(path)
    if len(frames) != 1:
        raise FormatError("{0}: a matrix file holds exactly one frame, found {1}".format(path, len(frames)))
    return frames[0]


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_number(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path: Path):
    with open(path, "r", newline="") as f:
        return list(csv.DictReader(f))


def write_trace(path: Path, trace):
    _write_csv(path, ["t", "O", "K_err_fro", "consensus_defect"], trace.rows())


def write_points(path: Path, point_sets):
    rows = []
    for points in point_sets:
        for x, y in points.points:
            rows.append((float(x), float(y), points.horizon))
    _write_csv(path, ["x", "y", "h"], rows)


def polytope_rows(polytope, step=None):
    prefix = () if step is None else (step,)
    for i, (normal, offset) in enumerate(zip(polytope.normals, polytope.offsets)):
        # 1-based horizon step, obstacle and facet
        yield prefix + (polytope.horizon + 1, polytope.index + 1, i + 1, float(normal[0]), float(normal[1]), float(offset))


def write_polytopes(path: Path, polytopes):
    rows = [r for p in polytopes for r in polytope_rows(p)]
    _write_csv(path, ["h", "l", "i", "n_x", "n_y", "rho"], rows)


def write_step_polytopes(path: Path, entries):
    rows = [r for step, p in entries for r in polytope_rows(p, step)]
    _write_csv(path, ["step", "h", "l", "i", "n_x", "n_y", "rho"], rows)


def write_eigenvalues(path: Path, named):
    rows = []
    for name in sorted(named):
        for index, value in enumerate(np.asarray(named[name]).reshape(-1)):
            rows.append((name, index + 1, float(np.real(value)), float(np.imag(value))))
    _write_csv(path, ["set", "index", "re", "im"], rows)


def write_error_map(path: Path, error_map):
    rows = []
    for h, cells in enumerate(error_map.cells, start=1):
        for (r, c), value in np.ndenumerate(cells):
            rows.append((h, r, c, float(value)))
    _write_csv(path, ["h", "row", "col", "abs_error"], rows)


def write_step_errors(path: Path, error_map):
    _write_csv(path, ["h", "fro_error"], [(h, float(e)) for h, e in enumerate(error_map.step_errors, start=1)])


def write_log(path: Path, log):
    _write_csv(path, LOG_COLUMNS, [[row[c] for c in LOG_COLUMNS] for row in log.rows])


def write_distances(path: Path, log):
    header = ["t"] + ["obstacle_{0}".format(i + 1) for i in range(log.obstacle_count)]
    rows = [[row["t"]] + [float(d) for d in distances] for row, distances in zip(log.rows, log.distances)]
    _write_csv(path, header, rows)


def write_json(path: Path, content):
    with open(path, "w") as f:
        f.write(dumps(content))
        f.write("\n")


def read_json(path: Path):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError("{0}: {1}".format(path, e))


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
