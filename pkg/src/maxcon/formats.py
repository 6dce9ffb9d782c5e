"""Plain-text readers and writers for correspondences and residual systems.

Match file: one correspondence per line, ``x1 y1 x2 y2``.
Instance file: a header ``n d epsilon`` followed by one line per row,
``group_index b a_1 ... a_d`` with 0-based group indices.
Blank lines and ``#`` comments are ignored in both.
"""

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .model import ProblemInstance, ResidualSystem


def _lines(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError:
        raise  # reported as a missing file, not a parse error
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read file: {exc}", path) from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _floats(fields, path, lineno):
    try:
        vals = [float(f) for f in fields]
    except ValueError:
        raise ParseError(f"expected numbers, got {' '.join(fields)!r}", path, lineno) from None
    if not all(np.isfinite(vals)):
        raise ParseError("non-finite value", path, lineno)
    return vals


def read_matches(path):
    """Load an ``(n, 4)`` array of correspondences."""
    rows = []
    for lineno, fields in _lines(path):
        if len(fields) != 4:
            raise ParseError(f"expected 4 values 'x1 y1 x2 y2', got {len(fields)}", path, lineno)
        rows.append(_floats(fields, path, lineno))
    if not rows:
        raise ParseError("no correspondences found", path)
    return np.array(rows)


def write_matches(path, matches):
    m = np.asarray(matches, dtype=float)
    with open(path, "w") as fh:
        fh.write("# x1 y1 x2 y2\n")
        for row in m:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_instance(path):
    """Load a :class:`ProblemInstance` (without ground truth)."""
    it = _lines(path)
    try:
        lineno, header = next(it)
    except StopIteration:
        raise ParseError("empty instance file", path) from None
    if len(header) != 3:
        raise ParseError("header must be 'n d epsilon'", path, lineno)
    try:
        n, d = int(header[0]), int(header[1])
        epsilon = float(header[2])
    except ValueError:
        raise ParseError(f"bad header {' '.join(header)!r}", path, lineno) from None
    if n < 1 or d < 1 or not epsilon >= 0:
        raise ParseError("header needs n >= 1, d >= 1, epsilon >= 0", path, lineno)

    groups, b, A = [], [], []
    for lineno, fields in it:
        if len(fields) != d + 2:
            raise ParseError(f"expected {d + 2} values 'group b a_1..a_{d}', got {len(fields)}",
                             path, lineno)
        g = fields[0]
        if not g.lstrip("-").isdigit():
            raise ParseError(f"group index must be an integer, got {g!r}", path, lineno)
        g = int(g)
        if not 0 <= g < n:
            raise ParseError(f"group index {g} outside 0..{n - 1}", path, lineno)
        vals = _floats(fields[1:], path, lineno)
        groups.append(g)
        b.append(vals[0])
        A.append(vals[1:])
    if not A:
        raise ParseError("instance has no rows", path)
    missing = np.setdiff1d(np.arange(n), groups)
    if missing.size:
        raise ParseError(f"groups without rows: {missing[:5].tolist()}", path)
    try:
        system = ResidualSystem(np.array(A), np.array(b), np.array(groups))
    except InvalidArgumentError as exc:
        raise ParseError(str(exc), path) from exc
    return ProblemInstance(system, epsilon)


def write_instance(path, system, epsilon):
    with open(path, "w") as fh:
        fh.write(f"{system.n} {system.d} {epsilon!r}\n")
        for g, b, a in zip(system.group, system.b, system.A):
            fh.write(" ".join([str(int(g)), repr(float(b))] + [repr(float(v)) for v in a]) + "\n")


def write_mask(path, n, inliers):
    mask = np.zeros(n, dtype=int)
    mask[np.asarray(inliers, dtype=int)] = 1
    with open(path, "w") as fh:
        fh.write("\n".join(str(v) for v in mask) + "\n")
