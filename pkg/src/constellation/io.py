"""Plain-text minutiae files.

Format::

    MNU 1 optional-id
    # comments and blank lines are ignored
    x y theta_degrees

Angles are stored in degrees for hand editing and converted to radians on
parse. Values are written with six decimals, so ``render(parse(text))``
reproduces any rendered file exactly.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .core import EPS_DUP, Constellation

MAGIC = "MNU"
VERSION = "1"


class FormatError(ValueError):
    """A malformed minutiae file; ``line`` is 1-based (0 when not line-specific)."""

    def __init__(self, message: str, line: int = 0, source: str = ""):
        self.line = line
        self.source = source
        where = f"{source}:" if source else ""
        where += f"{line}: " if line else (" " if source else "")
        super().__init__(f"{where}{message}")


def _fmt(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def render(c: Constellation) -> str:
    lines = [f"{MAGIC} {VERSION} {c.id}".rstrip()]
    for x, y, t in c.points:
        d = _fmt(math.degrees(t))
        if d == "360.000000":
            d = "0.000000"
        lines.append(f"{_fmt(x)} {_fmt(y)} {d}")
    return "\n".join(lines) + "\n"


def parse(text: str, source: str = "") -> Constellation:
    header = None
    rows = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            parts = line.split(None, 2)
            if len(parts) < 2 or parts[0] != MAGIC:
                raise FormatError(f"expected header '{MAGIC} {VERSION} [id]', got {raw.strip()!r}", no, source)
            if parts[1] != VERSION:
                raise FormatError(f"unsupported version {parts[1]!r}", no, source)
            header = parts[2].strip() if len(parts) > 2 else ""
            continue
        fields = line.split()
        if len(fields) != 3:
            raise FormatError(f"expected 'x y theta_degrees', got {len(fields)} field(s)", no, source)
        try:
            x, y, d = (float(f) for f in fields)
        except ValueError:
            raise FormatError(f"non-numeric field in {line!r}", no, source) from None
        if not all(map(math.isfinite, (x, y, d))):
            raise FormatError("non-finite value", no, source)
        rows.append((x, y, math.radians(d), no))
    if header is None:
        raise FormatError("missing header", 0, source)
    pts = np.array([r[:3] for r in rows], dtype=float).reshape(-1, 3)
    if len(pts) > 1:
        d2 = ((pts[:, None, :2] - pts[None, :, :2]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        if d2.min() <= EPS_DUP**2:
            i, j = sorted(np.unravel_index(np.argmin(d2), d2.shape))
            raise FormatError(f"duplicate of the minutia on line {rows[i][3]}", rows[j][3], source)
    return Constellation(pts, id=header)


def read_mnu(path) -> Constellation:
    path = Path(path)
    return parse(path.read_text(), source=str(path))


def write_mnu(path, c: Constellation) -> None:
    Path(path).write_text(render(c))
