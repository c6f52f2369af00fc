"""CSV output with a fixed dialect and atomic writes.

Dialect: comma separator, single header row, decimal point, scientific
notation for values with |v| < 1e-3 or |v| > 1e6 (zero prints as 0).
Files are written to a temp file and renamed, so readers never observe a
partial file.
"""

import os
import tempfile


def fmt_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int,)) or (isinstance(v, float) and v.is_integer()
                                 and abs(v) <= 1e6):
        return str(int(v))
    v = float(v)
    if v == 0.0:
        return "0"
    if abs(v) < 1e-3 or abs(v) > 1e6:
        return f"{v:.12e}"
    return f"{v:.12g}"


def write_csv(path, header, rows) -> None:
    """Atomically write `rows` (iterables of values) under `header`."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt_value(v) for v in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
