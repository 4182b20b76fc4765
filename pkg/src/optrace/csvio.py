"""Plain CSV with ``# key=value`` metadata lines.

Floats are written with 17 significant digits, which is enough for every
double to read back bit for bit.
"""

import csv
import io
import math

import numpy as np


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if v is None:
        return "none"
    if isinstance(v, (tuple, list)):
        return ";".join(format_value(x) for x in v)
    return str(v)


def write_table(fh, meta, fieldnames, rows):
    """Write metadata lines, one header row and the data rows to ``fh``."""
    for k, v in meta.items():
        text = format_value(v)
        if "\n" in text or "\n" in str(k) or "=" in str(k):
            raise ValueError(f"bad metadata key {k!r}: keys hold no '=' and nothing is multi-line")
        fh.write(f"# {k}={text}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(fieldnames)
    for r in rows:
        w.writerow([format_value(x) for x in r])


def read_table(fh):
    """Inverse of :func:`write_table`; returns ``(meta, fieldnames, rows)``.

    Metadata values and cells come back as strings.
    """
    meta = {}
    lines = []
    for line in fh:
        if line.startswith("#") and not lines:
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val
        else:
            lines.append(line)
    reader = csv.reader(lines)
    fieldnames = next(reader)
    return meta, fieldnames, [r for r in reader if r]


def write_curves(fh, meta, series):
    """Long-format density table ``series,w,density``.

    ``series`` maps a label to ``(w, density)`` arrays.
    """
    rows = []
    for label, (w, p) in series.items():
        rows.extend((label, a, b) for a, b in zip(np.asarray(w, float), np.asarray(p, float)))
    write_table(fh, meta, ["series", "w", "density"], rows)


def read_curves(fh):
    """Returns ``(meta, {label: (w, density)})`` in file order."""
    meta, fields, rows = read_table(fh)
    if fields != ["series", "w", "density"]:
        raise ValueError(f"not a density table: columns {fields}")
    out = {}
    for label, w, p in rows:
        out.setdefault(label, ([], []))
        out[label][0].append(float(w))
        out[label][1].append(float(p))
    return meta, {k: (np.array(a), np.array(b)) for k, (a, b) in out.items()}


def dumps_curves(meta, series):
    buf = io.StringIO()
    write_curves(buf, meta, series)
    return buf.getvalue()
