import csv
import json
import math
import os.path as osp
import sys

import numpy as np


def format_float(value):
    """17 significant digits; JSON has no inf or nan, so those become null."""
    value = float(value)
    if not math.isfinite(value):
        return "null"
    text = format(value, ".17g")
    if "." not in text and "e" not in text:
        text += ".0"
    return text


def _is_flat(items):
    return all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items)


def to_json(obj, indent=2, _level=0):
    """Serialize reports deterministically: insertion-ordered keys, fixed float format."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            "{}{}: {}".format(pad, json.dumps(str(k)), to_json(v, indent, _level + 1))
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(parts) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if _is_flat(obj):
            return "[" + ", ".join(to_json(v, indent, _level + 1) for v in obj) + "]"
        parts = [pad + to_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + end + "]"
    if hasattr(obj, "to_dict"):
        return to_json(obj.to_dict(), indent, _level)
    raise TypeError("Cannot serialize {!r}".format(type(obj).__name__))


def _open_output(path):
    if path == "-":
        return sys.stdout, False
    dirname = osp.dirname(path)
    if dirname and not osp.isdir(dirname):
        raise ValueError("Output directory does not exist: {}".format(dirname))
    return open(path, "w", encoding="utf-8", newline=""), True


def write_json(path, report):
    f, close = _open_output(path)
    try:
        f.write(to_json(report))
        f.write("\n")
    finally:
        if close:
            f.close()


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        text = format_float(value)
        return "" if text == "null" else text
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows):
    f, close = _open_output(path)
    try:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    finally:
        if close:
            f.close()
