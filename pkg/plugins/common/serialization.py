"""
JSON and CSV writers with stable, byte-reproducible output.
"""
import csv
import math
import os

import numpy as np
import orjson

_ORJSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS


def json_safe(obj):
    """
    Recursively convert values orjson cannot encode faithfully.

    Infinities and NaN become the strings "inf", "-inf" and "nan"; numpy
    scalars and arrays become Python numbers and lists; tuples become lists.
    """
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(item) for item in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
    return obj


def dumps(obj):
    """Serialize to pretty JSON bytes with sorted keys."""
    return orjson.dumps(json_safe(obj), option=_ORJSON_OPTIONS)


def loads(data):
    return orjson.loads(data)


def read_json(path):
    with open(path, 'rb') as f:
        return orjson.loads(f.read())


def write_json(path, obj):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(dumps(obj))
    return path


def format_cell(value):
    """Format one CSV cell; None becomes the empty marker."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path, columns, rows):
    """
    Write rows (sequences aligned with ``columns``) to a CSV file.

    Floats are written with 17 significant digits so identical inputs give
    byte-identical files.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    return path


def read_csv(path):
    """Read a CSV written by ``write_csv`` into a list of dicts of strings."""
    with open(path, newline='') as f:
        return list(csv.DictReader(f))
