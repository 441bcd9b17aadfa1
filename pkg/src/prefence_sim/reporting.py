"""Byte-stable JSON and CSV emitters.

JSON objects are written with sorted keys and every float rendered with six
decimal places, so identical runs produce identical files.
"""
import csv
import io
import json
import math
import numbers
import os

OUTPUT_DIR_ENV = "PREFENCE_SIM_OUTPUT_DIR"

PROBE_COLUMNS = ("trial", "line_index", "latency", "state")
EVENT_COLUMNS = ("tick", "core", "event", "tid", "domain", "prefetcher_enabled")
REQUEST_COLUMNS = ("tick", "core", "task", "pc", "vaddr", "requests_emitted")
HISTOGRAM_COLUMNS = ("class", "latency")


def _encode(obj, level):
    pad = "  " * (level + 1)
    end = "  " * level
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, numbers.Integral):
        return str(int(obj))
    if isinstance(obj, numbers.Real):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"non-finite float {x} cannot be written")
        return f"{x:.6f}"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted((str(k), v) for k, v in obj.items())
        body = ",\n".join(f"{pad}{json.dumps(k)}: {_encode(v, level + 1)}" for k, v in items)
        return "{\n" + body + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        body = ",\n".join(pad + _encode(v, level + 1) for v in obj)
        return "[\n" + body + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj):
    return _encode(obj, 0) + "\n"


def resolve_output(path):
    """Place relative output paths under $PREFENCE_SIM_OUTPUT_DIR when set."""
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _write_text(path, text):
    path = resolve_output(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def write_json(path, obj):
    return _write_text(path, dumps(obj))


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["true" if v is True else "false" if v is False else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    return _write_text(path, csv_text(header, rows))


def histogram_rows(report):
    rows = []
    for cls in sorted(report.latency_samples):
        rows.extend((cls, lat) for lat in report.latency_samples[cls])
    return rows


def emit_histogram_data(report, path):
    if report.trials <= 0 or not any(report.latency_samples.values()):
        raise ValueError("histogram needs a report with latency samples")
    return write_csv(path, HISTOGRAM_COLUMNS, histogram_rows(report))


def write_probes(report, path):
    return write_csv(path, PROBE_COLUMNS, report.probe_rows)


def write_events(events, path):
    return write_csv(path, EVENT_COLUMNS, events)


def write_requests(access_log, path):
    return write_csv(path, REQUEST_COLUMNS, access_log)
