"""Run reports: a single JSON object per run with fixed keys.

Floats are written with 17 significant digits so values round-trip exactly;
non-finite floats become ``null``.  Key order is fixed by construction.
"""
import json
import math

SCHEMA_VERSION = "1.0"


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return json.dumps(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if hasattr(obj, "item") and not isinstance(obj, (list, tuple, dict)):
        return _encode(obj.item(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(report: dict, indent: int = 2) -> str:
    return _encode(report, indent, 0) + "\n"


def base_report(command: str, seed, version: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": version,
        "command": command,
        "verdict": None,
        "case_label": None,
        "beta": None,
        "witness": None,
        "samples_used": 0,
        "seed": seed,
        "elapsed_ms": None,
    }


def witness_dict(w):
    if w is None:
        return None
    return {"x": [float(v) for v in w.x], "y": [float(v) for v in w.y], "margin": float(w.margin)}
