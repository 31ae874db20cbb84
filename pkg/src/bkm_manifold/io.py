"""File formats: operator specs, chain files, matrix lists, and the
deterministic JSON writer used for every report."""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .atlas import ManifoldPoint, build_chain
from .operators import KIND_ALIASES, HermitianOperator, ModelHamiltonian, build_model


def matrix_to_json(op) -> list:
    a = np.asarray(op.entries if isinstance(op, HermitianOperator) else op, dtype=complex)
    return [[{"re": float(v.real), "im": float(v.imag)} for v in row] for row in a]


def _entry(v) -> complex:
    if isinstance(v, dict):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


def matrix_from_json(obj) -> HermitianOperator:
    """Accepts ``[[{"re":..,"im":..}, ...], ...]``, plain real rows, or ``{"entries": ...}``."""
    if isinstance(obj, dict):
        obj = obj["entries"]
    rows = [[_entry(v) for v in row] for row in obj]
    return HermitianOperator(np.array(rows, dtype=complex))


def model_to_spec(model: ModelHamiltonian) -> dict:
    return {
        "dim": model.dim,
        "kind": model.kind,
        "beta0": float(model.beta0),
        "entries": matrix_to_json(model.h0),
    }


def model_from_spec(spec: dict) -> ModelHamiltonian:
    try:
        dim = int(spec["dim"])
        kind = str(spec.get("kind", "custom"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed operator spec: {exc}") from exc
    beta0 = float(spec.get("beta0", 0.0))
    if spec.get("entries") is not None:
        h0 = matrix_from_json(spec["entries"])
        if h0.dim != dim:
            raise ValueError(f"spec dim {dim} does not match entries dim {h0.dim}")
        model = build_model("custom", dim, beta0, matrix=h0, auto_shift=bool(spec.get("auto_shift", False)))
        return dataclasses.replace(model, kind=KIND_ALIASES.get(kind, kind))
    if kind == "custom":
        raise ValueError("custom operator spec needs entries")
    return build_model(kind, dim, beta0)


def load_json(path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_model(path) -> ModelHamiltonian:
    return model_from_spec(load_json(path))


def save_model(model: ModelHamiltonian, path) -> None:
    Path(path).write_text(dumps(model_to_spec(model)) + "\n", encoding="utf-8")


def load_basis(path) -> list[HermitianOperator]:
    obj = load_json(path)
    if isinstance(obj, dict):
        obj = obj.get("basis", obj.get("matrices", []))
    return [matrix_from_json(m) for m in obj]


def chain_to_json(p: ManifoldPoint) -> dict:
    return {"base": model_to_spec(p.base), "steps": [matrix_to_json(y) for y in p.steps]}


def chain_from_json(obj: dict) -> ManifoldPoint:
    base = model_from_spec(obj["base"])
    return build_chain(base, [matrix_from_json(y) for y in obj.get("steps", [])])


# -- deterministic JSON ------------------------------------------------------


def _float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits and insertion-ordered keys."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
