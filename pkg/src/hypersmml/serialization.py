"""JSON persistence for SMML codes and sufficient statistics.

Floats are written with 17 significant digits so every value round-trips
exactly, and keys keep insertion order, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import DomainError
from .prior_marginal import TruncatedDomain
from .smml_estimator import SmmlCode, facet_functional, message_length_I1, tessellation_hyperbolic

LOG2 = math.log(2.0)


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite number {x!r}")
    text = format(x, ".17g")
    if all(ch not in text for ch in ".eE"):
        text += ".0"
    return text


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj.tolist() if isinstance(obj, np.ndarray) else obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(obj)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def code_to_dict(code: SmmlCode, n: int, seed: int | None = None) -> dict:
    I1 = message_length_I1(code, n)
    facets = []
    tess = tessellation_hyperbolic(code, n)
    planes = {(i, j): plane for i, cell in tess for j, plane in cell}
    for i in range(code.m):
        for j in range(i + 1, code.m):
            a, b = facet_functional(code, i, j, n)
            plane = planes.get((i, j))
            facets.append(
                {
                    "cells": [i, j],
                    "a": a.tolist(),
                    "b": float(b),
                    "hyperbolic": None if plane is None else plane.to_dict(),
                }
            )
    d = code.domain
    return {
        "m": code.m,
        "n": n,
        "p": code.p,
        "domain": {"lower": list(d.lower), "upper": list(d.upper), "resolution": d.resolution},
        "assertions": code.assertions.tolist(),
        "coding_probs": code.coding_probs.tolist(),
        "I1_nats": I1,
        "I1_bits": I1 / LOG2,
        "iterations": int(code.iterations),
        "seed": seed,
        "facets": facets,
    }


def code_from_dict(doc: dict) -> tuple[SmmlCode, int]:
    """Rebuild a code from its JSON document; returns ``(code, n)``."""
    try:
        dom = doc["domain"]
        domain = TruncatedDomain(tuple(dom["lower"]), tuple(dom["upper"]), int(dom["resolution"]))
        code = SmmlCode(
            np.array(doc["assertions"], dtype=float),
            np.array(doc["coding_probs"], dtype=float),
            domain,
            float(doc["I1_nats"]),
            int(doc.get("iterations", 0)),
        )
        n = int(doc["n"])
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed SMML code document: {exc}") from exc
    if code.m != int(doc["m"]) or code.p != int(doc["p"]):
        raise DomainError("SMML code document has inconsistent m or p")
    return code, n


def read_code(path) -> tuple[SmmlCode, int, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    code, n = code_from_dict(doc)
    return code, n, doc
