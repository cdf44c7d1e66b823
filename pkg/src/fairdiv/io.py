"""JSON instance and allocation files, and report rendering.

Instance file::

    {"schema_version": 1, "agents": 2, "items": 3,
     "valuations": [[3, "1/2", "0.25"], [1, 1, 1]],
     "labels": {"agents": ["ann", "bob"], "items": ["a", "b", "c"]}}

Valuations are integers or strings holding an integer, a decimal or a
fraction; JSON floats are rejected so that nothing is ever rounded.
Allocation files list 0-based item indices per agent. Every exact number in
a report is a string such as ``"303"`` or ``"607/2"``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .core import Allocation, Instance, UsageError, format_value, itemset

__all__ = [
    "SCHEMA_VERSION",
    "ParseError",
    "InstanceFile",
    "parse_instance",
    "load_instance",
    "instance_to_dict",
    "dumps",
    "parse_allocation",
    "load_allocation",
    "allocation_to_dict",
    "parse_value",
    "render_table",
]

SCHEMA_VERSION = 1


class ParseError(UsageError):
    """Malformed instance, allocation or report file."""


@dataclass(frozen=True)
class InstanceFile:
    instance: Instance
    agent_names: tuple[str, ...] | None = None
    item_names: tuple[str, ...] | None = None


def _read_json(path) -> object:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _check_version(doc: dict) -> None:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION}")


def parse_value(x) -> Fraction:
    """Exact value from an int or a string; floats and booleans are refused."""
    if isinstance(x, bool) or isinstance(x, float):
        raise ParseError(f"valuation {x!r} must be an integer or a string such as \"1.25\" or \"7/4\"")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"cannot parse valuation {x!r}") from exc
    raise ParseError(f"valuation {x!r} has unsupported type {type(x).__name__}")


def parse_instance(doc) -> InstanceFile:
    if not isinstance(doc, dict):
        raise ParseError("instance file must hold a JSON object")
    _check_version(doc)
    rows = doc.get("valuations")
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ParseError("valuations must be a list of rows")
    values = [[parse_value(x) for x in r] for r in rows]
    n, m = doc.get("agents"), doc.get("items")
    if n != len(values):
        raise ParseError(f"agents is {n!r} but there are {len(values)} valuation rows")
    if any(len(r) != m for r in values):
        raise ParseError(f"every valuation row must have items={m!r} entries")
    try:
        inst = Instance(values, label=doc.get("label"))
    except UsageError as exc:
        raise ParseError(str(exc)) from exc
    labels = doc.get("labels") or {}
    agents = labels.get("agents")
    items = labels.get("items")
    if agents is not None and len(agents) != n:
        raise ParseError("labels.agents must name every agent")
    if items is not None and len(items) != m:
        raise ParseError("labels.items must name every item")
    return InstanceFile(
        inst,
        tuple(map(str, agents)) if agents is not None else None,
        tuple(map(str, items)) if items is not None else None,
    )


def load_instance(path) -> InstanceFile:
    return parse_instance(_read_json(path))


def _json_value(x: Fraction):
    return x.numerator if x.denominator == 1 else format_value(x)


def instance_to_dict(inst: Instance, agent_names=None, item_names=None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "agents": inst.n,
        "items": inst.m,
        "valuations": [[_json_value(x) for x in r] for r in inst.values],
    }
    if inst.label:
        doc["label"] = inst.label
    if agent_names or item_names:
        doc["labels"] = {}
        if agent_names:
            doc["labels"]["agents"] = list(agent_names)
        if item_names:
            doc["labels"]["items"] = list(item_names)
    return doc


def dumps(doc) -> str:
    """Canonical JSON text: stable key order, two-space indent, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_allocation(doc, inst: Instance) -> Allocation:
    if not isinstance(doc, dict):
        raise ParseError("allocation file must hold a JSON object")
    _check_version(doc)
    bundles = doc.get("bundles")
    if not isinstance(bundles, list) or not all(isinstance(b, list) for b in bundles):
        raise ParseError("bundles must be a list of item-index lists")
    if len(bundles) != inst.n:
        raise ParseError(f"allocation has {len(bundles)} bundles for {inst.n} agents")
    for b in bundles:
        for g in b:
            if isinstance(g, bool) or not isinstance(g, int) or not 0 <= g < inst.m:
                raise ParseError(f"item index {g!r} out of range 0..{inst.m - 1}")
    try:
        return Allocation([itemset(b) for b in bundles], inst.m)
    except UsageError as exc:
        raise ParseError(str(exc)) from exc


def load_allocation(path, inst: Instance) -> Allocation:
    return parse_allocation(_read_json(path), inst)


def allocation_to_dict(alloc: Allocation) -> dict:
    return {"schema_version": SCHEMA_VERSION, "bundles": alloc.as_lists()}


def render_table(header: list[str], rows: list[list[str]]) -> str:
    """Left-aligned plain-text table."""
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *rows]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
