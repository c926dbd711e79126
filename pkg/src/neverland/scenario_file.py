"""JSON scenario documents: schema, ``@file`` segment references and loading."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .harness import Scenario, ScenarioInvalid

_EXPR = {"type": ["string", "integer"]}
_HEX = {"type": "string"}
_STEP = {"type": "integer", "minimum": 0}


def _obj(required: list[str], **props) -> dict:
    return {"type": "object", "required": required, "properties": props, "additionalProperties": False}


def _tagged(tag: str, name: str, required: list[str], **props) -> dict:
    return _obj([tag, *required], **{tag: {"const": name}}, **props)


_STEPS = [
    _tagged("op", "ArbitraryPhysWrite", ["paddr"], paddr=_EXPR, bytes=_HEX, u64=_EXPR),
    _tagged(
        "op", "PteCorrupt", [],
        vaddr=_EXPR, vpn=_EXPR, paddr=_EXPR, pfn=_EXPR,
        r={"type": "boolean"}, w={"type": "boolean"}, x={"type": "boolean"}, u={"type": "boolean"},
    ),
    _tagged("op", "CsrWriteAsSupervisor", ["csr", "value"], csr=_EXPR, value=_EXPR),
    _tagged("op", "MmioWrite", ["offset", "value"], offset=_EXPR, value=_EXPR),
    _tagged("op", "JumpSupervisor", ["vaddr"], vaddr=_EXPR, max_steps={"type": "integer", "minimum": 1}),
    _tagged("op", "RunUser", [], max_steps={"type": "integer", "minimum": 1}),
]

_EXPECTS = [
    _tagged("kind", "TrapIs", ["cause"], cause={"type": "string"}, step=_STEP),
    _tagged("kind", "VerdictIs", ["verdict"], verdict={"type": "string"}, step=_STEP),
    _tagged("kind", "CsrEquals", ["csr", "value"], csr=_EXPR, value=_EXPR),
    _tagged("kind", "MemEquals", ["paddr"], paddr=_EXPR, bytes=_HEX, u64=_EXPR),
    _tagged("kind", "TableUnchanged", []),
    _tagged("kind", "RunsToHalt", [], step=_STEP),
]

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    **_obj(
        ["name", "expect"],
        name={"type": "string", "minLength": 1},
        description={"type": "string"},
        boot=_obj(
            [],
            preset={"enum": ["standard", "custom"]},
            table_size={"type": "integer", "minimum": 1},
            pool_size={"type": "integer", "minimum": 0},
            jit_size={"type": ["integer", "null"], "minimum": 0},
            defrag={"type": "boolean"},
            heap_size={"type": "integer", "minimum": 0},
            flush_tlb={"type": "boolean"},
            arm_enforce={"type": "boolean"},
            lock_stvec={"type": "boolean"},
            seal_spare={"type": "boolean"},
        ),
        kernel=_obj(
            [],
            asm={"type": "string"},
            syscalls={"type": "array", "items": {"type": "string"}},
            rodata=_HEX,
            config_flags=_HEX,
            data=_HEX,
            data_words={"type": "array", "items": _EXPR},
        ),
        modules={
            "type": "array",
            "items": _obj(
                ["name"],
                name={"type": "string"},
                text=_HEX,
                asm={"type": "string"},
                data=_HEX,
                load_frames={"type": "array", "items": {"type": "integer", "minimum": 0}},
            ),
        },
        programs=_obj([], user={"type": "string"}, kernel={"type": "string"}),
        exploit_steps={"type": "array", "items": {"oneOf": _STEPS}},
        expect={"type": "array", "minItems": 1, "items": {"oneOf": _EXPECTS}},
    ),
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    **_obj(
        ["scenario", "expectations", "counters", "pass"],
        scenario={"type": "string"},
        expectations={
            "type": "array",
            "items": _obj(
                ["kind", "expected", "observed", "pass"],
                kind={"type": "string"},
                expected={"type": "string"},
                observed={"type": "string"},
                **{"pass": {"type": "boolean"}},
            ),
        },
        counters={"type": "object", "additionalProperties": {"type": "integer"}},
        **{"pass": {"type": "boolean"}},
    ),
}

_BINARY_FIELDS = ("text", "data", "rodata", "config_flags", "bytes")
_TEXT_FIELDS = ("asm", "user", "kernel")


def _resolve_refs(node, base: Path, key: str | None = None):
    """Replace ``@path`` strings: binary segments become hex, assembly becomes text."""
    if isinstance(node, dict):
        return {k: _resolve_refs(v, base, k) for k, v in node.items()}
    if isinstance(node, list):
        return [_resolve_refs(v, base, key) for v in node]
    if isinstance(node, str) and node.startswith("@") and key in _BINARY_FIELDS + _TEXT_FIELDS:
        path = base / node[1:]
        try:
            return path.read_text() if key in _TEXT_FIELDS else path.read_bytes().hex()
        except OSError as exc:
            raise ScenarioInvalid(f"cannot read {path}: {exc.strerror}") from None
    return node


def validate_document(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioInvalid(f"schema error at {where}: {exc.message}") from None


def scenario_from_document(doc: dict, base: Path | str = ".") -> Scenario:
    validate_document(doc)
    return Scenario.from_dict(_resolve_refs(doc, Path(base)))


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioInvalid(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"{path}: invalid JSON: {exc}") from None
    return scenario_from_document(doc, path.parent)


def dump_scenario(s: Scenario) -> str:
    return json.dumps(s.to_dict(), indent=2) + "\n"
