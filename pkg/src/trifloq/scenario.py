"""Scenario files: schema, validation, deterministic reports, CSV output.

A scenario is a JSON document selecting a system (catalog fixture or
explicit trigonometric-polynomial bands), an analysis, numeric settings
and output paths. Reports are serialized with sorted keys and shortest
round-trip floats, so identical scenario + seed yields byte-identical
JSON; the wall clock lives in a separate run-info sidecar to keep the
main report deterministic. CSV uses RFC-4180 quoting with '.' decimals
and full round-trip precision.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile

import jsonschema
import numpy as np

from .catalog import build_fixture, fixture_ids
from .coeffs import (Modulus, TridiagCoefficients, TrigBand, cooperativize,
                     from_trig_bands, transform_coefficients)
from .errors import ArgumentError

ANALYSES = ("sigma-profile", "periodic-floquet", "bundles", "separation",
            "spectrum", "omega", "hyperbolicity", "cover")

_BAND_SPEC = {
    "type": "object",
    "additionalProperties": False,
    "required": ["const"],
    "properties": {
        "const": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["amps", "harmonics", "kind"],
                "properties": {
                    "amps": {"type": "array", "items": {"type": "number"}},
                    "harmonics": {"type": "array", "items": {"type": "integer"}},
                    "kind": {"enum": ["sin", "cos"]},
                },
            },
        },
    },
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "trifloq scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "analysis"],
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fixture": {"type": "string"},
                "params": {"type": "object"},
                "dimension": {"type": "integer", "minimum": 2},
                "bands": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["diag", "upper", "lower"],
                    "properties": {
                        "diag": _BAND_SPEC,
                        "upper": _BAND_SPEC,
                        "lower": _BAND_SPEC,
                    },
                },
                "deltas": {"type": "array",
                           "items": {"enum": [-1, 1]}},
                "eps0": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "base": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["constant", "periodic", "quasi-periodic"]},
                "period": {"type": "number", "exclusiveMinimum": 0},
                "frequencies": {"type": "array", "items": {"type": "number"},
                                "minItems": 1},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(ANALYSES)},
                "params": {"type": "object"},
            },
        },
        "numeric": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "abs_tol": {"type": "number", "exclusiveMinimum": 0},
                "zero_band": {"type": "number", "exclusiveMinimum": 0},
                "refine_tol": {"type": "number", "exclusiveMinimum": 0},
                "dir_tol": {"type": "number", "exclusiveMinimum": 0},
                "eigen_tol": {"type": "number", "exclusiveMinimum": 0},
                "warmup": {"type": "number", "exclusiveMinimum": 0},
                "qr_interval": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "basename": {"type": "string"},
                "formats": {"type": "array",
                            "items": {"enum": ["json", "csv"]}},
            },
        },
    },
}

DEFAULT_NUMERIC = {
    "rel_tol": 1e-9,
    "abs_tol": 1e-12,
    "zero_band": 1e-9,
    "refine_tol": 1e-8,
    "dir_tol": 1e-8,
    "eigen_tol": 1e-10,
    "qr_interval": 1.0,
    "seed": 0,
}


def load_scenario(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ArgumentError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"scenario {path} is not valid JSON: {exc}") from exc
    validate_scenario(doc)
    return doc


def validate_scenario(doc):
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ArgumentError(f"scenario rejected by schema: {exc.message}") from exc
    system = doc["system"]
    has_fixture = "fixture" in system
    has_bands = "bands" in system
    if has_fixture == has_bands:
        raise ArgumentError(
            "system block must select exactly one of 'fixture' or 'bands'")
    if has_fixture and system["fixture"] not in fixture_ids():
        raise ArgumentError(f"unknown fixture {system['fixture']!r}")
    if has_bands:
        if "dimension" not in system or "eps0" not in system:
            raise ArgumentError("explicit bands need 'dimension' and 'eps0'")
        base = doc.get("base", {"kind": "constant"})
        if base["kind"] == "periodic" and "period" not in base:
            raise ArgumentError("periodic base needs 'period'")
        if base["kind"] == "quasi-periodic" and "frequencies" not in base:
            raise ArgumentError("quasi-periodic base needs 'frequencies'")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def scenario_hash(doc) -> str:
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def _band_from_spec(spec, frequencies):
    terms = [(t["amps"], t["harmonics"], t["kind"]) for t in spec.get("terms", [])]
    return TrigBand(const=spec["const"], terms=terms, frequencies=frequencies)


def build_system(doc):
    """System object plus metadata from a validated scenario.

    Returns (kind, system, info) where info carries the applied sign
    pattern and fixture data for the report.
    """
    system = doc["system"]
    info = {}
    if "fixture" in system:
        built = build_fixture(system["fixture"], system.get("params"))
        info["fixture"] = built.fixture_id
        info["fixture_params"] = {k: _plain(v) for k, v in built.params.items()}
        if built.pattern is not None:
            info["deltas"] = list(built.pattern.deltas)
            info["mus"] = list(built.pattern.mus)
        return built.kind, built, info

    n = system["dimension"]
    base = doc.get("base", {"kind": "constant"})
    if base["kind"] == "constant":
        freqs = ()
        modulus = Modulus.constant()
    elif base["kind"] == "periodic":
        freqs = (1.0 / base["period"],)
        modulus = Modulus.periodic(base["period"])
    else:
        freqs = tuple(base["frequencies"])
        modulus = Modulus.quasi_periodic(freqs)
    bands = system["bands"]
    diag = _band_from_spec(bands["diag"], freqs)
    upper = _band_from_spec(bands["upper"], freqs)
    lower = _band_from_spec(bands["lower"], freqs)
    for name, band, size in (("diag", diag, n), ("upper", upper, n - 1),
                             ("lower", lower, n - 1)):
        if band.const.size != size:
            raise ArgumentError(f"band {name} must have {size} entries")
    deltas = system.get("deltas")
    A = from_trig_bands(n, diag, upper, lower, eps0=system["eps0"],
                        modulus=modulus, deltas=deltas, name="scenario-system",
                        scenario_dict=system)
    if deltas is not None and any(d != 1 for d in deltas):
        pattern = cooperativize(deltas)
        A = transform_coefficients(A, pattern)
        info["deltas"] = list(pattern.deltas)
        info["mus"] = list(pattern.mus)
    from .catalog import BuiltFixture
    built = BuiltFixture("explicit-bands", "linear", A,
                         x0=np.ones(n), params=dict(system))
    return "linear", built, info


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def render_report(doc, results, seed, numeric, version) -> str:
    record = {
        "tool": {"name": "trifloq", "version": version},
        "scenario_hash": scenario_hash(doc),
        "seed": seed,
        "tolerances": {k: numeric[k] for k in sorted(numeric)},
        "analysis": doc["analysis"]["kind"],
        "results": _plain(results),
    }
    return json.dumps(record, sort_keys=True, indent=2) + "\n"


def write_atomic(path, data: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                         else v for v in row])
    return buf.getvalue()
