"""JSON documents: theory configs, scenarios, ad-hoc composition inputs.

Matrices are nested lists whose entries are either real numbers or
``[re, im]`` pairs.  Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import qmath
from .bell import PAULI, Party, Scenario, bell_state, observable_pvm, spin_observable
from .states_effects import LqtEffect, LqtState, Povm, embed_effect
from .theory import ElementaryLabel, LatentConfig, SystemString, compose_systems, embed_qt_state, qmap, preset_state
from .transforms import MUTATIONS


class DocumentError(ValueError):
    """Malformed or inconsistent input document."""


def _require_keys(doc: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(doc, dict):
        raise DocumentError(f"{where}: expected an object")
    extra = set(doc) - allowed
    if extra:
        raise DocumentError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = required - set(doc)
    if missing:
        raise DocumentError(f"{where}: missing field(s) {sorted(missing)}")


def matrix_from_json(data) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"bad matrix literal: {exc}") from None
    if arr.ndim == 3 and arr.shape[-1] == 2:
        arr = arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DocumentError(f"matrix literal has shape {arr.shape}; expected a square matrix")
    if not np.all(np.isfinite(arr)):
        raise DocumentError("matrix literal has non-finite entries")
    return arr.astype(complex)


def matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def load_json(path: str | Path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


# --------------------------------------------------------------------------
# theory config


@dataclass
class TheoryDocument:
    cfg: LatentConfig
    mutation: str | None = None
    ancilla_pool: tuple[SystemString, ...] | None = None
    trials: int | None = None


_CONFIG_KEYS = {"labels", "default_latent_dim", "default_latent_state", "pairs", "mutation",
                "ancilla_pool", "trials", "description"}


def _latent_state(spec, dim: int, where: str) -> np.ndarray:
    if isinstance(spec, str):
        try:
            return preset_state(spec, dim)
        except ValueError as exc:
            raise DocumentError(f"{where}: {exc}") from None
    return matrix_from_json(spec)


def parse_config(doc: dict) -> TheoryDocument:
    _require_keys(doc, _CONFIG_KEYS, {"labels"}, "config")
    labels_doc = doc["labels"]
    if not isinstance(labels_doc, dict) or not labels_doc:
        raise DocumentError("config.labels: expected a non-empty object name -> dimension")
    labels = {}
    for name, dim in labels_doc.items():
        if not isinstance(dim, int) or isinstance(dim, bool):
            raise DocumentError(f"config.labels.{name}: dimension must be an integer")
        if not name or "," in name or " " in name:
            raise DocumentError(f"config.labels: bad label name {name!r}")
        try:
            labels[name] = ElementaryLabel(name, dim)
        except ValueError as exc:
            raise DocumentError(f"config.labels.{name}: {exc}") from None
    ddim = doc.get("default_latent_dim", 1)
    if ddim is not None and (not isinstance(ddim, int) or ddim < 1):
        raise DocumentError("config.default_latent_dim must be a positive integer or null")
    dstate = None
    if ddim is not None:
        dstate = _latent_state(doc.get("default_latent_state", "pure_basis0"), ddim, "config.default_latent_state")
    overrides = {}
    for k, entry in enumerate(doc.get("pairs", [])):
        where = f"config.pairs[{k}]"
        _require_keys(entry, {"between", "dim", "state"}, {"between", "dim"}, where)
        between = entry["between"]
        if not (isinstance(between, list) and len(between) == 2):
            raise DocumentError(f"{where}.between must list two label names")
        dim = entry["dim"]
        if not isinstance(dim, int) or dim < 1:
            raise DocumentError(f"{where}.dim must be a positive integer")
        overrides[tuple(between)] = (dim, _latent_state(entry.get("state", "pure_basis0"), dim, where))
    try:
        cfg = LatentConfig(labels, ddim, dstate, overrides)
    except (ValueError, KeyError) as exc:
        raise DocumentError(f"config: {exc}") from None
    mutation = doc.get("mutation")
    if mutation is not None and mutation not in MUTATIONS:
        raise DocumentError(f"config.mutation: unknown mutation {mutation!r}")
    pool = None
    if "ancilla_pool" in doc:
        pool = tuple(parse_system(s, cfg) for s in doc["ancilla_pool"])
    trials = doc.get("trials")
    if trials is not None and (not isinstance(trials, int) or trials < 1):
        raise DocumentError("config.trials must be a positive integer")
    return TheoryDocument(cfg, mutation, pool, trials)


def parse_system(spec: str, cfg: LatentConfig) -> SystemString:
    if not isinstance(spec, str):
        raise DocumentError(f"system spec must be a string, got {spec!r}")
    try:
        return cfg.system(spec)
    except KeyError as exc:
        raise DocumentError(f"system {spec!r}: {exc.args[0]}") from None


# --------------------------------------------------------------------------
# states, effects, settings


def _qt_preset(name: str, dim: int) -> np.ndarray:
    if name in ("phi_plus", "phi_minus", "psi_plus", "psi_minus"):
        if dim != 4:
            raise DocumentError(f"Bell state {name!r} needs operational dimension 4, got {dim}")
        return bell_state(name)
    if name == "maximally_mixed":
        return np.eye(dim, dtype=complex) / dim
    if name == "zero":
        return qmath.projector(qmath.ket(0, dim))
    raise DocumentError(f"unknown state preset {name!r}")


def parse_state(spec, system: SystemString, cfg: LatentConfig) -> LqtState:
    space = qmap(system, cfg)
    if isinstance(spec, str):
        if spec.startswith("embed_qt:"):
            rho = _qt_preset(spec.split(":", 1)[1], space.operational_dim)
            return LqtState(system, embed_qt_state(rho, system, cfg))
        if spec == "maximally_mixed":
            return LqtState(system, np.eye(space.total_dim) / space.total_dim)
        raise DocumentError(f"unknown state literal {spec!r}")
    st = LqtState(system, matrix_from_json(spec))
    try:
        return st.validate(cfg)
    except ValueError as exc:
        raise DocumentError(f"state on {system!r}: {exc}") from None


def parse_setting(spec, system: SystemString, cfg: LatentConfig) -> Povm:
    try:
        if isinstance(spec, str):
            if spec in ("X", "Y", "Z"):
                return observable_pvm(PAULI[spec], system, cfg)
            if spec.startswith("angle:"):
                return observable_pvm(spin_observable(float(spec.split(":", 1)[1])), system, cfg)
            raise DocumentError(f"unknown setting preset {spec!r}")
        if isinstance(spec, dict):
            if set(spec) == {"operational_effects"}:
                # act on the operational factors only, trivially on the party's own latent factors
                effects = [embed_effect(matrix_from_json(m), system, cfg).op for m in spec["operational_effects"]]
                return Povm.from_ops(system, effects).validate(cfg)
            _require_keys(spec, {"effects"}, {"effects"}, "setting")
            return Povm.from_ops(system, [matrix_from_json(m) for m in spec["effects"]]).validate(cfg)
        return Povm.from_ops(system, [matrix_from_json(m) for m in spec]).validate(cfg)
    except DocumentError:
        raise
    except ValueError as exc:
        raise DocumentError(f"setting on {system!r}: {exc}") from None


def _parse_product(items, cfg: LatentConfig, where: str) -> tuple[LqtState, ...]:
    if not isinstance(items, list) or not items:
        raise DocumentError(f"{where}: expected a non-empty list of components")
    out = []
    for k, item in enumerate(items):
        _require_keys(item, {"system", "state"}, {"system", "state"}, f"{where}[{k}]")
        out.append(parse_state(item["state"], parse_system(item["system"], cfg), cfg))
    return tuple(out)


def parse_scenario(doc: dict, cfg: LatentConfig) -> Scenario:
    _require_keys(doc, {"parties", "shared_state", "description"}, {"parties", "shared_state"}, "scenario")
    parties = []
    if not isinstance(doc["parties"], list) or not doc["parties"]:
        raise DocumentError("scenario.parties: expected a non-empty list")
    for k, p in enumerate(doc["parties"]):
        _require_keys(p, {"system", "settings"}, {"system", "settings"}, f"scenario.parties[{k}]")
        system = parse_system(p["system"], cfg)
        settings = tuple(parse_setting(s, system, cfg) for s in p["settings"])
        if not settings:
            raise DocumentError(f"scenario.parties[{k}]: no settings")
        parties.append(Party(system, settings))
    whole = compose_systems(*(p.system for p in parties))
    shared = doc["shared_state"]
    try:
        if isinstance(shared, dict):
            if set(shared) == {"product"}:
                return Scenario(tuple(parties), preparations=((1.0, _parse_product(shared["product"], cfg, "product")),))
            if set(shared) == {"mixture"}:
                mix = []
                for k, item in enumerate(shared["mixture"]):
                    _require_keys(item, {"weight", "product"}, {"weight", "product"}, f"mixture[{k}]")
                    mix.append((float(item["weight"]), _parse_product(item["product"], cfg, f"mixture[{k}]")))
                return Scenario(tuple(parties), preparations=tuple(mix))
            raise DocumentError("scenario.shared_state: object must have exactly 'product' or 'mixture'")
        return Scenario(tuple(parties), parse_state(shared, whole, cfg))
    except DocumentError:
        raise
    except ValueError as exc:
        raise DocumentError(f"scenario: {exc}") from None


def parse_compose(doc: dict, cfg: LatentConfig) -> tuple[str, list]:
    """``{"kind": "state"|"effect", "parts": [{"system": ..., "op": ...}]}``."""
    _require_keys(doc, {"kind", "parts"}, {"kind", "parts"}, "compose")
    kind = doc["kind"]
    if kind not in ("state", "effect"):
        raise DocumentError("compose.kind must be 'state' or 'effect'")
    parts = []
    for k, item in enumerate(doc["parts"]):
        _require_keys(item, {"system", "op"}, {"system", "op"}, f"compose.parts[{k}]")
        system = parse_system(item["system"], cfg)
        if kind == "state":
            parts.append(parse_state(item["op"], system, cfg))
        else:
            e = LqtEffect(system, matrix_from_json(item["op"]))
            try:
                parts.append(e.validate(cfg))
            except ValueError as exc:
                raise DocumentError(f"compose.parts[{k}]: {exc}") from None
    if not parts:
        raise DocumentError("compose.parts is empty")
    return kind, parts
