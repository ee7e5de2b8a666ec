"""JSON wire format for state sets.

``{"dims": [2, 2], "label": "...", "states": [{"amps": [[re, im], ...]}, ...]}``
with amplitudes in flat-index order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tensor_core import DEFAULT_ORTH_TOL, ShapeError, StateSet, SystemShape

__all__ = ["InputError", "state_set_to_json", "state_set_from_json", "load_state_set", "dump_json"]


class InputError(ValueError):
    """Malformed or inconsistent input file."""


def _num(z: complex) -> list[float]:
    # Keep integers as ints so exact constructions stay readable.
    re, im = float(z.real), float(z.imag)
    return [int(re) if re.is_integer() else re, int(im) if im.is_integer() else im]


def state_set_to_json(S: StateSet) -> dict:
    return {
        "dims": list(S.shape.dims),
        "label": S.label,
        "states": [{"amps": [_num(z) for z in s.amplitudes]} for s in S.states],
    }


def state_set_from_json(data: dict, orth_tol: float = DEFAULT_ORTH_TOL) -> StateSet:
    try:
        shape = SystemShape(data["dims"])
        states = []
        for entry in data["states"]:
            amps = np.asarray(entry["amps"], dtype=float)
            if amps.ndim != 2 or amps.shape[1] != 2:
                raise InputError("amplitudes must be [re, im] pairs")
            states.append(amps[:, 0] + 1j * amps[:, 1])
        return StateSet(shape, states, label=str(data.get("label", "")), orth_tol=orth_tol)
    except InputError:
        raise
    except (KeyError, TypeError, ValueError, ShapeError) as exc:
        raise InputError(f"invalid state set: {exc}") from exc


def load_state_set(path: str | Path, orth_tol: float = DEFAULT_ORTH_TOL) -> StateSet:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("top-level JSON value must be an object")
    return state_set_from_json(data, orth_tol)


def dump_json(obj, path: str | Path | None = None) -> str:
    text = json.dumps(obj, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
