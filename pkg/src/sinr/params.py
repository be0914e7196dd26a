"""Walkers over parameter dataclasses.

Parameter containers are plain dataclasses whose array-valued fields are
numpy arrays (in storage form) or tape tensors (in bound form). The
walkers below flatten them to (name, array) pairs in a fixed order and
rebind them onto a tape; that fixed order is what makes optimizer
updates and checkpoints deterministic.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .autodiff import Tape, Tensor

__all__ = ["named_arrays", "bind", "from_named"]


def named_arrays(obj, prefix: str = "") -> list[tuple[str, np.ndarray]]:
    """Flatten nested parameter dataclasses to ordered (name, array) pairs."""
    out: list[tuple[str, np.ndarray]] = []
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        name = f"{prefix}{f.name}"
        if isinstance(value, (np.ndarray, Tensor)):
            out.append((name, value))
        elif dataclasses.is_dataclass(value):
            out.extend(named_arrays(value, prefix=f"{name}."))
        elif isinstance(value, (tuple, list)):
            for i, item in enumerate(value):
                if dataclasses.is_dataclass(item):
                    out.extend(named_arrays(item, prefix=f"{name}.{i}."))
    return out


def bind(obj, tape: Tape):
    """Clone a parameter container with arrays bound to `tape` as leaves."""

    def rec(value):
        if isinstance(value, np.ndarray):
            return tape.param(value)
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            kwargs = {
                f.name: rec(getattr(value, f.name)) for f in dataclasses.fields(value)
            }
            return type(value)(**kwargs)
        if isinstance(value, tuple):
            return tuple(rec(v) for v in value)
        if isinstance(value, list):
            return [rec(v) for v in value]
        return value

    return rec(obj)


def from_named(template, mapping: dict, prefix: str = ""):
    """Clone `template` replacing each array field by mapping[its name]."""
    kwargs = {}
    for f in dataclasses.fields(template):
        value = getattr(template, f.name)
        name = f"{prefix}{f.name}"
        if isinstance(value, (np.ndarray, Tensor)):
            kwargs[f.name] = mapping[name]
        elif dataclasses.is_dataclass(value):
            kwargs[f.name] = from_named(value, mapping, prefix=f"{name}.")
        elif isinstance(value, tuple) and value and dataclasses.is_dataclass(value[0]):
            kwargs[f.name] = tuple(
                from_named(item, mapping, prefix=f"{name}.{i}.")
                for i, item in enumerate(value)
            )
        else:
            kwargs[f.name] = value
    return type(template)(**kwargs)
