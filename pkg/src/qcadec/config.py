"""Numerical settings shared by every module.

A single relative tolerance drives all rank and zero decisions. The value can
be overridden with the ``QCD_TOL`` environment variable or temporarily with
:func:`override`.
"""

from __future__ import annotations

import contextlib
import os
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Settings:
    tol: float = 1e-9
    cluster_gap: float = 1e-6
    seed: int = 20240611
    retries: int = 3
    max_dim: int = 256


def _initial() -> Settings:
    settings = Settings()
    raw = os.environ.get("QCD_TOL")
    if raw:
        settings = replace(settings, tol=float(raw))
    return settings


_current = _initial()


def get_settings() -> Settings:
    return _current


def set_settings(**changes) -> Settings:
    global _current
    _current = replace(_current, **changes)
    return _current


@contextlib.contextmanager
def override(**changes):
    """Temporarily replace some settings inside a ``with`` block."""
    global _current
    saved = _current
    _current = replace(_current, **changes)
    try:
        yield _current
    finally:
        _current = saved
