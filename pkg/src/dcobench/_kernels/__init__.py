"""Engine selection: compiled Cython kernels when available, pure numpy otherwise.

Set DCOBENCH_ENGINE=pure (or =compiled) to override the default choice.
"""

from __future__ import annotations

import os

try:
    from . import _core  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on the build environment
    _core = None
    HAVE_COMPILED = False

from . import pure  # noqa: E402

__all__ = ["HAVE_COMPILED", "resolve_engine", "pure", "_core"]


def resolve_engine(engine: str | None = None) -> str:
    """Map an explicit/environment/default engine request to 'compiled' or 'pure'."""
    if engine is None:
        engine = os.environ.get("DCOBENCH_ENGINE")
    if engine is None:
        return "compiled" if HAVE_COMPILED else "pure"
    engine = engine.lower()
    if engine not in ("compiled", "pure"):
        raise ValueError(f"unknown engine {engine!r}, expected 'compiled' or 'pure'")
    if engine == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled engine requested but the extension is not built")
    return engine
