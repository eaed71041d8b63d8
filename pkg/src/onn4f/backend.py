"""Kernel backend selection.

Two interchangeable kernel sets exist: the compiled extension
(``onn4f._core``, Cython) and the pure-numpy fallback
(``onn4f._kernels_py``).  The compiled one is picked at import when it built
successfully; ``ONN4F_BACKEND`` (``auto`` | ``compiled`` | ``python``)
overrides, and :func:`set_backend` / :func:`use` switch at runtime.

Both backends are deterministic in single-threaded use, but they are not
bit-identical to each other; reproducing a run byte-for-byte requires the
same backend.
"""

from __future__ import annotations

import contextlib
import os

from . import _kernels_py

try:
    from . import _core
except ImportError:  # extension not built; numpy fallback only
    _core = None

_BACKENDS = {"python": _kernels_py}
if _core is not None:
    _BACKENDS["compiled"] = _core


def available() -> tuple[str, ...]:
    """Backend names usable in this installation."""
    return tuple(sorted(_BACKENDS))


def resolve(name: str):
    """Map a backend name (or 'auto') to its kernel module."""
    if name == "auto":
        return _BACKENDS.get("compiled", _kernels_py)
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; available: {', '.join(available())} or 'auto'"
        ) from None


def _initial():
    wanted = os.environ.get("ONN4F_BACKEND", "auto")
    try:
        return resolve(wanted)
    except ValueError as exc:
        # a broken env var must not make the package unimportable
        import warnings

        warnings.warn(f"ONN4F_BACKEND ignored: {exc}", RuntimeWarning, stacklevel=2)
        return resolve("auto")


_active = _initial()


def get():
    """The active kernel module."""
    return _active


def name() -> str:
    return _active.NAME


def set_backend(backend: str) -> None:
    global _active
    _active = resolve(backend)


@contextlib.contextmanager
def use(backend: str):
    """Temporarily switch the active backend."""
    global _active
    prev = _active
    _active = resolve(backend)
    try:
        yield _active
    finally:
        _active = prev
