"""Compile plain-Python scalar helpers with numba while keeping the originals.

The originals stay usable on exact types such as ``fractions.Fraction``.
Each jitted copy resolves calls to its siblings through a private globals
namespace, so nested helpers are compiled too.
"""
from __future__ import annotations

import types

from numba import njit


def jit_family(*funcs):
    """Return jitted copies of ``funcs``; list callees before their callers."""
    ns = dict(funcs[0].__globals__)
    out = []
    for f in funcs:
        clone = types.FunctionType(f.__code__, ns, f.__name__, f.__defaults__, f.__closure__)
        clone.__qualname__ = f.__qualname__
        clone.__module__ = f.__module__
        jf = njit(cache=True)(clone)
        ns[f.__name__] = jf
        out.append(jf)
    return out if len(out) > 1 else out[0]
