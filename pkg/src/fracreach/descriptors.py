"""Named closed-form descriptors used in scenario files.

A descriptor is a string ``"name"`` or ``"name:p1,p2,..."``; no code is ever
embedded in configuration. Three registries exist:

* delays      t -> d(t)          identity, sin, zero, scaled:c, poly:c0,c1,...
* kernels     (t, s) -> b(t, s)  zero, const:c, expkernel:c,r   (c exp(-r (t-s)))
* x-functions (x, tau) -> value  zero, const:c, sinx:c (c sin(x) tau), x:c, mode:k,c,
                                 poly:c0,c1,...  (tau is ignored unless stated)
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DomainError


def parse(desc: str) -> tuple[str, list[float]]:
    if not isinstance(desc, str) or not desc:
        raise DomainError(f"descriptor must be a non-empty string, got {desc!r}")
    name, _, rest = desc.partition(":")
    try:
        params = [float(p) for p in rest.split(",")] if rest else []
    except ValueError:
        raise DomainError(f"bad parameters in descriptor {desc!r}") from None
    return name.strip(), params


def _arity(desc: str, params: list[float], n: int | tuple[int, ...]) -> None:
    ok = params.__len__() in (n if isinstance(n, tuple) else (n,))
    if not ok:
        raise DomainError(f"descriptor {desc!r} has the wrong number of parameters")


def delay(desc: str) -> Callable[[np.ndarray], np.ndarray]:
    name, p = parse(desc)
    if name == "identity":
        _arity(desc, p, 0)
        return lambda t: np.asarray(t, dtype=float)
    if name == "sin":
        _arity(desc, p, 0)
        return lambda t: np.sin(t)
    if name == "zero":
        _arity(desc, p, 0)
        return lambda t: np.zeros_like(np.asarray(t, dtype=float))
    if name == "scaled":
        _arity(desc, p, 1)
        return lambda t: p[0] * np.asarray(t, dtype=float)
    if name == "poly":
        if not p:
            raise DomainError("poly needs at least one coefficient")
        return lambda t: np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), p)
    raise DomainError(f"unknown delay descriptor {desc!r}")


def kernel(desc: str) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    name, p = parse(desc)
    if name == "zero":
        _arity(desc, p, 0)
        return lambda t, s: np.zeros(np.broadcast(t, s).shape)
    if name == "const":
        _arity(desc, p, 1)
        return lambda t, s: np.full(np.broadcast(t, s).shape, p[0])
    if name == "expkernel":
        _arity(desc, p, 2)
        return lambda t, s: p[0] * np.exp(-p[1] * (np.asarray(t) - np.asarray(s)))
    raise DomainError(f"unknown kernel descriptor {desc!r}")


def x_function(desc: str) -> Callable[[np.ndarray, float], np.ndarray]:
    name, p = parse(desc)
    if name == "zero":
        _arity(desc, p, 0)
        return lambda x, tau=0.0: np.zeros_like(np.asarray(x, dtype=float))
    if name == "const":
        _arity(desc, p, 1)
        return lambda x, tau=0.0: np.full_like(np.asarray(x, dtype=float), p[0])
    if name == "sinx":
        _arity(desc, p, 1)
        return lambda x, tau=1.0: p[0] * np.sin(x) * tau
    if name == "x":
        _arity(desc, p, (0, 1))
        c = p[0] if p else 1.0
        return lambda x, tau=0.0: c * np.asarray(x, dtype=float)
    if name == "mode":
        _arity(desc, p, (1, 2))
        k, c = int(p[0]), (p[1] if len(p) > 1 else 1.0)
        if k < 1:
            raise DomainError("mode index starts at 1")
        return lambda x, tau=0.0: c * np.sqrt(2.0 / np.pi) * np.sin(k * np.asarray(x, dtype=float))
    if name == "poly":
        if not p:
            raise DomainError("poly needs at least one coefficient")
        return lambda x, tau=0.0: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), p)
    raise DomainError(f"unknown x-function descriptor {desc!r}")
