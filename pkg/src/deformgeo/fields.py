"""Chart points, tagged tensors, coefficient fields and x-differentiation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import taylor as tj
from .errors import DifferentiationError, IndexDisciplineError
from .taylor import TaylorArray

#: relative FD steps: cube and fourth root of double-precision epsilon
FD_STEP1 = 6e-6
FD_STEP2 = 1.2e-4
#: memoized jets per field; fields are pure functions of the point
CACHE_SIZE = 20000

COORD = "coordinate"
FRAME = "vielbein"
UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class ChartPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size < 1:
            raise ValueError("chart point needs at least one coordinate")
        if not np.all(np.isfinite(c)):
            raise ValueError(f"non-finite chart coordinates: {c}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return self.coords.size

    def __iter__(self):
        return iter(self.coords)


def as_coords(point) -> np.ndarray:
    if isinstance(point, ChartPoint):
        return point.coords
    return ChartPoint(point).coords


class Slot(NamedTuple):
    frame: str
    variance: str


def slots(spec: str) -> tuple[Slot, ...]:
    """Shorthand: ``"Fu Cd Cd"`` -> vielbein-up, coordinate-down, coordinate-down."""
    out = []
    for tok in spec.split():
        frame = {"C": COORD, "F": FRAME}[tok[0]]
        var = {"u": UP, "d": DOWN}[tok[1]]
        out.append(Slot(frame, var))
    return tuple(out)


@dataclass(frozen=True)
class IndexedTensor:
    data: np.ndarray
    slots: tuple[Slot, ...]

    def __post_init__(self):
        d = np.array(self.data, dtype=float)
        s = tuple(Slot(*x) for x in self.slots)
        if d.ndim != len(s):
            raise ValueError(f"rank {d.ndim} data with {len(s)} slot tags")
        if d.ndim and len(set(d.shape)) != 1:
            raise ValueError(f"all slots must share one dimension, got {d.shape}")
        for slot in s:
            if slot.frame not in (COORD, FRAME) or slot.variance not in (UP, DOWN):
                raise ValueError(f"bad slot tag {slot}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "slots", s)

    @property
    def rank(self) -> int:
        return len(self.slots)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)


def contract(a: IndexedTensor, slot_a: int, b: IndexedTensor, slot_b: int) -> IndexedTensor:
    """Sum over one slot of ``a`` and one of ``b``; remaining slots are a's then b's."""
    sa, sb = a.slots[slot_a], b.slots[slot_b]
    if sa.frame != sb.frame:
        raise IndexDisciplineError(f"cannot contract {sa.frame} slot with {sb.frame} slot")
    if sa.variance == sb.variance:
        raise IndexDisciplineError(f"cannot contract two '{sa.variance}' slots")
    data = np.tensordot(a.data, b.data, axes=([slot_a], [slot_b]))
    rest = a.slots[:slot_a] + a.slots[slot_a + 1:] + b.slots[:slot_b] + b.slots[slot_b + 1:]
    return IndexedTensor(data, rest)


# --------------------------------------------------------------- fields

Evaluator = Callable[[np.ndarray, int], "TaylorArray | np.ndarray"]


class CoefficientField:
    """A smooth map chart point -> array with access to x-derivatives.

    ``evaluator(x, order)`` must return a TaylorArray in the n chart variables
    carrying derivatives up to ``order`` (a bare ndarray is accepted for
    order 0).  It is trusted up to ``analytic_order``; beyond that, or when
    ``mode == "fd"``, missing derivatives come from central differences.
    """

    def __init__(
        self,
        evaluator: Evaluator,
        dim: int,
        slots: Sequence[Slot] | None = None,
        analytic_order: int = 2,
        mode: str = "analytic",
        name: str = "",
    ):
        if mode not in ("analytic", "fd"):
            raise ValueError(f"unknown derivative mode {mode!r}")
        self.evaluator = evaluator
        self.dim = int(dim)
        self.slots = None if slots is None else tuple(Slot(*s) for s in slots)
        self.analytic_order = int(analytic_order)
        self.mode = mode
        self.name = name
        self._cache: dict = {}

    @classmethod
    def from_function(cls, fn, dim, slots=None, mode="analytic", name=""):
        """Wrap ``fn(x)`` written with numpy ufuncs; x arrives as a seeded TaylorArray."""

        def evaluator(x, order):
            if order == 0:
                return np.array(tj.value(tj.stack(fn(np.array(x, float)))), dtype=float)
            out = fn(tj.seed(x, order))
            return tj.as_taylor(tj.stack(out), len(x), order)

        return cls(evaluator, dim, slots, analytic_order=2, mode=mode, name=name)

    @classmethod
    def constant(cls, array, dim, slots=None, name=""):
        array = np.array(array, dtype=float)

        def evaluator(x, order):
            return tj.constant(array, len(x), order)

        return cls(evaluator, dim, slots, analytic_order=10, name=name)

    def with_mode(self, mode: str) -> "CoefficientField":
        return CoefficientField(self.evaluator, self.dim, self.slots, self.analytic_order, mode, self.name)

    def value(self, x) -> np.ndarray:
        return tj.value(self.jet(x, 0))

    def __call__(self, x) -> np.ndarray:
        return self.value(x)

    def jet(self, x, order: int = 2) -> TaylorArray:
        x = as_coords(x)
        key = (x.tobytes(), order)
        hit = self._cache.get(key)
        if hit is None:
            hit = _freeze(self._jet(x, order))
            if len(self._cache) >= CACHE_SIZE:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def _jet(self, x, order):
        n = x.size
        base = 0 if self.mode == "fd" else min(order, self.analytic_order)
        j = tj.as_taylor(self.evaluator(x, base), n, base).truncate(base)
        _check_finite(j.val, self.name, x)
        missing = order - base
        if order > 2:
            raise DifferentiationError("derivatives above second order are not supported")
        if missing <= 0:
            return j.truncate(order)
        if missing == 1:
            # differentiate the highest trusted derivative once more
            def top(y):
                jj = tj.as_taylor(self.evaluator(y, base), n, base)
                return [jj.val, jj.d1, jj.d2][base]

            extra = central_diff(top, x)
            parts = [j.val, j.d1, j.d2][: base + 1] + [extra, None]
            return TaylorArray(parts[0], parts[1], parts[2], nvars=n)
        if missing == 2 and base == 0:
            def f(y):
                return tj.value(self.evaluator(y, 0))

            return TaylorArray(j.val, central_diff(f, x), second_diff(f, x), nvars=n)
        raise DifferentiationError(
            f"field {self.name!r}: cannot supply order {order} from analytic order {base}"
        )


def _freeze(j: TaylorArray) -> TaylorArray:
    for a in (j.val, j.d1, j.d2):
        if isinstance(a, np.ndarray):
            a.setflags(write=False)
    return j


def _check_finite(arr, name, x):
    if not np.all(np.isfinite(arr)):
        raise DifferentiationError(f"field {name!r} is not finite near {x}")


def _steps(x, rel):
    return rel * np.maximum(1.0, np.abs(x))


def central_diff(f, x) -> np.ndarray:
    """Second-order central first derivative; derivative axis appended last."""
    x = np.asarray(x, float)
    hs = _steps(x, FD_STEP1)
    cols = []
    for a, h in enumerate(hs):
        e = np.zeros_like(x)
        e[a] = h
        fp, fm = np.asarray(f(x + e)), np.asarray(f(x - e))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise DifferentiationError(f"non-finite evaluation near {x}")
        cols.append((fp - fm) / (2 * h))
    return np.stack(cols, axis=-1)


def second_diff(f, x) -> np.ndarray:
    """Second-order central Hessian; two derivative axes appended last."""
    x = np.asarray(x, float)
    n = x.size
    hs = _steps(x, FD_STEP2)
    f0 = np.asarray(f(x))
    out = np.zeros(f0.shape + (n, n))
    for a in range(n):
        ea = np.zeros(n)
        ea[a] = hs[a]
        out[..., a, a] = (np.asarray(f(x + ea)) - 2 * f0 + np.asarray(f(x - ea))) / hs[a] ** 2
        for b in range(a + 1, n):
            eb = np.zeros(n)
            eb[b] = hs[b]
            v = (
                np.asarray(f(x + ea + eb))
                - np.asarray(f(x + ea - eb))
                - np.asarray(f(x - ea + eb))
                + np.asarray(f(x - ea - eb))
            ) / (4 * hs[a] * hs[b])
            out[..., a, b] = v
            out[..., b, a] = v
    if not np.all(np.isfinite(out)):
        raise DifferentiationError(f"non-finite evaluation near {x}")
    return out


def _tags(field: CoefficientField, rank: int) -> tuple[Slot, ...]:
    if field.slots is not None:
        return field.slots
    return tuple(Slot(COORD, DOWN) for _ in range(rank))


def partial_x(field: CoefficientField, point, direction: int) -> IndexedTensor:
    x = as_coords(point)
    j = field.jet(x, 1)
    data = j.d1[..., direction]
    return IndexedTensor(data, _tags(field, data.ndim))


def second_partial_x(field: CoefficientField, point, dir1: int, dir2: int) -> IndexedTensor:
    x = as_coords(point)
    j = field.jet(x, 2)
    data = j.d2[..., dir1, dir2]
    return IndexedTensor(data, _tags(field, data.ndim))


@dataclass(frozen=True)
class FlatMetric:
    """eta_{mn} = diag(+1 x m, -1 x (n - m))."""

    signature: tuple[int, int]

    def __post_init__(self):
        m, k = (int(s) for s in self.signature)
        if m < 0 or k < 0 or m + k < 1:
            raise ValueError(f"bad signature {self.signature}")
        object.__setattr__(self, "signature", (m, k))

    @property
    def dim(self) -> int:
        return sum(self.signature)

    @property
    def diagonal(self) -> np.ndarray:
        m, k = self.signature
        return np.concatenate([np.ones(m), -np.ones(k)])

    @property
    def eta(self) -> np.ndarray:
        return np.diag(self.diagonal)

    def tensor(self, variance: str = DOWN) -> IndexedTensor:
        return IndexedTensor(self.eta, (Slot(FRAME, variance), Slot(FRAME, variance)))
