"""Step functions in time, elementary tensors and iterated-integral specs."""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import OrderMismatch


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function on ``[0, T]``.

    ``values[k]`` is taken on ``[breakpoints[k], breakpoints[k + 1])``; the
    last value also holds at ``T``.
    """

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if len(b) != len(v) + 1 or len(v) == 0:
            raise ValueError("need len(breakpoints) == len(values) + 1 >= 2")
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if not np.all(np.isfinite(v)):
            raise ValueError("step values must be finite")
        object.__setattr__(self, "breakpoints", tuple(float(x) for x in b))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @classmethod
    def constant(cls, horizon: float, value: float = 1.0) -> "StepFunction":
        return cls((0.0, float(horizon)), (float(value),))

    @classmethod
    def indicator(cls, a: float, b: float, horizon: float) -> "StepFunction":
        """``1_[a, b)`` on ``[0, horizon]``."""
        pts = sorted({0.0, float(a), float(b), float(horizon)})
        pts = [p for p in pts if 0.0 <= p <= horizon]
        vals = [1.0 if a <= lo < b else 0.0 for lo in pts[:-1]]
        return cls(tuple(pts), tuple(vals))

    @property
    def horizon(self) -> float:
        return self.breakpoints[-1]

    @property
    def interior(self) -> tuple:
        return self.breakpoints[1:-1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.breakpoints), t, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]

    def on(self, knots: np.ndarray) -> np.ndarray:
        """Values on the segments ``[knots[i], knots[i+1])``."""
        return self(np.asarray(knots)[:-1])

    def _merged(self, other):
        if other.horizon != self.horizon:
            raise ValueError("step functions live on different horizons")
        pts = np.union1d(self.breakpoints, other.breakpoints)
        return pts, self.on(pts), other.on(pts)

    def __mul__(self, other):
        if isinstance(other, StepFunction):
            pts, a, b = self._merged(other)
            return StepFunction(tuple(pts), tuple(a * b))
        return StepFunction(self.breakpoints, tuple(float(other) * v for v in self.values))

    __rmul__ = __mul__

    def __add__(self, other):
        pts, a, b = self._merged(other)
        return StepFunction(tuple(pts), tuple(a + b))

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)


@dataclass(frozen=True)
class ElementaryTensor:
    """``F0 (x) F1 (x) ... (x) Fn`` with scalar ``F0`` and step factors."""

    f0: float
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "f0", float(self.f0))
        object.__setattr__(self, "factors", tuple(self.factors))
        hs = {f.horizon for f in self.factors}
        if len(hs) > 1:
            raise ValueError("factors live on different horizons")

    @classmethod
    def flat(cls, n: int, horizon: float, f0: float = 1.0) -> "ElementaryTensor":
        return cls(f0, tuple(StepFunction.constant(horizon) for _ in range(n)))

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def horizon(self):
        return self.factors[0].horizon if self.factors else None

    def knots(self) -> np.ndarray:
        pts = set()
        for f in self.factors:
            pts.update(f.breakpoints)
        return np.array(sorted(pts))

    def times(self, other: "ElementaryTensor") -> "ElementaryTensor":
        """Factorwise product, used for second-moment references."""
        if other.order != self.order:
            raise OrderMismatch("tensors of different order")
        return ElementaryTensor(self.f0 * other.f0,
                                tuple(a * b for a, b in zip(self.factors, other.factors)))

    def reordered(self, perm: Sequence[int]) -> "ElementaryTensor":
        """Tensor whose slot ``k`` holds factor ``perm[k]``."""
        return ElementaryTensor(self.f0, tuple(self.factors[p] for p in perm))


@dataclass(frozen=True)
class IteratedSpec:
    """Index tuple into a martingale family plus a tensor of matching order."""

    indices: tuple
    tensor: ElementaryTensor

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if len(self.indices) != self.tensor.order:
            raise OrderMismatch(
                f"{len(self.indices)} indices but tensor of order {self.tensor.order}")

    @property
    def order(self) -> int:
        return len(self.indices)

    @classmethod
    def flat(cls, indices, horizon, f0=1.0):
        return cls(tuple(indices), ElementaryTensor.flat(len(indices), horizon, f0))


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def load_spec(path) -> IteratedSpec:
    """Read a spec file.

    Format::

        [spec]
        indices = 0 1
        f0 = 1.0
        [factor.1]
        breakpoints = 0 0.5 1
        values = 1 2
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    indices = tuple(int(x) for x in cp["spec"]["indices"].replace(",", " ").split())
    f0 = float(cp["spec"].get("f0", "1.0"))
    factors = []
    for k in range(1, len(indices) + 1):
        sec = cp[f"factor.{k}"]
        factors.append(StepFunction(_floats(sec["breakpoints"]), _floats(sec["values"])))
    return IteratedSpec(indices, ElementaryTensor(f0, tuple(factors)))


def dump_spec(spec: IteratedSpec, path) -> None:
    cp = configparser.ConfigParser()
    cp["spec"] = {"indices": " ".join(map(str, spec.indices)), "f0": repr(spec.tensor.f0)}
    for k, f in enumerate(spec.tensor.factors, start=1):
        cp[f"factor.{k}"] = {"breakpoints": " ".join(map(repr, f.breakpoints)),
                             "values": " ".join(map(repr, f.values))}
    with open(path, "w") as fh:
        cp.write(fh)
