"""Bound-optimizer contract and the iteration driver.

Every algorithm in the package is wrapped as an :class:`IterationMap` that
acts on a flat parameter vector.  Objectives are always *maximized*; maps
for minimization problems (NMF, CCCP) expose the negated objective and
set ``minimize = True`` so reports can flip the sign back for display.
"""
import csv
import io
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    BoundViolationError,
    DimensionError,
    NumericError,
    UnsupportedCapabilityError,
)

CONSTRAINTS = ("free", "positive", "simplex-row")


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    length: int
    constraint: str = "free"
    row_length: Optional[int] = None  # for simplex-row segments

    def __post_init__(self):
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {self.constraint!r}")
        if self.constraint == "simplex-row":
            rl = self.row_length or self.length
            if self.length % rl:
                raise ValueError(f"segment {self.name}: length {self.length} not a multiple of row length {rl}")


@dataclass(frozen=True)
class Layout:
    """Ordered named segments describing how parameters pack into a vector."""

    segments: Tuple[Segment, ...]

    @classmethod
    def build(cls, *parts) -> "Layout":
        """Build from ``(name, length[, constraint[, row_length]])`` tuples laid end to end."""
        segs, offset = [], 0
        for part in parts:
            name, length, *rest = part
            constraint = rest[0] if rest else "free"
            row_length = rest[1] if len(rest) > 1 else None
            segs.append(Segment(name, offset, int(length), constraint, row_length))
            offset += int(length)
        return cls(tuple(segs))

    @property
    def size(self) -> int:
        return sum(s.length for s in self.segments)

    def __getitem__(self, name) -> Segment:
        for s in self.segments:
            if s.name == name:
                return s
        raise KeyError(name)

    def view(self, values, name):
        s = self[name]
        return np.asarray(values)[s.offset:s.offset + s.length]

    def validate(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.size,):
            raise DimensionError(f"expected vector of length {self.size}, got shape {values.shape}")
        expected = 0
        for s in self.segments:
            if s.offset != expected:
                raise DimensionError(f"segment {s.name} starts at {s.offset}, expected {expected}")
            expected += s.length
            block = values[s.offset:s.offset + s.length]
            if s.constraint == "positive" and np.any(block <= 0):
                raise ValueError(f"segment {s.name} must be strictly positive")
            if s.constraint == "simplex-row":
                rows = block.reshape(-1, s.row_length or s.length)
                if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-12):
                    raise ValueError(f"segment {s.name} rows must lie on the simplex")
        return values


class LastValueCache:
    """Remembers the most recent result of an expensive per-point computation."""

    def __init__(self, fn):
        self.fn = fn
        self._key = None
        self._value = None

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key != self._key:
            self._value = self.fn(theta)
            self._key = key
        return self._value


def free_layout(n: int, name: str = "theta") -> Layout:
    return Layout.build((name, n))


@dataclass
class ParamVector:
    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.values = self.layout.validate(self.values)

    def __getitem__(self, name):
        return self.layout.view(self.values, name)


class IterationMap:
    """One bound-optimization algorithm on a fixed problem instance.

    Subclasses implement :meth:`objective`, :meth:`gradient` and
    :meth:`step` over the flat vector described by ``layout``.  Maps that
    can evaluate their surrogate override :meth:`bound`; models with
    continuous parameter degeneracies override :meth:`gauge_directions`.
    """

    name = "map"
    minimize = False

    def __init__(self, layout: Layout):
        self.layout = layout

    @property
    def dim(self) -> int:
        return self.layout.size

    def objective(self, theta) -> float:
        raise NotImplementedError

    def gradient(self, theta) -> np.ndarray:
        raise NotImplementedError

    def step(self, theta) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, theta) -> Tuple[float, np.ndarray]:
        """Objective and gradient together; override when they share work."""
        return self.objective(theta), self.gradient(theta)

    def bound(self, theta, psi) -> float:
        """Surrogate G(theta, psi), in the maximization sense."""
        raise UnsupportedCapabilityError(f"{self.name} does not expose its bound function")

    @property
    def has_bound(self) -> bool:
        return type(self).bound is not IterationMap.bound

    def gauge_directions(self, theta) -> List[np.ndarray]:
        return []

    def degenerate_directions(self, theta) -> List[np.ndarray]:
        """Every known direction along which the objective and the map are flat; includes the gauge."""
        return self.gauge_directions(theta)

    def on_boundary(self, theta) -> bool:
        """True when a numerical floor (variance, probability, factor) is active at ``theta``."""
        return False

    def display_objective(self, value: float) -> float:
        value = float(value)
        return -value if self.minimize else value


@dataclass(frozen=True)
class StopRule:
    rel_tol: float = 1e-10
    max_iter: int = 10000

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


class CurveRow(NamedTuple):
    iteration: int
    objective: float
    step_norm: float
    grad_norm: float


class LearningCurve:
    """Per-iteration objective, step norm and gradient norm, stored column-wise."""

    HEADER = ("iter", "objective", "step_norm", "grad_norm")

    def __init__(self):
        self._obj: List[float] = []
        self._step: List[float] = []
        self._grad: List[float] = []

    def append(self, objective, step_norm, grad_norm):
        self._obj.append(float(objective))
        self._step.append(float(step_norm))
        self._grad.append(float(grad_norm))

    def __len__(self):
        return len(self._obj)

    def __getitem__(self, i) -> CurveRow:
        i = range(len(self))[i]
        return CurveRow(i, self._obj[i], self._step[i], self._grad[i])

    @property
    def rows(self) -> List[CurveRow]:
        return [CurveRow(i, o, s, g) for i, (o, s, g) in enumerate(zip(self._obj, self._step, self._grad))]

    @property
    def iterations(self) -> int:
        return max(len(self) - 1, 0)

    @property
    def objectives(self) -> np.ndarray:
        return np.array(self._obj)

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array(self._grad)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.HEADER) + "\n")
        for i, (o, s, g) in enumerate(zip(self._obj, self._step, self._grad)):
            buf.write(f"{i},{o!r},{s!r},{g!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LearningCurve":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != cls.HEADER:
            raise ValueError(f"unexpected curve header {header}")
        curve = cls()
        for k, row in enumerate(reader):
            if int(row[0]) != k:
                raise ValueError(f"iteration column out of sequence at row {k}")
            curve.append(float(row[1]), float(row[2]), float(row[3]))
        return curve

    def is_monotone(self, rel_slack: float = 1e-12) -> bool:
        obj = self.objectives
        return bool(np.all(obj[1:] >= obj[:-1] - rel_slack * np.abs(obj[:-1])))


@dataclass
class RunResult:
    final: np.ndarray
    curve: LearningCurve
    status: str
    trajectory: Optional[List[np.ndarray]] = None

    @property
    def iterations(self) -> int:
        return self.curve.iterations

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def __iter__(self):
        # allows ``final, curve, status = run(...)``
        return iter((self.final, self.curve, self.status))


ABORT_SLACK = 1e-9


def _relative_change(new, old):
    if new == old:
        return 0.0
    denom = abs(new)
    if denom == 0.0:
        return math.inf
    return (new - old) / denom


def run(imap: IterationMap, init, stop: StopRule = StopRule(), keep_trajectory: bool = False,
        window: Optional[int] = None) -> RunResult:
    """Iterate ``imap.step`` from ``init`` until the relative objective gain drops below ``stop.rel_tol``.

    Iteration 0 is the initial point; the reported iteration count is the
    number of steps taken.  A decrease of the objective by more than 1e-9
    relative (absolute below magnitude 1) aborts the run with :class:`BoundViolationError`.  With
    ``keep_trajectory`` the iterates are returned, all of them or only the
    last ``window``.
    """
    if isinstance(init, ParamVector):
        theta = init.values.copy()
    else:
        theta = imap.layout.validate(np.array(init, dtype=float))
    obj, grad = imap.evaluate(theta)
    obj = float(obj)
    if not np.isfinite(obj):
        raise NumericError("non-finite objective at iteration 0")
    curve = LearningCurve()
    curve.append(obj, 0.0, np.linalg.norm(grad))
    trajectory = deque([theta.copy()], maxlen=window) if keep_trajectory else None
    status = "maxIterReached"
    for it in range(1, stop.max_iter + 1):
        new = np.asarray(imap.step(theta), dtype=float)
        new_obj, grad = imap.evaluate(new)
        new_obj = float(new_obj)
        if not np.isfinite(new_obj) or not np.all(np.isfinite(new)):
            raise NumericError(f"non-finite objective or parameters at iteration {it}")
        # unit floor: an objective that has reached zero only wobbles by rounding
        if new_obj < obj - ABORT_SLACK * max(abs(obj), 1.0):
            raise BoundViolationError(
                f"{imap.name}: objective decreased from {obj!r} to {new_obj!r} at iteration {it}",
                before=obj, after=new_obj)
        curve.append(new_obj, np.linalg.norm(new - theta), np.linalg.norm(grad))
        if keep_trajectory:
            trajectory.append(new.copy())
        change = _relative_change(new_obj, obj)
        theta, obj = new, new_obj
        if change < stop.rel_tol:
            status = "converged"
            break
    return RunResult(theta, curve, status, list(trajectory) if keep_trajectory else None)


@dataclass
class BoundProbe:
    touches: bool
    bounds: bool
    gap_at_pair: float
    touch_error: float

    @property
    def passed(self) -> bool:
        return self.touches and self.bounds


def check_bound_contract(imap: IterationMap, probes: Iterable[Tuple[np.ndarray, np.ndarray]], rtol: float = 1e-9) -> List[BoundProbe]:
    """Check G(t, t) = L(t) and L(t) >= G(t, p) for every probe pair (t, p)."""
    if not imap.has_bound:
        raise UnsupportedCapabilityError(f"{imap.name} does not expose its bound function")
    report = []
    for theta, psi in probes:
        theta = np.asarray(theta, dtype=float)
        psi = np.asarray(psi, dtype=float)
        L = imap.objective(theta)
        scale = max(abs(L), 1.0) if L == 0 else abs(L)
        touch = abs(imap.bound(theta, theta) - L)
        gap = L - imap.bound(theta, psi)
        report.append(BoundProbe(touch <= rtol * scale, gap >= -rtol * scale, gap, touch))
    return report


def positive_projection_audit(imap: IterationMap, trajectory: Sequence[np.ndarray], grad_floor: float = 1e-8) -> List[bool]:
    """For each consecutive pair, check grad L(t)^T (next - t) > 0 where the gradient is not negligible."""
    out = []
    for a, b in zip(trajectory[:-1], trajectory[1:]):
        g = imap.gradient(a)
        if np.linalg.norm(g) <= grad_floor:
            out.append(True)
            continue
        out.append(bool(g @ (np.asarray(b) - np.asarray(a)) > 0))
    return out
