"""Jet-evaluable scalar fields, vector fields and forms on a chart of the Heisenberg group.

Every field carries a *depth*: the number of derivatives its rule consumes.
Evaluating a field of depth d to order k seeds the coordinate jets with
order k + d.  Subexpressions are memoised per evaluation batch, so shared
pieces of a geometric package (frame, connection, torsion) are computed once.
"""
from __future__ import annotations

import logging
import threading
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import jets
from .config import settings
from .jets import Jet
from .utils import DomainError, JetOrderError, Memo

logger = logging.getLogger(__name__)

# dx, dy, dt, dz, dzbar, conj, real, imag, recip
DERIVED_KEYS = 16
_DERIVED_LOCK = threading.Lock()

_JET_ORDER: ContextVar[int | None] = ContextVar("jet_order", default=None)


def max_jet_order() -> int:
    """Jet order limit of the current run, else PH_JET_ORDER."""
    order = _JET_ORDER.get()
    return settings.JET_ORDER if order is None else order


@contextmanager
def jet_order_limit(order: int):
    """Scope a jet order limit to the current thread or task."""
    token = _JET_ORDER.set(order)
    try:
        yield
    finally:
        _JET_ORDER.reset(token)


@dataclass(frozen=True)
class Domain:
    """Named validity predicate on base points."""

    name: str
    predicate: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


RHO_POSITIVE = Domain("rho > 0", lambda x, y, t: x * x + y * y + np.abs(t) > 0)
Z_NONZERO = Domain("z != 0", lambda x, y, t: x * x + y * y > 0)
T_NONZERO = Domain("t != 0", lambda x, y, t: t != 0)


def rho_greater(rho0: float) -> Domain:
    return Domain(f"rho > {rho0:g}", lambda x, y, t: (x * x + y * y) ** 2 + t * t > rho0**4)


def as_points(points) -> np.ndarray:
    """Normalise HPoint-likes, (3,) or (N, 3) arrays into an (N, 3) float array."""
    if hasattr(points, "x") and hasattr(points, "t"):
        return np.array([[points.x, points.y, points.t]], dtype=float)
    if isinstance(points, (list, tuple)) and points and hasattr(points[0], "t"):
        return np.array([[p.x, p.y, p.t] for p in points], dtype=float)
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected points of shape (N, 3), got {arr.shape}")
    return arr


class Coords:
    """Coordinate jets at a batch of base points plus the evaluation memo."""

    def __init__(self, pts: np.ndarray, order: int):
        self.pts = pts
        self.order = order
        self.n = pts.shape[0]
        self.x = Jet.variable(pts[:, 0], "x", order)
        self.y = Jet.variable(pts[:, 1], "y", order)
        self.t = Jet.variable(pts[:, 2], "t", order)
        self.memo: dict[int, tuple[ScalarField, Jet]] = {}


class ScalarField:
    def __init__(
        self,
        rule: Callable[[Coords], Jet],
        depth: int = 0,
        domain: Iterable[Domain] = (),
        note: str = "",
        const: complex | None = None,
    ):
        self.rule = rule
        self.depth = depth
        self.domain = tuple(dict.fromkeys(domain))
        self.note = note
        self.const = const
        self._derived: Memo | None = None

    # evaluation -------------------------------------------------------

    def jet(self, coords: Coords) -> Jet:
        hit = coords.memo.get(id(self))
        if hit is not None:
            return hit[1]
        out = self.rule(coords)
        coords.memo[id(self)] = (self, out)
        return out

    def __call__(self, points, order: int = 0) -> Jet:
        return evaluate_jets([self], points, order)[0]

    def values(self, points) -> np.ndarray:
        return self(points, 0).value

    def check_domain(self, pts: np.ndarray) -> None:
        for dom in self.domain:
            ok = dom.predicate(pts[:, 0], pts[:, 1], pts[:, 2])
            if not np.all(ok):
                bad = pts[~np.asarray(ok, dtype=bool)][0]
                raise DomainError(f"{self.note or 'field'} evaluated outside {dom.name} at {tuple(bad)}")

    # construction helpers ----------------------------------------------

    @classmethod
    def constant(cls, value: complex) -> "ScalarField":
        return cls(lambda c: Jet.constant(value, c.n, c.order), const=complex(value), note=f"{value}")

    def _derive(self, key: str, factory: Callable[[], "ScalarField"]) -> "ScalarField":
        if self._derived is None:
            with _DERIVED_LOCK:
                if self._derived is None:
                    self._derived = Memo(DERIVED_KEYS)
        field = self._derived.get(key)
        if field is None:
            field = self._derived.put(key, factory())
        return field

    def partial(self, axis: str) -> "ScalarField":
        if self.const is not None:
            return ZERO
        return self._derive(
            "d" + axis,
            lambda: ScalarField(lambda c: self.jet(c).partial(axis), self.depth + 1, self.domain, "d" + axis),
        )

    def dx(self) -> "ScalarField":
        return self.partial("x")

    def dy(self) -> "ScalarField":
        return self.partial("y")

    def dt(self) -> "ScalarField":
        return self.partial("t")

    def dz(self) -> "ScalarField":
        return self._derive("dz", lambda: 0.5 * (self.dx() - 1j * self.dy()))

    def dzbar(self) -> "ScalarField":
        return self._derive("dzbar", lambda: 0.5 * (self.dx() + 1j * self.dy()))

    def conj(self) -> "ScalarField":
        if self.const is not None:
            return ScalarField.constant(np.conj(self.const))
        return self._derive("conj", lambda: ScalarField(lambda c: self.jet(c).conj(), self.depth, self.domain, "conj"))

    @property
    def real(self) -> "ScalarField":
        return self._derive("real", lambda: ScalarField(lambda c: self.jet(c).real, self.depth, self.domain, "Re"))

    @property
    def imag(self) -> "ScalarField":
        return self._derive("imag", lambda: ScalarField(lambda c: self.jet(c).imag, self.depth, self.domain, "Im"))

    def map(self, fn: Callable[[Jet], Jet], note: str) -> "ScalarField":
        return ScalarField(lambda c: fn(self.jet(c)), self.depth, self.domain, note)

    def named(self, note: str) -> "ScalarField":
        self.note = note
        return self

    def restrict(self, *domains: Domain) -> "ScalarField":
        """Same rule, additional validity predicates."""
        return ScalarField(self.jet, self.depth, self.domain + domains, self.note)

    # arithmetic -------------------------------------------------------

    def _binary(self, other, op, symbol: str) -> "ScalarField":
        if isinstance(other, ScalarField):
            return ScalarField(
                lambda c: op(self.jet(c), other.jet(c)),
                max(self.depth, other.depth),
                self.domain + other.domain,
                symbol,
            )
        return ScalarField(lambda c: op(self.jet(c), other), self.depth, self.domain, symbol)

    def __add__(self, other):
        if not isinstance(other, ScalarField):
            if other == 0:
                return self
            if self.const is not None:
                return ScalarField.constant(self.const + other)
        elif other.const is not None:
            return self + other.const
        elif self.const is not None:
            return other + self.const
        return self._binary(other, lambda a, b: a + b, "+")

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, ScalarField):
            if other == 0:
                return ZERO
            if other == 1:
                return self
            if self.const is not None:
                return ScalarField.constant(self.const * other)
        elif other.const is not None:
            return self * other.const
        elif self.const is not None:
            return other * self.const
        return self._binary(other, lambda a, b: a * b, "*")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            if other.const is not None:
                return self * (1 / other.const)
            return self * other.reciprocal()
        return self * (1 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self) -> "ScalarField":
        if self.const is not None:
            return ScalarField.constant(1 / self.const)
        return self._derive("recip", lambda: self.map(lambda j: j.reciprocal(), "1/"))

    def __pow__(self, p):
        if self.const is not None:
            return ScalarField.constant(self.const**p)
        if p == 1:
            return self
        return self.map(lambda j: j**p, "pow")

    def __repr__(self) -> str:
        return f"ScalarField({self.note or '?'}, depth={self.depth})"


ZERO = ScalarField(lambda c: Jet.constant(0.0, c.n, c.order), const=0j, note="0")
ONE = ScalarField(lambda c: Jet.constant(1.0, c.n, c.order), const=1 + 0j, note="1")


def is_zero(field: ScalarField) -> bool:
    return field.const is not None and field.const == 0


def lift(value) -> ScalarField:
    return value if isinstance(value, ScalarField) else ScalarField.constant(value)


# elementary functions -----------------------------------------------------


def exp(f: ScalarField) -> ScalarField:
    if f.const is not None:
        return ScalarField.constant(np.exp(f.const))
    return f.map(jets.exp, "exp")


def log(f: ScalarField) -> ScalarField:
    if f.const is not None:
        return ScalarField.constant(np.log(f.const))
    return f.map(jets.log, "log")


def sqrt(f: ScalarField) -> ScalarField:
    if f.const is not None:
        return ScalarField.constant(np.sqrt(f.const))
    return f.map(jets.sqrt, "sqrt")


def power(f: ScalarField, p: float | complex) -> ScalarField:
    if f.const is not None:
        return ScalarField.constant(f.const**p)
    return f.map(lambda j: jets.power(j, p), "pow")


def step(f: ScalarField) -> ScalarField:
    """Smooth cutoff of a real field: 0 where f <= 0, 1 where f >= 1."""
    return f.map(jets.smooth_step, "step")


def sin(f: ScalarField) -> ScalarField:
    return f.map(jets.sin, "sin")


def cos(f: ScalarField) -> ScalarField:
    return f.map(jets.cos, "cos")


# coordinate fields ----------------------------------------------------------

X = ScalarField(lambda c: c.x, note="x")
Y = ScalarField(lambda c: c.y, note="y")
T = ScalarField(lambda c: c.t, note="t")
Z = ScalarField(lambda c: c.x + 1j * c.y, note="z")
ZBAR = ScalarField(lambda c: c.x - 1j * c.y, note="zbar")


# batch evaluation -------------------------------------------------------------


def evaluate_jets(fields: Sequence[ScalarField], points, order: int = 0) -> list[Jet]:
    """Evaluate several fields at the same points, sharing one memo per chunk."""
    pts = as_points(points)
    depth = max(f.depth for f in fields)
    seed = order + depth
    limit = max_jet_order()
    if seed > limit:
        raise JetOrderError(
            f"evaluation needs jets of order {seed} (order {order} + depth {depth}); "
            f"configured maximum is {limit}"
        )
    for f in fields:
        f.check_domain(pts)
    chunk = max(1, settings.CHUNK_SIZE)
    pieces: list[list[Jet]] = [[] for _ in fields]
    for start in range(0, pts.shape[0], chunk):
        coords = Coords(pts[start : start + chunk], seed)
        for k, f in enumerate(fields):
            pieces[k].append(f.jet(coords).truncate(order))
    out = []
    for parts in pieces:
        if len(parts) == 1:
            out.append(parts[0])
        else:
            out.append(Jet(np.concatenate([p.coef for p in parts], axis=0), order))
    return out


def evaluate(fields: Sequence[ScalarField], points) -> list[np.ndarray]:
    """Plain values of several fields at the same points."""
    return [j.value for j in evaluate_jets(fields, points, 0)]


# vector fields and forms --------------------------------------------------------


class VectorField:
    """X = vz d/dz + vzbar d/dzbar + vt d/dt."""

    def __init__(self, vz, vzbar, vt):
        self.vz, self.vzbar, self.vt = lift(vz), lift(vzbar), lift(vt)
        self._applied = Memo(settings.MEMO_SIZE)

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return self.vz, self.vzbar, self.vt

    def __call__(self, f: ScalarField) -> ScalarField:
        hit = self._applied.get(id(f))
        if hit is not None:
            return hit[1]
        out = ZERO
        for coef, deriv in ((self.vz, f.dz), (self.vzbar, f.dzbar), (self.vt, f.dt)):
            if not is_zero(coef):
                out = out + coef * deriv()
        return self._applied.put(id(f), (f, out))[1]

    def conj(self) -> "VectorField":
        return VectorField(self.vzbar.conj(), self.vz.conj(), self.vt.conj())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(*(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(*(a - b for a, b in zip(self.components, other.components)))

    def scale(self, f) -> "VectorField":
        return VectorField(*(f * a for a in self.components))

    def real_components(self, points) -> np.ndarray:
        """(vx, vy, vt) of a real vector field; vz = vx + i vy."""
        vz, vt = evaluate([self.vz, self.vt], points)
        return np.stack([vz.real, vz.imag, vt.real])


def bracket(a: VectorField, b: VectorField) -> VectorField:
    """[a, b] in the coordinate basis: [a, b]^k = a(b^k) - b(a^k)."""
    return VectorField(*(a(bk) - b(ak) for ak, bk in zip(a.components, b.components)))


class OneForm:
    """az dz + azbar dzbar + at dt."""

    def __init__(self, az, azbar, at):
        self.az, self.azbar, self.at = lift(az), lift(azbar), lift(at)

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return self.az, self.azbar, self.at

    def __call__(self, v: VectorField) -> ScalarField:
        out = ZERO
        for a, b in zip(self.components, v.components):
            if not (is_zero(a) or is_zero(b)):
                out = out + a * b
        return out

    def conj(self) -> "OneForm":
        return OneForm(self.azbar.conj(), self.az.conj(), self.at.conj())

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm(*(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "OneForm") -> "OneForm":
        return OneForm(*(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self) -> "OneForm":
        return OneForm(*(-a for a in self.components))

    def scale(self, f) -> "OneForm":
        return OneForm(*(f * a for a in self.components))

    def d(self) -> "TwoForm":
        a, b, c = self.components
        return TwoForm(b.dz() - a.dzbar(), c.dz() - a.dt(), c.dzbar() - b.dt())

    def wedge(self, other: "OneForm") -> "TwoForm":
        a, b, c = self.components
        p, q, r = other.components
        return TwoForm(a * q - b * p, a * r - c * p, b * r - c * q)


class TwoForm:
    """czzb dz^dzbar + czt dz^dt + czbt dzbar^dt."""

    def __init__(self, czzb, czt, czbt):
        self.czzb, self.czt, self.czbt = lift(czzb), lift(czt), lift(czbt)

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return self.czzb, self.czt, self.czbt

    def __call__(self, u: VectorField, v: VectorField) -> ScalarField:
        uz, uzb, ut = u.components
        vz, vzb, vt = v.components
        return (
            self.czzb * (uz * vzb - uzb * vz)
            + self.czt * (uz * vt - ut * vz)
            + self.czbt * (uzb * vt - ut * vzb)
        )

    def conj(self) -> "TwoForm":
        return TwoForm(-self.czzb.conj(), self.czbt.conj(), self.czt.conj())

    def __add__(self, other: "TwoForm") -> "TwoForm":
        return TwoForm(*(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "TwoForm") -> "TwoForm":
        return TwoForm(*(a - b for a, b in zip(self.components, other.components)))

    def scale(self, f) -> "TwoForm":
        return TwoForm(*(f * a for a in self.components))
