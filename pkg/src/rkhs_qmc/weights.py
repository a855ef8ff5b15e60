"""Product weight sequences.

A weight sequence assigns a positive importance ``gamma_j`` to every
coordinate ``j = 1, 2, ...``.  Interaction sets get product weights
``gamma_u = prod_{j in u} gamma_j``.  Three families are available:

* ``polynomial(p, scale)``: ``gamma_j = scale * j**(-p)`` with ``p > 1``;
* ``geometric(q, scale)``: ``gamma_j = scale * q**j`` with ``0 < q < 1``;
* ``explicit(values, tail)``: a finite prefix followed by a polynomial tail.

All sequences are summable, which is enforced at construction.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "WeightSequence",
    "polynomial",
    "geometric",
    "explicit",
    "parse_weights",
]

_LOG_TAIL_TOL = 1e-12
_MAX_TERMS = 10_000_000


@dataclass(frozen=True)
class WeightSequence:
    """Summable sequence of positive product weights.

    Parameters
    ----------
    kind : {"polynomial", "geometric", "explicit"}
    exponent : float
        ``p`` for polynomial sequences and polynomial tails.
    ratio : float
        ``q`` for geometric sequences.
    scale : float
        Multiplicative factor of the closed-form part.
    prefix : tuple of float
        Leading values of an explicit sequence.
    """

    kind: str
    exponent: float = 0.0
    ratio: float = 0.0
    scale: float = 1.0
    prefix: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.kind not in ("polynomial", "geometric", "explicit"):
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError("weight scale must be positive and finite")
        if self.kind in ("polynomial", "explicit") and not self.exponent > 1:
            raise DomainError("polynomial weights need exponent p > 1 to be summable")
        if self.kind == "geometric" and not 0 < self.ratio < 1:
            raise DomainError("geometric weights need ratio 0 < q < 1 to be summable")
        if self.kind == "explicit":
            if len(self.prefix) == 0:
                raise DomainError("explicit weights need at least one value")
            if any(not (v > 0 and math.isfinite(v)) for v in self.prefix):
                raise DomainError("explicit weights must be positive and finite")

    # -- single weights -------------------------------------------------

    def weight(self, j: int) -> float:
        """Return ``gamma_j`` for a coordinate index ``j >= 1``."""
        if j < 1:
            raise DomainError("coordinate indices start at 1")
        return float(self.weights(np.array([j]))[0])

    def weights(self, indices: Iterable[int] | np.ndarray) -> np.ndarray:
        """Vectorized ``gamma_j`` for an array of indices (all ``>= 1``)."""
        j = np.asarray(indices, dtype=float)
        if np.any(j < 1):
            raise DomainError("coordinate indices start at 1")
        if self.kind == "polynomial":
            return self.scale * j ** (-self.exponent)
        if self.kind == "geometric":
            return self.scale * self.ratio**j
        out = self.scale * j ** (-self.exponent)
        head = j <= len(self.prefix)
        if np.any(head):
            out[head] = np.asarray(self.prefix)[j[head].astype(int) - 1]
        return out

    def first(self, s: int) -> np.ndarray:
        """The leading ``s`` weights as an array."""
        return self.weights(np.arange(1, s + 1))

    def set_weight(self, u: Iterable[int]) -> float:
        """Product weight of a finite coordinate set (1 for the empty set)."""
        idx = sorted(set(int(j) for j in u))
        if not idx:
            return 1.0
        return float(np.prod(self.weights(idx)))

    # -- global properties ----------------------------------------------

    def decay(self) -> float:
        """Supremum of ``p`` with ``sum gamma_j**(1/p) < inf``."""
        if self.kind == "geometric":
            return math.inf
        return float(self.exponent)

    def scaled(self, c: float) -> "WeightSequence":
        """The sequence ``c * gamma``."""
        if not c > 0:
            raise DomainError("scaling factor must be positive")
        return WeightSequence(
            kind=self.kind,
            exponent=self.exponent,
            ratio=self.ratio,
            scale=self.scale * c,
            prefix=tuple(c * v for v in self.prefix),
        )

    def tail_sum(self, n: int) -> float:
        """Upper bound for ``sum_{j > n} gamma_j``."""
        n = max(int(n), 0)
        if self.kind == "geometric":
            return self.scale * self.ratio ** (n + 1) / (1 - self.ratio)
        start = max(n, len(self.prefix)) if self.kind == "explicit" else n
        extra = 0.0
        if self.kind == "explicit" and n < len(self.prefix):
            extra = float(sum(self.prefix[n:]))
        p = self.exponent
        if start == 0:
            # 1 + int_1^inf t^-p dt
            return extra + self.scale * (1 + 1 / (p - 1))
        return extra + self.scale * start ** (1 - p) / (p - 1)

    def truncation_index(self, tol: float) -> int:
        """Smallest ``n`` with ``tail_sum(n) < tol`` (capped)."""
        lo, hi = 0, 1
        while self.tail_sum(hi) >= tol:
            hi *= 2
            if hi > _MAX_TERMS:
                return _MAX_TERMS
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail_sum(mid) >= tol:
                lo = mid
            else:
                hi = mid
        return hi

    def embedding_budget(self, s: int | float, tol: float = _LOG_TAIL_TOL) -> float:
        """``prod_{j <= s} (1 + gamma_j)**(1/2)``; ``s = inf`` is truncated.

        For infinite ``s`` the product stops once the bound on the remaining
        log-sum drops below ``tol``; the remaining bound is then added so the
        result stays an upper bound.
        """
        if s == 0:
            return 1.0
        if math.isinf(s):
            n = self.truncation_index(2 * tol)
            rest = 0.5 * self.tail_sum(n)
        else:
            n, rest = int(s), 0.0
        log_sum = 0.0
        for start in range(1, n + 1, 1_000_000):
            idx = np.arange(start, min(n, start + 999_999) + 1)
            log_sum += 0.5 * float(np.sum(np.log1p(self.weights(idx))))
        return math.exp(log_sum + rest)

    def describe(self) -> str:
        """Config-syntax representation (round-trips through ``parse_weights``)."""
        if self.kind == "polynomial":
            return f"poly(p={self.exponent:g}, scale={self.scale:g})"
        if self.kind == "geometric":
            return f"geom(q={self.ratio:g}, scale={self.scale:g})"
        vals = ",".join(f"{v:g}" for v in self.prefix)
        return f"list({vals}; tail=poly(p={self.exponent:g}, scale={self.scale:g}))"


def polynomial(p: float, scale: float = 1.0) -> WeightSequence:
    """``gamma_j = scale * j**(-p)``."""
    return WeightSequence(kind="polynomial", exponent=float(p), scale=float(scale))


def geometric(q: float, scale: float = 1.0) -> WeightSequence:
    """``gamma_j = scale * q**j``."""
    return WeightSequence(kind="geometric", ratio=float(q), scale=float(scale))


def explicit(values: Sequence[float], tail_p: float, tail_scale: float = 1.0) -> WeightSequence:
    """Finite prefix ``values`` followed by ``tail_scale * j**(-tail_p)``."""
    return WeightSequence(
        kind="explicit",
        exponent=float(tail_p),
        scale=float(tail_scale),
        prefix=tuple(float(v) for v in values),
    )


_CALL = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$", re.S)


def _keyword_args(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise DomainError(f"expected key=value, got {part!r}")
        out[key.strip()] = float(value)
    return out


def parse_weights(text: str) -> WeightSequence:
    """Parse ``poly(p=3, scale=0.5)``, ``geom(q=0.5)`` or ``list(0.9,0.5; tail=poly(p=4))``."""
    match = _CALL.match(text)
    if not match:
        raise DomainError(f"cannot parse weights {text!r}")
    name, body = match.group(1).lower(), match.group(2)
    try:
        if name in ("poly", "polynomial"):
            kw = _keyword_args(body)
            return polynomial(kw["p"], kw.get("scale", 1.0))
        if name in ("geom", "geometric"):
            kw = _keyword_args(body)
            return geometric(kw["q"], kw.get("scale", 1.0))
        if name == "list":
            values_text, sep, tail_text = body.partition(";")
            if not sep:
                raise DomainError("explicit weights need a '; tail=poly(...)' descriptor")
            key, _, tail_call = tail_text.partition("=")
            if key.strip() != "tail":
                raise DomainError("explicit weights need a tail descriptor")
            tail = parse_weights(tail_call)
            if tail.kind != "polynomial":
                raise DomainError("the tail of explicit weights must be polynomial")
            values = [float(v) for v in values_text.split(",") if v.strip()]
            return explicit(values, tail.exponent, tail.scale)
    except KeyError as exc:
        raise DomainError(f"missing weight parameter {exc}") from None
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(str(exc)) from None
    raise DomainError(f"unknown weight family {name!r}")
