"""Discrete spectral data and its JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import SpecError


def cpair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def from_cpair(v: Any) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise SpecError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float, complex)):
        return complex(v)
    raise SpecError(f"cannot read complex value from {v!r}")


@dataclass(frozen=True)
class DiscreteEigen:
    """One zero of ``a`` (upper half-plane) or ``abar`` (lower half-plane).

    ``a_derivatives[m]`` holds the derivative of order ``multiplicity + m`` at
    the zero, ``m = 0 .. multiplicity - 1``; ``b_derivatives[r]`` holds the
    derivative of order ``r`` of the norming function ``b`` (or ``bbar``).
    Entries may be sympy expressions when the object is used symbolically.
    """

    location: Any
    multiplicity: int
    a_derivatives: tuple = ()
    b_derivatives: tuple = ()
    flags: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "a_derivatives", tuple(self.a_derivatives))
        object.__setattr__(self, "b_derivatives", tuple(self.b_derivatives))
        object.__setattr__(self, "flags", tuple(self.flags))
        if int(self.multiplicity) < 1:
            raise SpecError("multiplicity must be a positive integer")

    def to_json(self) -> dict:
        out = {
            "location": cpair(self.location),
            "multiplicity": int(self.multiplicity),
            "a_derivatives": [cpair(v) for v in self.a_derivatives],
            "b_derivatives": [cpair(v) for v in self.b_derivatives],
        }
        if self.flags:
            out["flags"] = list(self.flags)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DiscreteEigen":
        try:
            return cls(
                location=from_cpair(obj["location"]),
                multiplicity=int(obj["multiplicity"]),
                a_derivatives=tuple(from_cpair(v) for v in obj.get("a_derivatives", [])),
                b_derivatives=tuple(from_cpair(v) for v in obj.get("b_derivatives", [])),
                flags=tuple(obj.get("flags", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed discrete eigen record: {exc}") from exc


@dataclass(frozen=True)
class ReconstructionInput:
    """Full discrete dataset: zeros of ``a`` in C+ and of ``abar`` in C-."""

    upper: tuple[DiscreteEigen, ...] = ()
    lower: tuple[DiscreteEigen, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "upper", tuple(self.upper))
        object.__setattr__(self, "lower", tuple(self.lower))

    def validate(self) -> None:
        from .errors import InsufficientDerivatives

        for side, items, sign in (("upper", self.upper, 1), ("lower", self.lower, -1)):
            for e in items:
                im = complex(e.location).imag
                if sign * im <= 0:
                    raise SpecError(f"{side} eigen at {e.location} is in the wrong half-plane")
                nu = e.multiplicity
                if len(e.a_derivatives) < nu or len(e.b_derivatives) < nu:
                    raise InsufficientDerivatives(
                        f"{side} eigen at {e.location} needs {nu} a- and b-derivatives"
                    )

    def to_json(self) -> dict:
        return {
            "upper": [e.to_json() for e in self.upper],
            "lower": [e.to_json() for e in self.lower],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ReconstructionInput":
        if not isinstance(obj, dict) or "upper" not in obj:
            raise SpecError("discrete data JSON must be an object with 'upper' and 'lower' lists")
        return cls(
            upper=tuple(DiscreteEigen.from_json(e) for e in obj["upper"]),
            lower=tuple(DiscreteEigen.from_json(e) for e in obj.get("lower", [])),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    @classmethod
    def loads(cls, text: str) -> "ReconstructionInput":
        return cls.from_json(json.loads(text))


def example31_data() -> ReconstructionInput:
    """Double-pole data at k = +-i with unit norming and a_kk = -1/2."""
    up = DiscreteEigen(1j, 2, a_derivatives=(-0.5, 0.0), b_derivatives=(1.0, 0.0))
    lo = DiscreteEigen(-1j, 2, a_derivatives=(-0.5, 0.0), b_derivatives=(1.0, 0.0))
    return ReconstructionInput((up,), (lo,))


def one_soliton_data(eta: float = 1.0, norming: complex = 1.0) -> ReconstructionInput:
    """Simple pair at +-i*eta with ``a(k) = (k - i eta)/(k + i eta)``.

    ``a_k`` and ``abar_k`` follow from that closed form, so the lower data
    mirrors the upper one under ``k -> -k``.
    """
    k1 = 1j * eta
    a_k = 1.0 / (2 * k1)
    abar_k = -1.0 / (2 * k1)
    up = DiscreteEigen(k1, 1, a_derivatives=(a_k,), b_derivatives=(norming,))
    lo = DiscreteEigen(-k1, 1, a_derivatives=(abar_k,), b_derivatives=(norming,))
    return ReconstructionInput((up,), (lo,))


def mirrored(upper: Sequence[DiscreteEigen], sign: int = 1) -> ReconstructionInput:
    """Complete upper data with lower data via ``abar(k) = a(-k)``.

    ``sign = +1`` gives ``bbar(k) = b(-k)`` (r = q); ``sign = -1`` gives
    ``bbar(k) = -b(-k)`` (r = -q).
    """
    lower = []
    for e in upper:
        nu = e.multiplicity
        ad = tuple((-1) ** (nu + m) * v for m, v in enumerate(e.a_derivatives))
        bd = tuple(sign * (-1) ** r * v for r, v in enumerate(e.b_derivatives))
        lower.append(DiscreteEigen(-e.location, nu, ad, bd))
    return ReconstructionInput(tuple(upper), tuple(lower))
