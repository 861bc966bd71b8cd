"""Scattering coefficients from Jost solutions, plus the identities they obey.

With envelopes M, Mbar, N, Nbar (see :mod:`zsscatter.contour_ode`):

    a    = det(M, N)                    abar = det(Nbar, Mbar)
    b    = e^{-2ikx} det(Nbar, M)       bbar = e^{2ikx} det(Mbar, N)

Each determinant is x-independent, so it is evaluated at several matching
points; the mean is reported and the spread kept as a drift diagnostic.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .contour_ode import ATOL, RTOL, Contour, Jost, integrate_batch
from .errors import (
    ContractViolation,
    DegenerateWronskian,
    DivisionByZeroPotential,
    IncompleteData,
    MissingPartner,
    UnsupportedOrder,
    ZSError,
)
from .potentials import PotentialPair, Symmetry, tail_beyond

log = logging.getLogger(__name__)

WRONSKIAN_TOL = 1e-6
RHO_CUTOFF = 1e-12
# beyond this exponent the elevated contour amplifies rounding by > e^20
AMPLIFICATION_WARN = 20.0

CSV_COLUMNS = (
    "k_re", "k_im", "a_re", "a_im", "abar_re", "abar_im", "b_re", "b_im",
    "bbar_re", "bbar_im", "unitarity_residual", "spread",
)


def _opt(z: complex | None):
    return None if z is None else [z.real, z.imag]


@dataclass(frozen=True)
class ScatteringData:
    """Scattering coefficients at one ``k``.

    Off the real axis only the coefficient analytic there is present
    (``a`` for Im k > 0, ``a_bar`` for Im k < 0); absent entries are None.
    """

    k: complex
    a: complex | None = None
    a_bar: complex | None = None
    b: complex | None = None
    b_bar: complex | None = None
    rho: complex | None = None
    rho_bar: complex | None = None
    unitarity_residual: float | None = None
    wronskian_spread: float = 0.0
    wronskian_defect: float | None = None
    error_budget: float = 0.0

    @property
    def is_real(self) -> bool:
        return self.k.imag == 0

    def to_json(self) -> dict:
        return {
            "k": [self.k.real, self.k.imag],
            "a": _opt(self.a), "a_bar": _opt(self.a_bar),
            "b": _opt(self.b), "b_bar": _opt(self.b_bar),
            "rho": _opt(self.rho), "rho_bar": _opt(self.rho_bar),
            "unitarity_residual": self.unitarity_residual,
            "wronskian_spread": self.wronskian_spread,
            "wronskian_defect": self.wronskian_defect,
            "error_budget": self.error_budget,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScatteringData":
        c = lambda v: None if v is None else complex(v[0], v[1])
        return cls(
            k=c(obj["k"]), a=c(obj.get("a")), a_bar=c(obj.get("a_bar")),
            b=c(obj.get("b")), b_bar=c(obj.get("b_bar")),
            rho=c(obj.get("rho")), rho_bar=c(obj.get("rho_bar")),
            unitarity_residual=obj.get("unitarity_residual"),
            wronskian_spread=float(obj.get("wronskian_spread", 0.0)),
            wronskian_defect=obj.get("wronskian_defect"),
            error_budget=float(obj.get("error_budget", 0.0)),
        )

    def csv_row(self) -> list:
        def parts(z):
            return ["", ""] if z is None else [repr(z.real), repr(z.imag)]

        u = "" if self.unitarity_residual is None else repr(self.unitarity_residual)
        return ([repr(self.k.real), repr(self.k.imag)] + parts(self.a) + parts(self.a_bar)
                + parts(self.b) + parts(self.b_bar) + [u, repr(self.wronskian_spread)])


@dataclass(frozen=True)
class ScatterFailure:
    """Grid entry whose computation raised; the error is kept, not re-raised."""

    k: complex
    error: str
    message: str

    def to_json(self) -> dict:
        return {"k": [self.k.real, self.k.imag], "error": self.error, "message": self.message}


def to_csv(records: Sequence[ScatteringData | ScatterFailure]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        if isinstance(rec, ScatteringData):
            w.writerow(rec.csv_row())
    return buf.getvalue()


def read_csv(text: str) -> list[ScatteringData]:
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    rows = list(csv.DictReader(io.StringIO(body)))
    out = []
    for row in rows:
        def c(name):
            re_, im_ = row[name + "_re"], row[name + "_im"]
            return None if re_ == "" else complex(float(re_), float(im_))

        u = row["unitarity_residual"]
        out.append(ScatteringData(
            k=c("k"), a=c("a"), a_bar=c("abar"), b=c("b"), b_bar=c("bbar"),
            unitarity_residual=None if u == "" else float(u),
            wronskian_spread=float(row["spread"]),
        ))
    return out


def _det(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _spread(vals: np.ndarray) -> float:
    vals = np.asarray(vals)
    return float(np.max(np.abs(vals[:, None] - vals[None, :])))


def _batch(p: PotentialPair, ks: np.ndarray, contour: Contour, matching: Sequence[float],
           rtol: float, atol: float, wronskian_tol: float, tail: float) -> list[ScatteringData]:
    """Coefficients for ks that share a half-plane (all real, all upper or all lower)."""
    im = ks.imag
    real = bool(np.all(im == 0))
    upper = bool(np.all(im > 0))
    need = (["PHI", "PSI", "PHI_BAR", "PSI_BAR"] if real
            else ["PHI", "PSI"] if upper else ["PHI_BAR", "PSI_BAR"])
    sols = {w: integrate_batch(p, ks, contour, w, matching, True, rtol, atol) for w in need}
    xi = np.asarray(sorted(set(float(m) for m in matching)))
    x = contour.gamma(xi)

    def env(w, j):
        s = sols[w][j]
        idx = [int(np.argmin(np.abs(s.xi - m))) for m in xi]
        return s.values[idx]

    out = []
    for j, k in enumerate(ks):
        k = complex(k)
        amp = 2 * abs(k.real) * contour.elevation
        if amp > AMPLIFICATION_WARN:
            log.warning("k=%s on elevation %g amplifies rounding by e^%.1f; lower the elevation",
                        k, contour.elevation, amp)
        budget_base = tail + rtol * math.exp(min(amp, 700.0))
        if real:
            M, N, Mb, Nb = env("PHI", j), env("PSI", j), env("PHI_BAR", j), env("PSI_BAR", j)
            defect = float(max(np.max(np.abs(_det(M, Mb) - 1)), np.max(np.abs(_det(Nb, N) - 1))))
            if not np.isfinite(defect) or defect > wronskian_tol:
                raise DegenerateWronskian(f"det of the Jost pair drifts from 1 by {defect:.3g} at k={k}")
            a_s = _det(M, N)
            ab_s = _det(Nb, Mb)
            b_s = np.exp(-2j * k * x) * _det(Nb, M)
            bb_s = np.exp(2j * k * x) * _det(Mb, N)
            spread = max(_spread(a_s), _spread(ab_s), _spread(b_s), _spread(bb_s))
            a, ab, b, bb = (complex(np.mean(v)) for v in (a_s, ab_s, b_s, bb_s))
            unit = abs(a * ab - b * bb - 1)
            rho = b / a if abs(a) >= RHO_CUTOFF else None
            rhob = bb / ab if abs(ab) >= RHO_CUTOFF else None
            out.append(ScatteringData(k, a, ab, b, bb, rho, rhob, unit, spread, defect,
                                      budget_base + spread))
        elif upper:
            a_s = _det(env("PHI", j), env("PSI", j))
            spread = _spread(a_s)
            out.append(ScatteringData(k, a=complex(np.mean(a_s)), wronskian_spread=spread,
                                      error_budget=budget_base + spread))
        else:
            ab_s = _det(env("PSI_BAR", j), env("PHI_BAR", j))
            spread = _spread(ab_s)
            out.append(ScatteringData(k, a_bar=complex(np.mean(ab_s)), wronskian_spread=spread,
                                      error_budget=budget_base + spread))
    return out


def _check_ks(ks) -> np.ndarray:
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    if np.any(ks == 0):
        raise ContractViolation("k = 0 is excluded from scattering grids")
    return ks


def scatter_at(p: PotentialPair, k: complex, contour: Contour, matching_points: Sequence[float] | None = None,
               rtol: float = RTOL, atol: float = ATOL, wronskian_tol: float = WRONSKIAN_TOL) -> ScatteringData:
    """Scattering data at one ``k``; errors propagate."""
    ks = _check_ks([k])
    matching = contour.matching_points() if matching_points is None else tuple(matching_points)
    tail = tail_beyond(p, contour.half_length)
    return _batch(p, ks, contour, matching, rtol, atol, wronskian_tol, tail)[0]


def scatter_grid(p: PotentialPair, ks: Sequence[complex], contour: Contour,
                 matching_points: Sequence[float] | None = None, rtol: float = RTOL,
                 atol: float = ATOL, wronskian_tol: float = WRONSKIAN_TOL) -> list[ScatteringData | ScatterFailure]:
    """Scattering data over a grid, order preserved.

    k values in the same half-plane and of similar modulus are integrated as
    one batch; a failing batch is retried point by point so that an error is
    charged to the k that caused it.  Failures come back as
    :class:`ScatterFailure` entries.
    """
    ks = _check_ks(ks)
    matching = contour.matching_points() if matching_points is None else tuple(matching_points)
    tail = tail_beyond(p, contour.half_length)
    groups: dict[tuple, list[int]] = {}
    for i, k in enumerate(ks):
        side = int(np.sign(k.imag))
        scale = int(math.floor(math.log2(abs(k))))
        groups.setdefault((side, scale), []).append(i)
    out: list = [None] * len(ks)
    for key in sorted(groups):
        idx = groups[key]
        try:
            recs = _batch(p, ks[idx], contour, matching, rtol, atol, wronskian_tol, tail)
        except ZSError:
            recs = []
            for i in idx:
                try:
                    recs.append(_batch(p, ks[[i]], contour, matching, rtol, atol, wronskian_tol, tail)[0])
                except ZSError as exc:
                    recs.append(ScatterFailure(complex(ks[i]), type(exc).__name__, str(exc)))
        for i, rec in zip(idx, recs):
            out[i] = rec
    return out


# identities ---------------------------------------------------------------


def _find(grid: Sequence[ScatteringData], k: complex) -> ScatteringData | None:
    for rec in grid:
        if isinstance(rec, ScatteringData) and abs(rec.k - k) <= 1e-12 * max(1.0, abs(k)):
            return rec
    return None


def check_symmetry_relations(grid: Sequence[ScatteringData], symmetry: Symmetry | str) -> float:
    """Largest violation of the pair of coefficient identities implied by ``symmetry``.

    r = +-q gives abar(k) = a(-k), bbar(k) = +-b(-k); r = +-q* gives
    abar(k) = a(k*)*, bbar(k) = +-b(k*)*.  Every record that carries
    ``a_bar`` needs its partner in the grid.
    """
    symmetry = Symmetry(symmetry)
    if symmetry is Symmetry.NONE:
        raise ContractViolation("symmetry NONE has no identities to check")
    sign = -1 if symmetry in (Symmetry.R_EQ_NEG_Q, Symmetry.R_EQ_NEG_CONJ_Q) else 1
    conj = symmetry in (Symmetry.R_EQ_CONJ_Q, Symmetry.R_EQ_NEG_CONJ_Q)
    worst, compared = 0.0, 0
    for rec in grid:
        if not isinstance(rec, ScatteringData) or rec.a_bar is None:
            continue
        target = np.conj(rec.k) if conj else -rec.k
        other = _find(grid, complex(target))
        if other is None or other.a is None:
            raise MissingPartner(f"no partner record at k={complex(target)} for k={rec.k}")
        f = np.conj if conj else (lambda z: z)
        worst = max(worst, abs(rec.a_bar - f(other.a)))
        if rec.b_bar is not None:
            if other.b is None:
                raise MissingPartner(f"partner of k={rec.k} lacks b")
            worst = max(worst, abs(rec.b_bar - sign * f(other.b)))
        compared += 1
    if compared == 0:
        raise MissingPartner("grid holds no record with a partner to compare")
    return float(worst)


def stokes_matrices(sd: ScatteringData, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """``S_minus = [[a, bbar], [b, abar]]`` and its inverse ``S_plus``."""
    if any(v is None for v in (sd.a, sd.a_bar, sd.b, sd.b_bar)):
        raise IncompleteData(f"record at k={sd.k} lacks a coefficient (Stokes data need real k)")
    a, ab, b, bb = sd.a, sd.a_bar, sd.b, sd.b_bar
    if abs(a * ab - b * bb - 1) > tol:
        raise ContractViolation(f"a*abar - b*bbar differs from 1 by {abs(a * ab - b * bb - 1):.3g}")
    s_minus = np.array([[a, bb], [b, ab]], dtype=complex)
    s_plus = np.array([[ab, -bb], [-b, a]], dtype=complex)
    return s_minus, s_plus


@dataclass(frozen=True)
class ReflectionlessReport:
    reflectionless: bool
    worst_k: complex | None
    worst_value: float
    tol: float

    def to_json(self) -> dict:
        return {
            "reflectionless": self.reflectionless,
            "worst_k": _opt(self.worst_k),
            "worst_value": self.worst_value,
            "tol": self.tol,
        }


def reflectionless_test(grid: Sequence[ScatteringData], tol: float = 1e-6) -> ReflectionlessReport:
    """True iff max(|b|, |bbar|) < tol over a real-k grid.

    A diagnostic only: a nonzero reflection coefficient rules out the
    reflectionless class, nothing more is inferred.
    """
    worst_k, worst = None, 0.0
    for rec in grid:
        if not isinstance(rec, ScatteringData):
            continue
        if not rec.is_real or rec.b is None or rec.b_bar is None:
            raise ContractViolation(f"reflectionless_test needs real-k records, got k={rec.k}")
        v = max(abs(rec.b), abs(rec.b_bar))
        if worst_k is None or v > worst:
            worst_k, worst = rec.k, v
    if worst_k is None:
        raise ContractViolation("empty grid")
    return ReflectionlessReport(worst < tol, worst_k, float(worst), tol)


# scalar (Schrodinger-type) form ---------------------------------------------


@dataclass(frozen=True)
class SchrodingerForm:
    """Coefficients of ``zeta_xx + (k^2 - i k u1 + u2) zeta = 0``.

    ``u1 = q_x/q``, ``u2 = q_xx/(2q) - 3 q_x^2/(4 q^2) - q r``.  Orders at
    infinity and the degrees m1 (numerator), m2 (denominator) of q are filled
    only for rational potentials; the exact expressions are kept then too.
    """

    u1_eval: Callable = field(repr=False)
    u2_eval: Callable = field(repr=False)
    order_u1_at_infinity: int | None = None
    order_u2_at_infinity: int | None = None
    m1: int | None = None
    m2: int | None = None
    u1_expr: sp.Expr | None = field(default=None, repr=False)
    u2_expr: sp.Expr | None = field(default=None, repr=False)

    def report(self) -> dict:
        return {
            "order_u1_at_infinity": self.order_u1_at_infinity,
            "order_u2_at_infinity": self.order_u2_at_infinity,
            "m1": self.m1,
            "m2": self.m2,
            "u1": None if self.u1_expr is None else str(self.u1_expr),
            "u2": None if self.u2_expr is None else str(self.u2_expr),
        }


def _exact(c: complex) -> sp.Expr:
    c = complex(c)
    return sp.Rational(c.real) + sp.I * sp.Rational(c.imag)


def _order_at_infinity(expr: sp.Expr, x: sp.Symbol) -> int | None:
    num, den = sp.fraction(sp.cancel(sp.together(expr)))
    if num == 0:
        return None
    return int(sp.degree(den, x) - sp.degree(num, x))


def _cauchy_derivs(f: Callable, x: np.ndarray, radius: np.ndarray, n: int = 32):
    """f, f', f'' at each x from an n-point trapezoid rule on circles."""
    theta = 2 * np.pi * np.arange(n) / n
    w = np.exp(1j * theta)
    z = x[:, None] + radius[:, None] * w[None, :]
    vals = f(z.ravel()).reshape(z.shape)
    c = np.fft.fft(vals, axis=1) / n
    return c[:, 0], c[:, 1] / radius, 2 * c[:, 2] / radius ** 2


def schrodinger_form(p: PotentialPair, zero_tol: float = 1e-14) -> SchrodingerForm:
    """Scalar second-order form of the first ZS component.

    Rational constructor records are differentiated exactly with sympy;
    other potentials use Cauchy-integral derivatives on circles clear of
    the known poles.  Evaluators raise :class:`DivisionByZeroPotential` at
    zeros of q.
    """
    if p.rational is not None:
        x = sp.Symbol("x")
        (num, den), (rnum, rden) = p.rational
        poly = lambda c: sum(_exact(v) * x ** i for i, v in enumerate(c))
        q = poly(num) / poly(den)
        r = poly(rnum) / poly(rden)
        if sp.simplify(q) == 0:
            raise DivisionByZeroPotential("q vanishes identically")
        qx, qxx = sp.diff(q, x), sp.diff(q, x, 2)
        u1 = sp.cancel(qx / q)
        u2 = sp.cancel(qxx / (2 * q) - 3 * qx ** 2 / (4 * q ** 2) - q * r)
        qn, qd = sp.fraction(sp.cancel(q))
        m1, m2 = int(sp.degree(qn, x)), int(sp.degree(qd, x))
        q_num = sp.lambdify(x, q, "numpy")
        f1 = sp.lambdify(x, u1, "numpy")
        f2 = sp.lambdify(x, u2, "numpy")

        def guard(fn):
            def ev(xv):
                xv = np.asarray(xv, dtype=complex)
                qv = np.asarray(q_num(xv), dtype=complex)
                if np.any(np.abs(qv) <= zero_tol):
                    raise DivisionByZeroPotential("u1/u2 requested at a zero of q")
                with np.errstate(all="ignore"):
                    return np.asarray(fn(xv), dtype=complex) + 0 * xv
            return ev

        return SchrodingerForm(guard(f1), guard(f2), _order_at_infinity(u1, x), _order_at_infinity(u2, x),
                               m1, m2, u1, u2)

    poles = np.asarray(p.all_poles, dtype=complex)

    def derivs(xv):
        xv = np.atleast_1d(np.asarray(xv, dtype=complex))
        rad = np.full(xv.shape, 0.1)
        if poles.size:
            d = np.min(np.abs(xv[:, None] - poles[None, :]), axis=1)
            rad = np.minimum(rad, 0.5 * d)
        q0, q1, q2 = _cauchy_derivs(p.q_func, xv, rad)
        rv = p.r_eval(xv)
        scale = max(1.0, float(np.max(np.abs(q0))))
        if np.any(np.abs(q0) <= zero_tol * scale):
            raise DivisionByZeroPotential("u1/u2 requested at a zero of q")
        return q0, q1, q2, rv

    def u1(xv):
        q0, q1, _, _ = derivs(xv)
        return q1 / q0

    def u2(xv):
        q0, q1, q2, rv = derivs(xv)
        return q2 / (2 * q0) - 3 * q1 ** 2 / (4 * q0 ** 2) - q0 * rv

    return SchrodingerForm(u1, u2)


# formal series at infinity --------------------------------------------------


class Branch(str, enum.Enum):
    REGULAR = "REGULAR"
    SINGULAR = "SINGULAR"


def _to_exact(v) -> sp.Expr:
    if isinstance(v, sp.Basic):
        return v
    if isinstance(v, (int, np.integer)):
        return sp.Integer(int(v))
    if isinstance(v, (float, complex, np.floating, np.complexfloating)):
        return _exact(complex(v))
    return sp.sympify(v)


def _s(j: int, z: list, q0, q1, q2, q3, r0):
    """Source polynomials of the series recursion.

    The fourth one carries ``-(q1/q0) z2``; this sign follows from
    substituting the series into the Riccati equation.
    """
    if j == 1:
        return -2 * z[0]
    if j == 2:
        return -q1 / q0 * z[0] - z[1] + z[1] ** 2
    if j == 3:
        return (q1 ** 2 / q0 ** 2 - 2 * q2 / q0) * z[0] - q1 / q0 * z[1] + 2 * z[1] * z[2]
    if j == 4:
        return (-(q1 ** 3 / q0 ** 3 - 3 * q1 * q2 / q0 ** 2 + 3 * q3 / q0) * z[0]
                + (q1 ** 2 / q0 ** 2 - 2 * q2 / q0) * z[1]
                - q1 / q0 * z[2] + z[2] ** 2 + z[3] + 2 * z[1] * z[3] - q0 * r0)
    raise UnsupportedOrder(f"no source polynomial for j={j}")


def riccati_formal_series(q_coeffs: Sequence, r0, k, branch: Branch | str = Branch.REGULAR,
                          order: int = 4) -> list[sp.Expr]:
    """Coefficients zeta_0..zeta_order of ``zeta = sum zeta_j y^(j-2)``.

    The series solves the Riccati equation for the log-derivative of the
    first component at x = infinity (y = 1/x), where
    ``q(1/y) = q0 y^2 + q1 y^3 + q2 y^4 + q3 y^5 + ...`` and
    ``r(1/y) = r0 y^2 + ...``.  Arithmetic is exact (sympy); floats are
    converted to their exact binary values.
    """
    order = int(order)
    if order > 4 or order < 0:
        raise UnsupportedOrder(f"series coefficients are available up to order 4, got {order}")
    qs = [_to_exact(v) for v in q_coeffs] + [sp.Integer(0)] * 4
    q0, q1, q2, q3 = qs[:4]
    r0, k = _to_exact(r0), _to_exact(k)
    if q0 == 0:
        raise ContractViolation("q0 must be nonzero")
    if k == 0:
        raise ContractViolation("k must be nonzero")
    z = [sp.Integer(0) if Branch(branch) is Branch.REGULAR else -2 * sp.I * k]
    for j in range(1, order + 1):
        s = _s(j, z, q0, q1, q2, q3, r0)
        z.append(sp.expand(-s / (2 * z[0] + 2 * sp.I * k)))
    return [sp.expand(v) for v in z]


__all__ = [
    "ScatteringData",
    "ScatterFailure",
    "SchrodingerForm",
    "Branch",
    "scatter_at",
    "scatter_grid",
    "check_symmetry_relations",
    "stokes_matrices",
    "reflectionless_test",
    "ReflectionlessReport",
    "schrodinger_form",
    "riccati_formal_series",
    "to_csv",
    "read_csv",
    "CSV_COLUMNS",
]
