"""Reflectionless inverse scattering from discrete spectral data.

The envelope ``Nbar(x; k)`` equals ``e1`` plus the residues of
``M(x; kappa) / ((k - kappa) a(kappa))`` at the zeros of ``a``; ``N`` is the
mirror statement around the zeros of ``abar``.  Near a zero of order ``nu``
the Taylor data of ``M`` coincide with those of ``b(k) N(x; k) exp(2ikx)``, so
every residue is a finite sum of terms

    coefficient(x) * (k - pole)**(-m) * N_j^t(x),   1 <= m <= nu,

with ``coefficient(x)`` a polynomial in ``x`` times ``exp(+-2 i pole x)``.
Differentiating in ``k`` and evaluating at the opposite poles closes a linear
system for the unknowns ``N_j^t = d^t N / dk^t (k_j)`` and their barred
counterparts.  Residues are taken by exact series division, so no contour
radius ever enters the computation.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .discrete import DiscreteEigen, ReconstructionInput
from .errors import (
    InsufficientDerivatives,
    NotReflectionless,
    PoleCollision,
    SingularSystem,
)

log = logging.getLogger(__name__)

E1 = np.array([1.0 + 0j, 0.0 + 0j])
E2 = np.array([0.0 + 0j, 1.0 + 0j])

#: condition number above which the per-x system is declared singular
SINGULAR_CONDITION = 1e12


def _series_reciprocal(coeffs: Sequence[Any], order: int) -> list:
    """Coefficients of ``1 / sum(coeffs[m] eps**m)`` up to ``eps**(order-1)``."""
    beta = [1 / coeffs[0]]
    for n in range(1, order):
        acc = 0
        for m in range(1, n + 1):
            if m < len(coeffs):
                acc = acc + coeffs[m] * beta[n - m]
        beta.append(-acc / coeffs[0])
    return beta


@dataclass(frozen=True)
class ResidueExpansion:
    """Residue of one pole, linear in the unknowns ``N_j^t``.

    ``coeffs[(t, m)]`` is the list of coefficients (ascending powers of ``x``)
    of the polynomial multiplying ``exp(rate * x) * (k - pole)**(-m) * N_j^t``.
    """

    pole: Any
    multiplicity: int
    rate: Any
    coeffs: dict = field(default_factory=dict)

    def evaluate(self, x) -> np.ndarray:
        """Numeric coefficients at ``x``: array of shape ``x.shape + (nu, nu)``.

        Entry ``[..., t, m - 1]`` multiplies ``N_j^t (k - pole)**(-m)``.
        """
        x = np.asarray(x, dtype=complex)
        nu = self.multiplicity
        out = np.zeros(x.shape + (nu, nu), dtype=complex)
        ex = np.exp(complex(self.rate) * x)
        for (t, m), poly in self.coeffs.items():
            val = np.zeros(x.shape, dtype=complex)
            for c in reversed(poly):
                val = val * x + complex(c)
            out[..., t, m - 1] = val * ex
        return out

    def symbolic(self, x, exp, unknowns, k):
        """Sum the expansion with caller-supplied symbols (sympy use)."""
        total = 0
        for (t, m), poly in self.coeffs.items():
            p = sum(c * x**u for u, c in enumerate(poly))
            total += p * exp(self.rate * x) * unknowns[t] / (k - self.pole) ** m
        return total


def residue_terms(eigen: DiscreteEigen, lower: bool = False, imag: Any = 1j) -> ResidueExpansion:
    """Residue of ``F(kappa) / ((k - kappa) a(kappa))`` at ``kappa = pole``.

    ``F = b(kappa) N(x; kappa) exp(+-2 i kappa x)`` is expanded to order
    ``nu - 1`` and ``a`` to order ``2 nu - 1``; ``lower`` selects the barred
    problem (sign of the exponent flips).  Arithmetic is generic, so exact
    inputs (sympy numbers, with ``imag=sympy.I``) give exact coefficients.
    """
    nu = int(eigen.multiplicity)
    if len(eigen.a_derivatives) < nu or len(eigen.b_derivatives) < nu:
        raise InsufficientDerivatives(
            f"multiplicity {nu} needs a-derivatives of orders {nu}..{2 * nu - 1} "
            f"and b-derivatives of orders 0..{nu - 1}"
        )
    if nu >= 3:
        log.warning("multiplicity %d: generic residue path without reference data", nu)
    sign = -1 if lower else 1
    two_i = sign * 2 * imag
    # a(k_j + eps) = eps**nu * sum(alpha[m] eps**m)
    alpha = [eigen.a_derivatives[m] / math.factorial(nu + m) for m in range(nu)]
    beta = _series_reciprocal(alpha, nu)
    btay = [eigen.b_derivatives[r] / math.factorial(r) for r in range(nu)]

    coeffs: dict = {}
    for t in range(nu):
        for s in range(nu):
            m = s + 1
            poly = [0] * nu
            # eps**(nu-1) coefficient: p + m' + s = nu - 1, with F_p built
            # from b_r * N^t / t! * (two_i x)**u / u!, r + t + u = p
            for p in range(t, nu - s):
                mp = nu - 1 - p - s
                for u in range(p - t + 1):
                    r = p - t - u
                    term = beta[mp] * btay[r] * two_i**u / (math.factorial(u) * math.factorial(t))
                    poly[u] = poly[u] + term
            while len(poly) > 1 and _is_zero(poly[-1]):
                poly.pop()
            if not all(_is_zero(c) for c in poly):
                coeffs[(t, m)] = poly
    return ResidueExpansion(pole=eigen.location, multiplicity=nu, rate=two_i * eigen.location, coeffs=coeffs)


def _is_zero(c) -> bool:
    try:
        return c == 0
    except TypeError:
        return False


def _rising(m: int, r: int) -> int:
    out = 1
    for i in range(r):
        out *= m + i
    return out


@dataclass(frozen=True)
class _Layout:
    upper: tuple[ResidueExpansion, ...]
    lower: tuple[ResidueExpansion, ...]
    offsets_up: tuple[int, ...]
    offsets_lo: tuple[int, ...]
    size: int


@functools.lru_cache(maxsize=64)
def _layout(data: ReconstructionInput) -> _Layout:
    data.validate()
    up = tuple(residue_terms(e) for e in data.upper)
    lo = tuple(residue_terms(e, lower=True) for e in data.lower)
    offs_up, offs_lo, n = [], [], 0
    for e in data.upper:
        offs_up.append(n)
        n += e.multiplicity
    for e in data.lower:
        offs_lo.append(n)
        n += e.multiplicity
    return _Layout(up, lo, tuple(offs_up), tuple(offs_lo), n)


def assemble_linear_system(data: ReconstructionInput, x) -> tuple[np.ndarray, np.ndarray]:
    """System ``A U = B`` for the unknown envelope derivatives at ``x``.

    Unknown rows are ordered: for each upper eigen ``j`` the vectors
    ``N_j^0 .. N_j^{nu-1}``, then for each lower eigen the ``Nbar_j^r``.
    ``A`` has shape ``x.shape + (n, n)`` and ``B`` shape ``x.shape + (n, 2)``;
    each unknown is a two-component vector and ``A`` acts identically on both
    components.
    """
    lay = _layout(data)
    return _assemble(data, lay, np.asarray(x, dtype=complex))


def _assemble(data: ReconstructionInput, lay: _Layout, x: np.ndarray):
    n = lay.size
    A = np.zeros(x.shape + (n, n), dtype=complex)
    B = np.zeros(x.shape + (n, 2), dtype=complex)
    idx = np.arange(n)
    A[..., idx, idx] = 1.0
    cup = [r.evaluate(x) for r in lay.upper]
    clo = [r.evaluate(x) for r in lay.lower]

    # Nbar equations at the lower poles, fed by the upper residues
    for l, el in enumerate(data.lower):
        for rr in range(el.multiplicity):
            row = lay.offsets_lo[l] + rr
            if rr == 0:
                B[..., row, :] = E1
            for j, ej in enumerate(data.upper):
                d = complex(el.location) - complex(ej.location)
                for t in range(ej.multiplicity):
                    col = lay.offsets_up[j] + t
                    for m in range(1, ej.multiplicity + 1):
                        f = (-1) ** rr * _rising(m, rr) * d ** (-m - rr)
                        A[..., row, col] -= cup[j][..., t, m - 1] * f
    # N equations at the upper poles, fed by the lower residues
    for l, el in enumerate(data.upper):
        for rr in range(el.multiplicity):
            row = lay.offsets_up[l] + rr
            if rr == 0:
                B[..., row, :] = E2
            for j, ej in enumerate(data.lower):
                d = complex(el.location) - complex(ej.location)
                for t in range(ej.multiplicity):
                    col = lay.offsets_lo[j] + t
                    for m in range(1, ej.multiplicity + 1):
                        f = (-1) ** rr * _rising(m, rr) * d ** (-m - rr)
                        A[..., row, col] -= clo[j][..., t, m - 1] * f
    return A, B


@dataclass
class Reconstruction:
    """Solved system on a set of ``x`` values.

    ``unknowns`` has shape ``x.shape + (n, 2)``; ``condition`` holds the
    2-norm condition number of each per-x matrix.
    """

    data: ReconstructionInput
    x: np.ndarray
    unknowns: np.ndarray
    condition: np.ndarray
    _lay: _Layout = field(repr=False)

    def _coeff_tables(self):
        cup = [r.evaluate(self.x) for r in self._lay.upper]
        clo = [r.evaluate(self.x) for r in self._lay.lower]
        return cup, clo

    def envelopes(self, k: complex) -> tuple[np.ndarray, np.ndarray]:
        """``(N(x; k), Nbar(x; k))``, each of shape ``x.shape + (2,)``."""
        k = complex(k)
        for e in self.data.upper + self.data.lower:
            if abs(k - complex(e.location)) < 1e-12:
                raise PoleCollision(f"k = {k} coincides with a discrete eigenvalue")
        cup, clo = self._coeff_tables()
        N = np.broadcast_to(E2, self.x.shape + (2,)).copy()
        Nb = np.broadcast_to(E1, self.x.shape + (2,)).copy()
        for j, e in enumerate(self.data.lower):
            for t in range(e.multiplicity):
                u = self.unknowns[..., self._lay.offsets_lo[j] + t, :]
                for m in range(1, e.multiplicity + 1):
                    w = clo[j][..., t, m - 1] / (k - complex(e.location)) ** m
                    N += w[..., None] * u
        for j, e in enumerate(self.data.upper):
            for t in range(e.multiplicity):
                u = self.unknowns[..., self._lay.offsets_up[j] + t, :]
                for m in range(1, e.multiplicity + 1):
                    w = cup[j][..., t, m - 1] / (k - complex(e.location)) ** m
                    Nb += w[..., None] * u
        return N, Nb

    def potentials(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact large-k limits: ``q = 2i lim k N_1`` and ``r = -2i lim k Nbar_2``.

        Only the simple-pole (m = 1) coefficients survive the limit.
        """
        cup, clo = self._coeff_tables()
        q = np.zeros(self.x.shape, dtype=complex)
        r = np.zeros(self.x.shape, dtype=complex)
        for j, e in enumerate(self.data.lower):
            for t in range(e.multiplicity):
                u = self.unknowns[..., self._lay.offsets_lo[j] + t, 0]
                q += clo[j][..., t, 0] * u
        for j, e in enumerate(self.data.upper):
            for t in range(e.multiplicity):
                u = self.unknowns[..., self._lay.offsets_up[j] + t, 1]
                r += cup[j][..., t, 0] * u
        return 2j * q, -2j * r

    def unknown(self, which: str, j: int, t: int) -> np.ndarray:
        """``N_j^t`` (``which='N'``) or ``Nbar_j^t`` (``which='Nbar'``)."""
        off = self._lay.offsets_up if which == "N" else self._lay.offsets_lo
        return self.unknowns[..., off[j] + t, :]


def solve_system(data: ReconstructionInput, x, strict: bool = True,
                 condition: bool = True) -> Reconstruction:
    """Solve the residue system at every ``x``.

    With ``strict`` a :class:`SingularSystem` is raised at the first ``x``
    whose condition number exceeds the threshold; otherwise such entries
    are filled with NaN and left for the caller to report.  ``condition=False``
    skips the condition estimate (hot loops); only exact singularity is
    then detected.
    """
    lay = _layout(data)
    x = np.asarray(x, dtype=complex)
    n = lay.size
    if n == 0:
        return Reconstruction(data, x, np.zeros(x.shape + (0, 2), complex), np.ones(x.shape), lay)
    A, B = _assemble(data, lay, x)
    # row/column equilibration: the exponential weights span many decades
    rs = 1.0 / np.max(np.abs(A), axis=-1)
    A = A * rs[..., :, None]
    B = B * rs[..., :, None]
    cs = 1.0 / np.max(np.abs(A), axis=-2)
    A = A * cs[..., None, :]
    if condition:
        cond = np.linalg.cond(A)
    else:
        cond = np.where(np.all(np.isfinite(A), axis=(-2, -1)), 1.0, np.inf)
    bad = ~np.isfinite(cond) | (cond > SINGULAR_CONDITION)
    if strict and np.any(bad):
        i = np.flatnonzero(bad.ravel())[0]
        xb = x.ravel()[i]
        raise SingularSystem(
            f"residue system singular at x = {xb:.6g} (condition {cond.ravel()[i]:.3g})",
            condition=float(cond.ravel()[i]),
            x=xb,
        )
    Asafe = np.where(bad[..., None, None], np.eye(n), A)
    try:
        U = np.linalg.solve(Asafe, B) * cs[..., :, None]
    except np.linalg.LinAlgError:
        if strict:
            raise SingularSystem("residue system exactly singular")
        U = np.full(B.shape, np.nan, dtype=complex)
    U[bad] = np.nan
    return Reconstruction(data, x, U, cond, lay)


def system_determinant(data: ReconstructionInput, x) -> np.ndarray:
    """Determinant of the residue system; its zeros are the potential's poles."""
    lay = _layout(data)
    x = np.asarray(x, dtype=complex)
    if lay.size == 0:
        return np.ones(x.shape, dtype=complex)
    A, _ = _assemble(data, lay, x)
    return np.linalg.det(A)


def solve_jost(data: ReconstructionInput, x, k: complex) -> dict:
    """Envelopes and Jost solutions ``psi = N e^{ikx}``, ``psibar = Nbar e^{-ikx}``."""
    rec = solve_system(data, x)
    N, Nb = rec.envelopes(k)
    ph = np.exp(1j * complex(k) * rec.x)[..., None]
    return {"N": N, "Nbar": Nb, "psi": N * ph, "psibar": Nb / ph}


@dataclass
class PotentialSamples:
    x: np.ndarray
    q: np.ndarray
    r: np.ndarray
    condition: np.ndarray
    pole_candidates: list[float]
    coefficient_table: dict

    def rows(self):
        for xv, qv, rv in zip(self.x, self.q, self.r):
            yield xv, qv, rv


def coefficient_table(data: ReconstructionInput) -> dict:
    """Closed-form ingredients of ``q`` and ``r`` (polynomial x exponential terms).

    Keys name the eigen and derivative index; values hold the exponential rate
    and polynomial coefficients (ascending in x) of the simple-pole term, which
    multiply the solved unknowns in ``q = 2i * sum`` (``r = -2i * sum``).
    """
    lay = _layout(data)
    table: dict = {"q": [], "r": []}
    for res, key, comp in ((lay.lower, "q", 0), (lay.upper, "r", 1)):
        for j, ex in enumerate(res):
            for (t, m), poly in sorted(ex.coeffs.items()):
                if m != 1:
                    continue
                table[key].append(
                    {
                        "eigen": j,
                        "derivative": t,
                        "component": comp,
                        "rate": [complex(ex.rate).real, complex(ex.rate).imag],
                        "poly": [[complex(c).real, complex(c).imag] for c in poly],
                    }
                )
    return table


def recover_potentials(data: ReconstructionInput, xs) -> PotentialSamples:
    """Sample the recovered ``q``, ``r``; singular ``x`` are reported as pole candidates."""
    xs = np.asarray(xs, dtype=float)
    rec = solve_system(data, xs, strict=False)
    q, r = rec.potentials()
    bad = ~np.isfinite(q) | ~np.isfinite(r)
    poles = [float(v) for v in xs[bad]]
    return PotentialSamples(xs, q, r, rec.condition, poles, coefficient_table(data))


def large_k_check(data: ReconstructionInput, x, ks: Sequence[float] = (1e3, 1e4, 1e5)) -> tuple[np.ndarray, np.ndarray]:
    """Richardson-extrapolated ``2i k N_1`` and ``-2i k Nbar_2`` at large ``|k|``.

    ``k N_1(k) = A + B/k + C/k**2 + ...``; the three samples are fitted
    exactly in powers of ``1/k`` and the constant term is returned.
    """
    rec = solve_system(data, x)
    ks = np.asarray(ks, dtype=float)
    V = np.vander(1.0 / ks, len(ks), increasing=True)
    w = np.linalg.inv(V)[0]
    out = []
    for comp, fac in ((0, 2j), (1, -2j)):
        acc = 0
        for wi, kk in zip(w, ks):
            N, Nb = rec.envelopes(kk)
            env = N if comp == 0 else Nb
            acc = acc + wi * kk * env[..., comp]
        out.append(fac * acc)
    return out[0], out[1]


def zs_residual(data: ReconstructionInput, x: float, k: complex, h: float = 1e-3) -> float:
    """Max ZS residual of ``psi`` and ``psibar`` at ``x``, by 6th-order central differences.

    Residual of ``w' - [[-ik, q], [r, ik]] w`` relative to ``max(1, |w|, |w'|)``.
    """
    offs = np.array([-3, -2, -1, 1, 2, 3]) * h
    wts = np.array([-1, 9, -45, 45, -9, 1]) / (60 * h)
    pts = np.concatenate([[x], x + offs])
    rec = solve_system(data, pts)
    N, Nb = rec.envelopes(k)
    q, r = rec.potentials()
    kk = complex(k)
    worst = 0.0
    for env, sgn in ((N, 1), (Nb, -1)):
        w = env * np.exp(sgn * 1j * kk * pts)[:, None]
        dw = wts @ w[1:]
        w0 = w[0]
        lhs = np.array([-1j * kk * w0[0] + q[0] * w0[1], r[0] * w0[0] + 1j * kk * w0[1]])
        scale = max(1.0, np.max(np.abs(w0)), np.max(np.abs(dw)))
        worst = max(worst, float(np.max(np.abs(dw - lhs)) / scale))
    return worst


def jost_wronskian(data: ReconstructionInput, x, k: complex) -> np.ndarray:
    """``det(psibar, psi) = det(Nbar, N)``; equals one for a genuine Jost pair."""
    rec = solve_system(data, x)
    N, Nb = rec.envelopes(k)
    return Nb[..., 0] * N[..., 1] - Nb[..., 1] * N[..., 0]


@dataclass
class RoundtripReport:
    """Outcome of potential -> discrete data -> potential -> scattering data."""

    data: ReconstructionInput
    max_potential_deviation: float
    max_a_deviation: float
    max_b_reconstructed: float
    sample_x: np.ndarray = field(repr=False)
    reflection_check: Any = None

    def to_json(self) -> dict:
        return {
            "discrete_data": self.data.to_json(),
            "max_potential_deviation": self.max_potential_deviation,
            "max_a_deviation": self.max_a_deviation,
            "max_b_reconstructed": self.max_b_reconstructed,
            "reflectionless_check": None if self.reflection_check is None else self.reflection_check.to_json(),
        }


def roundtrip(p, contour, region=(-5.0, 5.0, 0.05, 5.0), ks: Sequence[float] = (0.5, 1.0, 2.0),
              tol: float = 1e-4, xs=None) -> RoundtripReport:
    """Extract the discrete data of ``p``, rebuild the potentials, compare.

    The potential deviation is ``max |q_rec - q| / max(1, |q|)`` (same for r)
    on ``xs`` (default: 201 points in [-5, 5] kept 0.05 away from real
    poles of either potential).  The scattering deviation compares ``a`` of
    the rebuilt pair with ``a`` of ``p`` on ``ks`` using the same contour
    policy.
    """
    from .contour_ode import build_contour
    from .potentials import make_potential
    from .scattering import ScatteringData, reflectionless_test, scatter_grid
    from .spectrum import extract_discrete_data

    grid = scatter_grid(p, ks, contour)
    if not all(isinstance(g, ScatteringData) for g in grid):
        bad = [g for g in grid if not isinstance(g, ScatteringData)]
        raise NotReflectionless(f"forward scattering failed at k={bad[0].k}: {bad[0].message}")
    check = reflectionless_test(grid, tol)
    if not check.reflectionless:
        raise NotReflectionless(
            f"max(|b|, |bbar|) = {check.worst_value:.3g} at k={check.worst_k} exceeds {tol:g}"
        )
    upper = extract_discrete_data(p, contour, region)
    lower = extract_discrete_data(p, contour, region, lower=True)
    data = ReconstructionInput(tuple(upper), tuple(lower))

    if xs is None:
        xs = np.linspace(-5.0, 5.0, 201)
    xs = np.asarray(xs, dtype=float)
    det = np.abs(system_determinant(data, xs))
    keep = np.ones(xs.shape, dtype=bool)
    for pole in p.real_poles:
        keep &= np.abs(xs - pole) > 0.05
    # drop points near sign changes / dips of the system determinant
    keep &= det > 1e-6 * max(1.0, float(np.median(det)))
    xs = xs[keep]
    rec = solve_system(data, xs, strict=False)
    q_rec, r_rec = rec.potentials()
    q0, r0 = p.q_eval(xs), p.r_eval(xs)
    dev = max(
        float(np.nanmax(np.abs(q_rec - q0) / np.maximum(1.0, np.abs(q0)))) if xs.size else 0.0,
        float(np.nanmax(np.abs(r_rec - r0) / np.maximum(1.0, np.abs(r0)))) if xs.size else 0.0,
    )

    rebuilt = make_potential({"kind": "reconstructed", "params": {"data": data.to_json()}})
    c2 = build_contour(rebuilt, contour.elevation, contour.half_length, contour.margin)
    grid2 = scatter_grid(rebuilt, ks, c2)
    a_dev, b_max = 0.0, 0.0
    for g0, g1 in zip(grid, grid2):
        if not isinstance(g1, ScatteringData):
            a_dev = b_max = float("inf")
            break
        a_dev = max(a_dev, abs(g1.a - g0.a), abs(g1.a_bar - g0.a_bar))
        b_max = max(b_max, abs(g1.b), abs(g1.b_bar))
    return RoundtripReport(data, dev, float(a_dev), float(b_max), xs, check)


def printed_example31_q(x):
    """The closed form printed alongside the double-pole example (kept for comparison)."""
    x = np.asarray(x, dtype=complex)
    d = np.exp(8 * x) - 2 * (8 * x**2 + 8 * x + 3) * np.exp(4 * x) + 1
    return 32 * np.exp(2 * x) * (4 * x * np.exp(4 * x) + x + 1) / d


def limit_of_printed_N_q(x):
    """``2i lim k N_1`` applied to the printed ``N(x; k)`` of the same example."""
    x = np.asarray(x, dtype=complex)
    d = np.exp(8 * x) - 2 * (8 * x**2 + 8 * x + 3) * np.exp(4 * x) + 1
    return -16 * np.exp(2 * x) * (x * np.exp(4 * x) + x + 1) / d


__all__ = [
    "ResidueExpansion",
    "residue_terms",
    "assemble_linear_system",
    "solve_system",
    "solve_jost",
    "recover_potentials",
    "large_k_check",
    "zs_residual",
    "jost_wronskian",
    "system_determinant",
    "coefficient_table",
    "Reconstruction",
    "PotentialSamples",
    "NotReflectionless",
    "RoundtripReport",
    "roundtrip",
    "printed_example31_q",
    "limit_of_printed_N_q",
]
