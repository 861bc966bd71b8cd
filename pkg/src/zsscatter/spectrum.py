"""Zeros of a(k) in the upper half-plane (abar in the lower) and the data
reconstruction needs at each: multiplicity, a-derivatives, b-derivatives.

Counting uses the argument principle (adaptive phase tracking along the
rectangle boundary); location and multiplicity come from contour integrals
on small circles, where a zero of order nu is recovered as the mean of the
nu roots enclosed, which stays accurate when Newton's method would stall
near a multiple root.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._winding import arg_increment, rectangle_path
from .contour_ode import Contour, integrate_batch
from .discrete import DiscreteEigen
from .errors import BoundaryZero, ClusterUnresolved, ContractViolation, NoConvergence
from .potentials import PotentialPair

log = logging.getLogger(__name__)

DEFAULT_REGION = (-5.0, 5.0, 0.05, 5.0)
NEAR_AXIS = 0.05
MAX_MULTIPLICITY = 4
CIRCLE_POINTS = 32
B_MISMATCH = 1e-6
BOUNDARY_REL = 1e-9


class AFunction:
    """``a(k)`` (or ``abar(k)`` with ``lower``) evaluated by forward integration.

    Values are cached by k, so edges shared between neighbouring cells of a
    subdivision are integrated once.  ``envelopes(ks)`` also returns the
    Jost envelopes at the contour's centre point, which is what the
    b-derivative extraction needs.
    """

    def __init__(self, p: PotentialPair, contour: Contour, lower: bool = False,
                 rtol: float = 1e-10, atol: float = 1e-12):
        self.p, self.contour, self.lower = p, contour, lower
        self.rtol, self.atol = rtol, atol
        self._cache: dict[complex, complex] = {}
        self.evaluations = 0

    def _check(self, ks: np.ndarray) -> None:
        bad = ks.imag >= 0 if self.lower else ks.imag <= 0
        if np.any(bad):
            side = "lower" if self.lower else "upper"
            raise ContractViolation(f"evaluation outside the open {side} half-plane")

    def envelopes(self, ks) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(coefficient, left envelope, right envelope) at xi = 0 for each k.

        Upper: (a, M, N); lower: (abar, Mbar, Nbar).
        """
        ks = np.atleast_1d(np.asarray(ks, dtype=complex))
        self._check(ks)
        left, right = ("PHI_BAR", "PSI_BAR") if self.lower else ("PHI", "PSI")
        sl = integrate_batch(self.p, ks, self.contour, left, [0.0], True, self.rtol, self.atol)
        sr = integrate_batch(self.p, ks, self.contour, right, [0.0], True, self.rtol, self.atol)
        L = np.array([s.at(0.0) for s in sl])
        R = np.array([s.at(0.0) for s in sr])
        if self.lower:
            coef = R[:, 0] * L[:, 1] - R[:, 1] * L[:, 0]   # det(Nbar, Mbar)
        else:
            coef = L[:, 0] * R[:, 1] - L[:, 1] * R[:, 0]   # det(M, N)
        self.evaluations += ks.size
        return coef, L, R

    def __call__(self, ks):
        ks = np.asarray(ks, dtype=complex)
        flat = ks.ravel()
        missing = [k for k in dict.fromkeys(complex(v) for v in flat) if k not in self._cache]
        if missing:
            # batches of similar modulus share step sizes best
            missing.sort(key=abs)
            for i in range(0, len(missing), 256):
                chunk = missing[i:i + 256]
                vals, _, _ = self.envelopes(chunk)
                self._cache.update(zip(chunk, (complex(v) for v in vals)))
        return np.array([self._cache[complex(v)] for v in flat], dtype=complex).reshape(ks.shape)


def _winding(a_fn: Callable, rect: Sequence[float]) -> int:
    re0, re1, im0, im1 = map(float, rect)
    if not (re1 > re0 and im1 > im0):
        raise ContractViolation(f"degenerate rectangle {rect}")
    with np.errstate(all="ignore"):
        try:
            wind, vmin, scale = arg_increment(a_fn, rectangle_path(re0, re1, im0, im1), n0=64)
        except FloatingPointError as exc:
            raise BoundaryZero(f"non-finite values on the boundary of {rect}") from exc
    if vmin <= BOUNDARY_REL * max(scale, 1e-300):
        raise BoundaryZero(f"|a| drops to {vmin:.3g} on the boundary of {rect}")
    n = round(wind)
    if abs(wind - n) > 1e-3:
        raise BoundaryZero(f"winding {wind:.6f} is not an integer on {rect}")
    return int(n)


def count_zeros(a_fn: Callable, rect: Sequence[float]) -> int:
    """Number of zeros (with multiplicity) of ``a_fn`` inside ``(re0, re1, im0, im1)``."""
    return _winding(a_fn, rect)


def _circle(center: complex, radius: float, n: int = CIRCLE_POINTS) -> np.ndarray:
    return center + radius * np.exp(2j * np.pi * np.arange(n) / n)


def _taylor(vals: np.ndarray, radius: float) -> np.ndarray:
    """Taylor coefficients at the circle centre from samples on the circle."""
    n = vals.shape[0]
    c = np.fft.fft(vals, axis=0) / n
    return c / radius ** np.arange(n).reshape((-1,) + (1,) * (vals.ndim - 1))


def _circle_moments(vals: np.ndarray, center: complex, radius: float) -> tuple[float, complex]:
    """Zero count and zero sum inside the circle from samples of an analytic f.

    f' on the circle comes from differentiating the trigonometric
    interpolant, so no further evaluations are needed.
    """
    n = vals.size
    w = np.exp(2j * np.pi * np.arange(n) / n)
    c = np.fft.fft(vals) / n
    m = np.fft.fftfreq(n, 1.0 / n)
    c[np.abs(m) == n // 2] = 0.0
    logd = np.fft.ifft(c * 1j * m) * n / vals     # (df/dtheta) / f
    count = np.mean(logd) / 1j
    ksum = np.mean((center + radius * w) * logd) / 1j
    return complex(count).real, complex(ksum)


def refine_zero(a_fn: Callable, k0: complex, tol: float = 1e-10, max_iter: int = 60,
                radius: float | None = None) -> complex:
    """Zero of ``a_fn`` near ``k0``.

    Newton steps use the derivative from a Cauchy integral on a circle of
    ``radius`` (default ``min(0.1, |Im k0|/2)``).  Once the circle encloses
    the zero, its location is taken as the zero-sum over the zero-count of
    the enclosed set, re-centred until it moves by less than ``tol``.
    """
    k = complex(k0)
    rho = radius if radius is not None else min(0.1, 0.5 * abs(k.imag)) or 0.1
    for _ in range(max_iter):
        vals = np.asarray(a_fn(_circle(k, rho)), dtype=complex)
        if not np.all(np.isfinite(vals)) or np.any(vals == 0):
            raise NoConvergence(f"a is not finite or vanishes on the circle around {k}")
        count, ksum = _circle_moments(vals, k, rho)
        m = round(count)
        if m >= 1 and abs(count - m) < 1e-6:
            new = ksum / m
            step = abs(new - k)
            k = new
            if step < tol:
                f = complex(np.asarray(a_fn(np.array([k])))[0])
                scale = float(np.max(np.abs(vals)))
                if abs(f) <= max(tol, 1e-8) * scale:
                    return k
            continue
        coef = _taylor(vals, rho)
        f0, f1 = coef[0], coef[1]
        if not np.isfinite(f1) or abs(f1) <= 1e-13 * max(abs(f0), 1e-300):
            raise NoConvergence(f"derivative vanishes near {k}; no zero to converge to")
        step = -f0 / f1
        if abs(step) > 4 * rho:
            step *= 4 * rho / abs(step)
        k = k + step
        if abs(step) < tol and abs(f0) < tol:
            return k
    raise NoConvergence(f"no convergence from k0={k0} after {max_iter} iterations")


def _split(rect, axis: int, attempt: int):
    re0, re1, im0, im1 = rect
    # off-centre split so symmetric spectra (k = i on Re k = 0) avoid the cut
    frac = (0.5 + 0.0731, 0.5 - 0.1173, 0.5 + 0.2017, 0.5 - 0.2311)[attempt]
    if axis == 0:
        m = re0 + frac * (re1 - re0)
        return (re0, m, im0, im1), (m, re1, im0, im1)
    m = im0 + frac * (im1 - im0)
    return (re0, re1, im0, m), (re0, re1, m, im1)


def _coincident(a_fn, rect, count: int) -> bool:
    """Whether all ``count`` zeros in ``rect`` sit at one point.

    The zero centroid is found on the circumscribed circle; a zero of order
    ``count`` there has vanishing lower Taylor coefficients.
    """
    centre = complex(0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3]))
    half = 0.5 * math.hypot(rect[1] - rect[0], rect[3] - rect[2])
    rho = 1.05 * half
    if rho >= 0.95 * abs(centre.imag):
        return False
    n, ksum = _circle_moments(np.asarray(a_fn(_circle(centre, rho))), centre, rho)
    if round(n) != count or abs(n - count) > 1e-6:
        return False
    z = ksum / count
    r = min(0.5 * half, 0.25 * abs(z.imag))
    c = np.abs(_taylor(np.asarray(a_fn(_circle(z, r))), r)) * r ** np.arange(CIRCLE_POINTS)
    return bool(np.all(c[:count] <= 1e-7 * c[count]))


def _leaves(a_fn, rect, count: int, min_size: float, out: list) -> None:
    if count == 0:
        return
    w, h = rect[1] - rect[0], rect[3] - rect[2]
    if count == 1 or max(w, h) <= min_size or _coincident(a_fn, rect, count):
        out.append((rect, count))
        return
    axis = 0 if w >= h else 1
    for attempt in range(4):
        a, b = _split(rect, axis, attempt)
        try:
            ca = _winding(a_fn, a)
            cb = count - ca if ca <= count else None
            if cb is None or cb < 0:
                raise BoundaryZero("inconsistent child counts")
            if cb:
                cb_check = _winding(a_fn, b)
                if cb_check != cb:
                    raise BoundaryZero("inconsistent child counts")
            break
        except BoundaryZero:
            continue
    else:
        raise ClusterUnresolved(f"cannot split cell {rect} without cutting through a zero")
    _leaves(a_fn, a, ca, min_size, out)
    _leaves(a_fn, b, cb, min_size, out)


@dataclass(frozen=True)
class _Zero:
    k: complex
    nu: int


def _cauchy_radius(k: complex, others: Sequence[complex]) -> float:
    rad = 0.25 * abs(k.imag)
    if others:
        rad = min(rad, 0.5 * min(abs(k - o) for o in others))
    return rad


def _eigen_data(af: AFunction, z: _Zero, others: Sequence[complex], flags: list[str]) -> DiscreteEigen:
    nu = z.nu
    rho = _cauchy_radius(z.k, others)
    ks = _circle(z.k, rho)
    coef, Lenv, Renv = af.envelopes(ks)
    ca = _taylor(coef, rho)
    fact = [math.factorial(m) for m in range(2 * nu)]
    a_der = tuple(complex(fact[m] * ca[m]) for m in range(nu, 2 * nu))
    lead = abs(a_der[0])
    low = max((fact[m] * abs(ca[m]) for m in range(nu)), default=0.0)
    if low > 1e-6 * lead:
        msg = f"derivatives below order {nu} do not vanish at {z.k} ({low:.2g} vs {lead:.2g})"
        if nu > 1:
            raise ClusterUnresolved(msg)
        flags.append("DerivativeMismatch")
        log.warning(msg)
    # raw Jost solutions at x = gamma(0) carry phases analytic in k
    x0 = af.contour.gamma(0.0)
    sign = -1 if af.lower else 1
    left = Lenv * np.exp(-sign * 1j * ks * x0)[:, None]     # phi (phibar)
    right = Renv * np.exp(sign * 1j * ks * x0)[:, None]     # psi (psibar)
    f = _taylor(left, rho)
    g = _taylor(right, rho)

    def solve(c: int) -> np.ndarray:
        beta = np.zeros(nu, dtype=complex)
        for p in range(nu):
            acc = f[p, c] - sum(beta[r] * g[p - r, c] for r in range(p))
            beta[p] = acc / g[0, c]
        return beta

    dom = int(np.argmax(np.abs(g[0])))
    beta = solve(dom)
    if abs(g[0, 1 - dom]) > 1e-3 * abs(g[0, dom]):
        alt = solve(1 - dom)
        if np.max(np.abs(alt - beta)) > B_MISMATCH * max(1.0, float(np.max(np.abs(beta)))):
            flags.append("BRatioMismatch")
            log.warning("b-data from the two components disagree at %s", z.k)
    b_der = tuple(complex(fact[r] * beta[r]) for r in range(nu))
    if abs(z.k.imag) < NEAR_AXIS:
        flags.append("NearRealAxis")
        log.warning("eigenvalue %s lies within %g of the real axis", z.k, NEAR_AXIS)
    return DiscreteEigen(z.k, nu, a_der, b_der, tuple(flags))


def extract_discrete_data(p: PotentialPair, contour: Contour, region: Sequence[float] = DEFAULT_REGION,
                          lower: bool = False, tol: float = 1e-10, min_size: float = 0.05,
                          a_fn: AFunction | None = None) -> list[DiscreteEigen]:
    """Discrete spectrum inside ``region = (re0, re1, im0, im1)``, im0 > 0.

    With ``lower`` the mirrored rectangle in the lower half-plane is searched
    for zeros of abar and the b-data are those of bbar.
    """
    re0, re1, im0, im1 = map(float, region)
    if im0 <= 0 or im1 <= im0 or re1 <= re0:
        raise ContractViolation("region must be (re0, re1, im0, im1) with 0 < im0 < im1")
    rect = (re0, re1, -im1, -im0) if lower else (re0, re1, im0, im1)
    af = a_fn if a_fn is not None else AFunction(p, contour, lower)
    total = _winding(af, rect)
    if total == 0:
        return []
    leaves: list = []
    _leaves(af, rect, total, min_size, leaves)
    zeros: list[_Zero] = []
    for cell, count in leaves:
        if count > MAX_MULTIPLICITY:
            raise ClusterUnresolved(f"{count} zeros in {cell} exceed the multiplicity cap {MAX_MULTIPLICITY}")
        centre = complex(0.5 * (cell[0] + cell[1]), 0.5 * (cell[2] + cell[3]))
        half = 0.5 * math.hypot(cell[1] - cell[0], cell[3] - cell[2])
        rho = min(1.05 * half, 0.9 * abs(centre.imag))
        n, ksum = _circle_moments(af(_circle(centre, rho)), centre, rho)
        start = ksum / count if round(n) == count else centre
        k = refine_zero(af, start, tol, radius=min(0.1, 0.5 * abs(start.imag), half))
        zeros.append(_Zero(k, count))
    zeros.sort(key=lambda z: (z.k.real, z.k.imag))
    if sum(z.nu for z in zeros) != total:
        raise ClusterUnresolved("leaf multiplicities do not add up to the region count")
    out = []
    for z in zeros:
        others = [w.k for w in zeros if w is not z]
        out.append(_eigen_data(af, z, others, []))
    return out


__all__ = [
    "AFunction",
    "count_zeros",
    "refine_zero",
    "extract_discrete_data",
    "DEFAULT_REGION",
]
