"""Pole-avoiding contours and Jost solutions of the ZS system along them.

The ZS system ``w_x = [[-ik, q], [r, ik]] w`` is integrated along
``gamma(xi) = xi + i c sech(xi)``, ``xi`` in ``[-L, L]``.  The default path
works with phase-free envelopes

    M = phi e^{ikx},  Mbar = phibar e^{-ikx},  N = psi e^{-ikx},  Nbar = psibar e^{ikx},

which satisfy ``M' = [[0, q], [r, 2ik]] M`` (same for Nbar) and
``N' = [[-2ik, q], [r, 0]] N`` (same for Mbar) and tend to unit vectors at the
launching end.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from ._winding import arg_increment
from .errors import NoValidContour, StepSizeUnderflow, WrongHalfPlane
from .potentials import PotentialPair

log = logging.getLogger(__name__)

RTOL = 1e-10
ATOL = 1e-12
FLATNESS_TOL = 1e-6
LADDER = (0, -1, 1, -2, 2, -3, 3)


class Jost(str, enum.Enum):
    PHI = "PHI"
    PHI_BAR = "PHI_BAR"
    PSI = "PSI"
    PSI_BAR = "PSI_BAR"


# (launch end, initial envelope, envelope kind): kind "M" uses [[0,q],[r,2ik]],
# kind "N" uses [[-2ik,q],[r,0]]
_SETUP = {
    Jost.PHI: (-1, (1, 0), "M"),
    Jost.PHI_BAR: (-1, (0, 1), "N"),
    Jost.PSI: (1, (0, 1), "N"),
    Jost.PSI_BAR: (1, (1, 0), "M"),
}
# envelope = raw * exp(sign * i k x)
_PHASE_SIGN = {Jost.PHI: 1, Jost.PHI_BAR: -1, Jost.PSI: -1, Jost.PSI_BAR: 1}


@dataclass(frozen=True)
class Contour:
    """``gamma(xi) = xi + i c sech(xi)`` on ``[-L, L]``."""

    elevation: float
    half_length: float
    margin: float

    def gamma(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi + 1j * self.elevation / np.cosh(xi)

    def dgamma(self, xi):
        xi = np.asarray(xi, dtype=float)
        return 1.0 - 1j * self.elevation * np.tanh(xi) / np.cosh(xi)

    @property
    def end_height(self) -> float:
        return float(self.elevation / np.cosh(self.half_length))

    def matching_points(self) -> tuple[float, float, float]:
        L = self.half_length
        return (-L / 4, 0.0, L / 4)

    def min_distance(self, points: Iterable[complex], n: int = 8001) -> float:
        pts = np.asarray(list(points), dtype=complex)
        if pts.size == 0:
            return float("inf")
        z = self.gamma(np.linspace(-self.half_length, self.half_length, n))
        return float(np.min(np.abs(z[:, None] - pts[None, :])))

    def to_json(self) -> dict:
        return {"elevation": self.elevation, "half_length": self.half_length, "margin": self.margin}


def _tube_winding(p: PotentialPair, contour: Contour, width: float) -> int | None:
    """Zeros of the denominator inside the band ``|Im(x - gamma)| < width``.

    Returns None when the denominator is unavailable or overflows on the band.
    """
    if p.denominator is None:
        return None
    L, w = contour.half_length, width

    def path(t):
        # lower edge left->right, right cap, upper edge right->left, left cap
        t = np.asarray(t, dtype=float)
        s = np.clip(t * 4, 0, 4 - 1e-15)
        i, u = s.astype(int), s - s.astype(int)
        xi = np.select([i == 0, i == 1, i == 2, i == 3], [-L + 2 * L * u, L + 0 * u, L - 2 * L * u, -L + 0 * u])
        h = np.select([i == 0, i == 1, i == 2, i == 3], [-w + 0 * u, -w + 2 * w * u, w + 0 * u, w - 2 * w * u])
        return contour.gamma(xi) + 1j * h

    try:
        with np.errstate(all="ignore"):
            wind, _, _ = arg_increment(p.denominator, path, n0=1024)
    except FloatingPointError:
        log.info("denominator overflows on the contour band; tube probe skipped")
        return None
    return int(round(wind))


def build_contour(p: PotentialPair, c_init: float = 1.0, L: float = 20.0, margin: float = 0.05,
                  flatness_tol: float = FLATNESS_TOL) -> Contour:
    """Pick an elevation from ``c_init * 2**j`` (j = 0, -1, 1, ..., -3, 3) that keeps
    every known pole farther than ``margin`` from the contour.

    When the potential carries an analytic denominator, a band of half-width
    ``margin`` around each candidate is also probed with the argument
    principle, which catches poles nobody listed.
    """
    if not (c_init > 0 and L > 0 and margin > 0):
        raise NoValidContour("c_init, L and margin must all be positive")
    poles = list(p.all_poles)
    tried = []
    for j in LADDER:
        c = c_init * 2.0 ** j
        cand = Contour(c, float(L), float(margin))
        if cand.end_height >= flatness_tol:
            tried.append(f"c={c:g}: end height {cand.end_height:.2g}")
            continue
        dist = cand.min_distance(poles)
        if dist <= margin:
            tried.append(f"c={c:g}: distance {dist:.3g}")
            continue
        wind = _tube_winding(p, cand, margin)
        if wind:
            tried.append(f"c={c:g}: {wind} denominator zero(s) in band")
            continue
        return cand
    raise NoValidContour("no elevation in the ladder clears the poles (" + "; ".join(tried) + ")")


@dataclass(frozen=True)
class JostSolution:
    """Samples of one Jost solution along a contour.

    ``values[i]`` is the two-component vector at ``xi[i]``; with
    ``envelope_form`` they are the phase-free envelopes (M, Mbar, N, Nbar).
    """

    which: Jost
    k: complex
    xi: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    contour: Contour
    envelope_form: bool = True

    @property
    def x(self) -> np.ndarray:
        return self.contour.gamma(self.xi)

    def raw(self) -> np.ndarray:
        """Jost solution itself, phase multiplied back in."""
        if not self.envelope_form:
            return self.values
        ph = np.exp(-_PHASE_SIGN[self.which] * 1j * self.k * self.x)
        return self.values * ph[:, None]

    def envelope(self) -> np.ndarray:
        if self.envelope_form:
            return self.values
        ph = np.exp(_PHASE_SIGN[self.which] * 1j * self.k * self.x)
        return self.values * ph[:, None]

    def at(self, xi: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.xi - xi)))
        if abs(self.xi[i] - xi) > 1e-12:
            raise KeyError(f"xi={xi} was not sampled")
        return self.values[i]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["xi", "x_re", "x_im", "w1_re", "w1_im", "w2_re", "w2_im"])
        for s, z, v in zip(self.xi, self.x, self.values):
            w.writerow([repr(float(s)), repr(z.real), repr(z.imag),
                        repr(v[0].real), repr(v[0].imag), repr(v[1].real), repr(v[1].imag)])
        return buf.getvalue()


def _sample_grid(contour: Contour, samples: Sequence[float] | None) -> np.ndarray:
    L = contour.half_length
    pts = set(contour.matching_points()) | {-L, L}
    if samples is not None:
        pts |= {float(s) for s in samples}
    xs = np.array(sorted(pts))
    if xs[0] < -L - 1e-12 or xs[-1] > L + 1e-12:
        raise ValueError("sample points must lie in [-L, L]")
    return xs


def integrate_batch(p: PotentialPair, ks: Sequence[complex], contour: Contour, which: Jost | str,
                    samples: Sequence[float] | None = None, envelope: bool = True,
                    rtol: float = RTOL, atol: float = ATOL) -> list[JostSolution]:
    """Integrate one Jost solution for many ``k`` at once.

    All k share the adaptive step sequence (the state is a (2, nk) array),
    so grouping k of similar modulus is cheapest.  The integration is split
    at the sample points so each sample is a true step endpoint.
    """
    which = Jost(which)
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    if np.any(ks == 0):
        raise ValueError("k = 0 is excluded")
    nk = ks.size
    end, init, kind = _SETUP[which]
    xs = _sample_grid(contour, samples)
    start = contour.half_length * end
    gam, dgam = contour.gamma, contour.dgamma

    if envelope:
        y0 = np.zeros((2, nk), dtype=complex)
        y0[0 if init[0] else 1] = 1.0
        two_ik = 2j * ks

        if kind == "M":
            def rhs(s, y):
                y = y.reshape(2, nk)
                x = gam(s)
                q, r = p.qr_eval(x)
                g = dgam(s)
                return (g * np.stack([q * y[1], r * y[0] + two_ik * y[1]])).ravel()
        else:
            def rhs(s, y):
                y = y.reshape(2, nk)
                x = gam(s)
                q, r = p.qr_eval(x)
                g = dgam(s)
                return (g * np.stack([-two_ik * y[0] + q * y[1], r * y[0]])).ravel()
    else:
        x0 = gam(start)
        y0 = np.zeros((2, nk), dtype=complex)
        y0[0 if init[0] else 1] = np.exp(-_PHASE_SIGN[which] * 1j * ks * x0)
        ik = 1j * ks

        def rhs(s, y):
            y = y.reshape(2, nk)
            x = gam(s)
            q, r = p.qr_eval(x)
            g = dgam(s)
            return (g * np.stack([-ik * y[0] + q * y[1], r * y[0] + ik * y[1]])).ravel()

    order = xs if end < 0 else xs[::-1]
    out = np.empty((len(order), 2, nk), dtype=complex)
    y = y0.ravel()
    s0 = start
    for i, s1 in enumerate(order):
        if s1 != s0:
            sol = solve_ivp(rhs, (s0, s1), y, method="DOP853", rtol=rtol, atol=atol)
            if sol.status != 0:
                raise StepSizeUnderflow(f"{which.value} integration stopped at xi={sol.t[-1]:.6g}: {sol.message}")
            y = sol.y[:, -1]
            s0 = s1
        out[i] = y.reshape(2, nk)
    if end > 0:
        out = out[::-1]
    return [JostSolution(which, complex(k), xs, out[:, :, j].copy(), contour, envelope) for j, k in enumerate(ks)]


def integrate_zs(p: PotentialPair, k: complex, contour: Contour, which: Jost | str,
                 samples: Sequence[float] | None = None, envelope: bool = True,
                 rtol: float = RTOL, atol: float = ATOL) -> JostSolution:
    """One Jost solution at one ``k``; see :func:`integrate_batch`."""
    return integrate_batch(p, [k], contour, which, samples, envelope, rtol, atol)[0]


def check_half_plane(which: Jost | str, k: complex) -> None:
    which = Jost(which)
    im = complex(k).imag
    if which in (Jost.PHI, Jost.PSI) and im < 0:
        raise WrongHalfPlane(f"{which.value} continues only into Im k >= 0, got k={k}")
    if which in (Jost.PHI_BAR, Jost.PSI_BAR) and im > 0:
        raise WrongHalfPlane(f"{which.value} continues only into Im k <= 0, got k={k}")


def continue_in_k(p: PotentialPair, contour: Contour, which: Jost | str, k: complex,
                  samples: Sequence[float] | None = None, rtol: float = RTOL,
                  atol: float = ATOL) -> JostSolution:
    """Jost solution at complex ``k`` in the half-plane where it is analytic."""
    check_half_plane(which, k)
    return integrate_zs(p, k, contour, which, samples, True, rtol, atol)


def wronskian(u: JostSolution, v: JostSolution) -> np.ndarray:
    """``det(u, v)`` of the raw solutions at the common samples.

    Formed from envelopes so the phases, which cancel for the pairs that
    matter, are never exponentiated separately.
    """
    if not np.array_equal(u.xi, v.xi) or u.k != v.k:
        raise ValueError("solutions sampled on different grids or at different k")
    a, b = u.envelope(), v.envelope()
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    s = _PHASE_SIGN[u.which] + _PHASE_SIGN[v.which]
    if s:
        det = det * np.exp(-s * 1j * u.k * u.x)
    return det


__all__ = [
    "Contour",
    "Jost",
    "JostSolution",
    "build_contour",
    "integrate_zs",
    "integrate_batch",
    "continue_in_k",
    "check_half_plane",
    "wronskian",
]
