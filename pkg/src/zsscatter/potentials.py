"""Meromorphic potential pairs (q, r) and their constructors.

A pair is built from a constructor record ``{"kind": ..., "params": {...}}``;
the record is the only thing ever serialized, the evaluators are derived
from it.  Complex parameters are written as ``[re, im]`` pairs.

Kinds
-----
``zero``
    q = r = 0.
``rational_in_x``
    ``num``, ``den``: coefficient lists in *ascending* powers of x;
    ``reduction`` fixes r (or give ``r_num``/``r_den`` with reduction NONE).
``rational_in_exp``
    same with polynomials in ``z = exp(lambda x)``; ``lambda`` needs a
    positive real part.
``sech_family``
    q = amplitude * sech(x); r from ``reduction``.
``negaton_example31``
    q = r = 32 e^{2x}(4x e^{4x} + x + 1)/d(x) with
    d(x) = e^{8x} - 2(8x^2 + 8x + 3) e^{4x} + 1, evaluated as printed.
    The example's label is shared by its assumption list and this formula
    in the source; the formula is the one meant here.
``reconstructed``
    q, r recovered from a discrete-data JSON object under ``data``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .discrete import ReconstructionInput, from_cpair
from .errors import DomainError, PoleRefinementError, SpecError


class Symmetry(str, enum.Enum):
    R_EQ_Q = "R_EQ_Q"
    R_EQ_NEG_Q = "R_EQ_NEG_Q"
    R_EQ_CONJ_Q = "R_EQ_CONJ_Q"
    R_EQ_NEG_CONJ_Q = "R_EQ_NEG_CONJ_Q"
    NONE = "NONE"


#: tie-break order used by :func:`classify_symmetry`
SYMMETRY_ORDER = (Symmetry.R_EQ_Q, Symmetry.R_EQ_NEG_Q, Symmetry.R_EQ_CONJ_Q, Symmetry.R_EQ_NEG_CONJ_Q)

EXCLUSION_RADIUS = 1e-3


def _schwarz(f: Callable) -> Callable:
    """x -> conj(f(conj(x))): the analytic function equal to f* on the real axis."""
    return lambda x: np.conj(f(np.conj(x)))


def _apply_reduction(q: Callable, reduction: Symmetry) -> Callable:
    if reduction is Symmetry.R_EQ_Q:
        return q
    if reduction is Symmetry.R_EQ_NEG_Q:
        return lambda x: -q(x)
    if reduction is Symmetry.R_EQ_CONJ_Q:
        return _schwarz(q)
    if reduction is Symmetry.R_EQ_NEG_CONJ_Q:
        s = _schwarz(q)
        return lambda x: -s(x)
    raise SpecError("reduction NONE requires an explicit r")


@dataclass(frozen=True)
class PotentialPair:
    """Evaluatable pair (q, r) with pole bookkeeping.

    ``known_poles`` collects every pole located so far (real or complex);
    evaluation within ``exclusion_radius`` of any of them raises
    :class:`DomainError`.  ``denominator`` is an analytic function whose zeros
    are the poles, when the constructor provides one.
    """

    q_func: Callable = field(repr=False)
    r_func: Callable = field(repr=False)
    symmetry: Symmetry = Symmetry.NONE
    real_poles: tuple[float, ...] = ()
    decay_radius: float = 5.0
    description: dict = field(default_factory=dict)
    denominator: Callable | None = field(default=None, repr=False)
    known_poles: tuple[complex, ...] = ()
    exclusion_radius: float = EXCLUSION_RADIUS
    rational: tuple | None = field(default=None, repr=False)
    qr_func: Callable | None = field(default=None, repr=False)

    def _check(self, x) -> None:
        poles = self.all_poles
        if not poles:
            return
        xa = np.asarray(x, dtype=complex).ravel()
        dist = np.min(np.abs(xa[:, None] - np.asarray(poles)[None, :]))
        if dist < self.exclusion_radius:
            raise DomainError(f"evaluation within {dist:.3g} of a pole")

    @property
    def all_poles(self) -> tuple[complex, ...]:
        return tuple(complex(p) for p in self.real_poles) + tuple(self.known_poles)

    def q_eval(self, x):
        self._check(x)
        return self.q_func(np.asarray(x, dtype=complex))

    def r_eval(self, x):
        self._check(x)
        return self.r_func(np.asarray(x, dtype=complex))

    def qr_eval(self, x):
        """Both potentials at once (shares work for reconstructed pairs)."""
        self._check(x)
        x = np.asarray(x, dtype=complex)
        if self.qr_func is not None:
            return self.qr_func(x)
        return self.q_func(x), self.r_func(x)

    def with_poles(self, real_poles: Sequence[float]) -> "PotentialPair":
        return replace(self, real_poles=tuple(sorted(float(p) for p in real_poles)))

    def to_json(self) -> str:
        return json.dumps(self.description, sort_keys=True)


# constructors -------------------------------------------------------------


def _coeffs(v: Sequence) -> np.ndarray:
    return np.array([from_cpair(c) for c in v], dtype=complex)


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.array(c, dtype=complex)
    while len(c) > 1 and c[-1] == 0:
        c = c[:-1]
    return c


def _polyval(c: np.ndarray, x):
    # ascending coefficients, Horner
    out = np.zeros_like(np.asarray(x, dtype=complex))
    for a in c[::-1]:
        out = out * x + a
    return out


def _reduction(params: dict, default: str = "NONE") -> Symmetry:
    try:
        return Symmetry(params.get("reduction", default))
    except ValueError as exc:
        raise SpecError(f"unknown reduction {params.get('reduction')!r}") from exc


def _zero(params: dict) -> PotentialPair:
    z = lambda x: np.zeros_like(np.asarray(x, dtype=complex))
    return PotentialPair(z, z, Symmetry.R_EQ_Q, decay_radius=1.0)


def _rational_in_x(params: dict) -> PotentialPair:
    num = _trim(_coeffs(params["num"]))
    den = _trim(_coeffs(params["den"]))
    red = _reduction(params)
    if np.all(den == 0):
        raise SpecError("denominator is identically zero")
    if len(num) >= len(den) and not np.all(num == 0):
        raise SpecError("numerator degree must be below denominator degree for decay")
    q = lambda x: _polyval(num, x) / _polyval(den, x)
    if red is Symmetry.NONE:
        rnum = _trim(_coeffs(params["r_num"]))
        rden = _trim(_coeffs(params["r_den"]))
        if len(rnum) >= len(rden) and not np.all(rnum == 0):
            raise SpecError("r numerator degree must be below denominator degree")
        r = lambda x: _polyval(rnum, x) / _polyval(rden, x)
        dens = [den, rden]
        rat_r = (rnum, rden)
    else:
        r = _apply_reduction(q, red)
        dens = [den]
        if red in (Symmetry.R_EQ_CONJ_Q, Symmetry.R_EQ_NEG_CONJ_Q):
            dens.append(np.conj(den))
        sgn = -1 if red in (Symmetry.R_EQ_NEG_Q, Symmetry.R_EQ_NEG_CONJ_Q) else 1
        conj = red in (Symmetry.R_EQ_CONJ_Q, Symmetry.R_EQ_NEG_CONJ_Q)
        rat_r = (sgn * (np.conj(num) if conj else num), np.conj(den) if conj else den)
    roots = np.concatenate([np.roots(d[::-1]) if len(d) > 1 else np.array([]) for d in dens])
    roots = _dedupe(roots)
    real = sorted(float(z.real) for z in roots if abs(z.imag) < 1e-12)
    cplx = tuple(complex(z) for z in roots if abs(z.imag) >= 1e-12)
    dfun = lambda x: np.prod([_polyval(d, x) for d in dens], axis=0)
    R0 = 2.0 + (max(abs(z) for z in roots) if len(roots) else 0.0)
    return PotentialPair(
        q, r, red, tuple(real), R0, denominator=dfun, known_poles=cplx,
        rational=((num, den), rat_r),
    )


def _rational_in_exp(params: dict) -> PotentialPair:
    lam = from_cpair(params["lambda"])
    if lam.real <= 0:
        raise SpecError("lambda must have positive real part")
    num = _trim(_coeffs(params["num"]))
    den = _trim(_coeffs(params["den"]))
    red = _reduction(params, "R_EQ_Q")
    if red is Symmetry.NONE:
        raise SpecError("rational_in_exp needs a reduction")
    if len(num) >= len(den) and not np.all(num == 0):
        raise SpecError("q must vanish as x -> +inf: deg num < deg den in exp(lambda x)")
    if num[0] != 0 or den[0] == 0:
        raise SpecError("q must vanish as x -> -inf: num(0) = 0 and den(0) != 0")

    def q(x):
        x = np.asarray(x, dtype=complex)
        # evaluate in z or 1/z depending on the side, to avoid overflow
        right = (lam * x).real > 0
        z = np.exp(np.where(right, -1, 1) * lam * x)
        nl, dl = len(num) - 1, len(den) - 1
        out_left = _polyval(num, z) / _polyval(den, z)
        num_r = _polyval(num[::-1], z) * z ** (dl - nl)
        out_right = num_r / _polyval(den[::-1], z)
        return np.where(right, out_right, out_left)

    r = _apply_reduction(q, red)
    zr = np.roots(den[::-1]) if len(den) > 1 else np.array([])
    # poles x = (log z + 2 pi i n) / lambda, kept within a moderate strip
    poles = []
    for z0 in zr:
        for n in range(-4, 5):
            p = (np.log(z0) + 2j * np.pi * n) / lam
            if abs(p.imag) < 6:
                poles.append(p)
                if red in (Symmetry.R_EQ_CONJ_Q, Symmetry.R_EQ_NEG_CONJ_Q):
                    poles.append(np.conj(p))
    poles = _dedupe(np.array(poles))
    real = sorted(float(p.real) for p in poles if abs(p.imag) < 1e-12)
    cplx = tuple(complex(p) for p in poles if abs(p.imag) >= 1e-12)

    def dfun(x):
        out = _polyval(den, np.exp(lam * np.asarray(x, dtype=complex)))
        if red in (Symmetry.R_EQ_CONJ_Q, Symmetry.R_EQ_NEG_CONJ_Q):
            out = out * np.conj(_polyval(den, np.exp(lam * np.conj(np.asarray(x, dtype=complex)))))
        return out

    R0 = 3.0 + max([abs(p.real) for p in poles] + [0.0]) + 10.0 / lam.real
    return PotentialPair(q, r, red, tuple(real), R0, denominator=dfun, known_poles=cplx)


def _sech(params: dict) -> PotentialPair:
    amp = from_cpair(params.get("amplitude", 1.0))
    red = _reduction(params, "R_EQ_NEG_CONJ_Q")

    def q(x):
        x = np.asarray(x, dtype=complex)
        sg = np.where(x.real >= 0, 1.0, -1.0)
        e = np.exp(-sg * x)
        # sech x = 2 e^{-|x|} / (1 + e^{-2|x|}) with the sign-adjusted exponent
        return amp * 2 * e / (1 + e * e)

    r = _apply_reduction(q, red)
    poles = tuple(1j * np.pi * (n + 0.5) for n in range(-4, 4))
    return PotentialPair(
        q, r, red, (), 5.0, denominator=lambda x: np.cosh(np.asarray(x, dtype=complex)),
        known_poles=poles,
    )


def negaton_d(x):
    """d(x) = e^{8x} - 2(8x^2 + 8x + 3) e^{4x} + 1."""
    x = np.asarray(x, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.exp(8 * x) - 2 * (8 * x**2 + 8 * x + 3) * np.exp(4 * x) + 1


def _negaton(params: dict) -> PotentialPair:
    def q(x):
        x = np.asarray(x, dtype=complex)
        right = x.real > 0
        s = np.where(right, -1.0, 1.0)
        e = np.exp(4 * s * x)  # <= 1 in modulus on either side
        p = 8 * x**2 + 8 * x + 3
        # left: 32 e^{2x}(4x e^{4x} + x + 1) / (e^{8x} - 2p e^{4x} + 1)
        left = 32 * np.exp(2 * s * x) * (4 * x * e + x + 1) / (e * e - 2 * p * e + 1)
        # right: divide through by e^{8x}
        rt = 32 * np.exp(2 * s * x) * (4 * x + (x + 1) * e) / (1 - 2 * p * e + e * e)
        return np.where(right, rt, left)

    pair = PotentialPair(q, q, Symmetry.R_EQ_Q, (), 5.0, denominator=negaton_d)
    roots = denominator_zeros(pair, (-4.0, 4.0, -2.5, 2.5))
    real = sorted(float(z.real) for z in roots if abs(z.imag) < 1e-9)
    cplx = tuple(z for z in roots if abs(z.imag) >= 1e-9)
    return replace(pair, real_poles=tuple(real), known_poles=cplx)


def _reconstructed(params: dict) -> PotentialPair:
    from . import reconstruct as rc

    data = ReconstructionInput.from_json(params["data"])
    data.validate()

    def qr(x):
        x = np.asarray(x, dtype=complex)
        rec = rc.solve_system(data, x.ravel(), strict=False, condition=False)
        q, r = rec.potentials()
        return q.reshape(x.shape), r.reshape(x.shape)

    def q(x):
        return qr(x)[0]

    def r(x):
        return qr(x)[1]

    dfun = lambda x: rc.system_determinant(data, np.asarray(x, dtype=complex))
    pair = PotentialPair(q, r, Symmetry.NONE, (), 6.0, denominator=dfun, qr_func=qr)
    if data.upper or data.lower:
        roots = denominator_zeros(pair, (-6.0, 6.0, -2.5, 2.5))
        real = sorted(float(z.real) for z in roots if abs(z.imag) < 1e-9)
        cplx = tuple(z for z in roots if abs(z.imag) >= 1e-9)
        pair = replace(pair, real_poles=tuple(real), known_poles=cplx)
    sym = classify_symmetry(pair, np.linspace(-3.1, 3.3, 17), 1e-9)
    return replace(pair, symmetry=sym)


_KINDS = {
    "zero": _zero,
    "rational_in_x": _rational_in_x,
    "rational_in_exp": _rational_in_exp,
    "sech_family": _sech,
    "negaton_example31": _negaton,
    "reconstructed": _reconstructed,
}


def make_potential(spec: dict | str) -> PotentialPair:
    """Build a :class:`PotentialPair` from a constructor record (dict or JSON text)."""
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise SpecError(f"potential JSON does not parse: {exc}") from exc
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SpecError("potential record needs a 'kind'")
    kind = spec["kind"]
    params = spec.get("params", {}) or {}
    if kind not in _KINDS:
        raise SpecError(f"unknown potential kind {kind!r}; expected one of {sorted(_KINDS)}")
    try:
        pair = _KINDS[kind](params)
    except KeyError as exc:
        raise SpecError(f"{kind}: missing parameter {exc}") from exc
    return replace(pair, description={"kind": kind, "params": params})


# analysis -----------------------------------------------------------------


def _dedupe(z: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    out: list[complex] = []
    for v in np.asarray(z, dtype=complex).ravel():
        if not np.isfinite(v):
            continue
        if all(abs(v - w) > tol * max(1.0, abs(v)) for w in out):
            out.append(complex(v))
    return np.array(out, dtype=complex)


def _derivative(f: Callable, z: np.ndarray, h: float = 1e-5) -> np.ndarray:
    # fourth-order central difference along the real direction; f is analytic
    return (f(z - 2 * h) - 8 * f(z - h) + 8 * f(z + h) - f(z + 2 * h)) / (12 * h)


def denominator_zeros(p: PotentialPair, rect: tuple[float, float, float, float],
                      spacing: float = 0.1, iters: int = 60) -> list[complex]:
    """Zeros of ``p.denominator`` in ``[re0, re1] x [im0, im1]`` by Newton from a grid."""
    if p.denominator is None:
        return []
    re0, re1, im0, im1 = rect
    u = np.arange(re0, re1 + spacing / 2, spacing)
    v = np.arange(im0, im1 + spacing / 2, spacing)
    z = (u[None, :] + 1j * v[:, None]).ravel()
    f = p.denominator
    with np.errstate(all="ignore"):
        for _ in range(iters):
            fz = f(z)
            step = fz / _derivative(f, z)
            step = np.where(np.isfinite(step), step, 0)
            z = z - np.clip(np.abs(step), 0, 0.5) * np.exp(1j * np.angle(step))
        fz = f(z)
        scale = np.abs(_derivative(f, z)) + 1.0
        ok = np.isfinite(fz) & (np.abs(fz) < 1e-9 * scale)
    z = z[ok]
    z = z[(z.real >= re0) & (z.real <= re1) & (z.imag >= im0) & (z.imag <= im1)]
    z = np.where(np.abs(z.imag) < 1e-10, z.real + 0j, z)
    roots = _dedupe(z, 1e-7)
    return sorted((complex(w) for w in roots), key=lambda w: (w.real, w.imag))


def locate_real_poles(p: PotentialPair, window: tuple[float, float], tol: float = 1e-10,
                      max_iter: int = 100) -> list[float]:
    """Real poles of q or r inside ``window``, each refined to ``tol``.

    Candidates are sign changes and local minima of ``1/q``, ``1/r`` (or of
    the denominator when one is known) on a fine grid; each is polished by Newton's method
    on the same function.  Refinement that does not converge within
    ``max_iter`` steps raises :class:`PoleRefinementError`.
    """
    lo, hi = map(float, window)
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise SpecError("window must be a finite interval")
    if tol <= 0:
        raise SpecError("tol must be positive")
    if p.denominator is not None:
        f = lambda x: p.denominator(np.asarray(x, dtype=complex))
    else:
        def f(x):
            x = np.asarray(x, dtype=complex)
            with np.errstate(all="ignore"):
                qv, rv = p.q_func(x), p.r_func(x)
                iq = np.where(qv == 0, np.inf, np.where(np.isfinite(qv), 1 / qv, 0))
                ir = np.where(rv == 0, np.inf, np.where(np.isfinite(rv), 1 / rv, 0))
            return np.where(np.abs(iq) < np.abs(ir), iq, ir)
    n = max(2001, int((hi - lo) / 2e-3))
    xs = np.linspace(lo, hi, n)
    with np.errstate(all="ignore"):
        fv = f(xs)
        g = np.abs(fv)
    g = np.where(np.isfinite(g), g, np.inf)
    cand = [i for i in range(1, n - 1) if g[i] <= g[i - 1] and g[i] <= g[i + 1]]
    # a simple real zero shows up as a sign change, however shallow the dip
    crossing = set()
    for part in (fv.real, fv.imag):
        ok = np.isfinite(part[:-1]) & np.isfinite(part[1:])
        idx = np.nonzero(ok & (np.sign(part[:-1]) * np.sign(part[1:]) < 0))[0]
        crossing.update(int(i) if g[i] <= g[i + 1] else int(i) + 1 for i in idx)
    cand = sorted(set(cand) | crossing)
    scale = np.median(g[np.isfinite(g)]) if np.any(np.isfinite(g)) else 1.0
    found: list[float] = []
    for i in cand:
        if i in crossing:
            pass
        elif g[i] > 1e-2 * max(scale, 1e-300) and g[i] > 1e-6:
            # only sharp dips can hide a zero between grid points
            if not (g[i] < 0.1 * min(g[max(i - 5, 0)], g[min(i + 5, n - 1)])):
                continue
        x = complex(xs[i])
        for it in range(max_iter):
            with np.errstate(all="ignore"):
                fx = complex(f(x))
                dfx = complex(_derivative(f, np.array(x)))
            if dfx == 0 or not np.isfinite(dfx):
                break
            step = fx / dfx
            x = complex(x.real - step.real, 0.0)
            if abs(step) < tol:
                break
        else:
            if i in crossing:
                # 1/q also flips sign across a zero of q; not a pole
                continue
            raise PoleRefinementError(f"pole refinement near {xs[i]:.6g} did not converge")
        with np.errstate(all="ignore"):
            resid = abs(complex(f(x)))
            slope = abs(complex(_derivative(f, np.array(x))))
        if resid <= 1e-8 * max(slope, 1.0) and lo <= x.real <= hi:
            if all(abs(x.real - y) > 10 * tol for y in found):
                found.append(x.real)
    return sorted(found)


def classify_symmetry(p: PotentialPair, sample_points: Sequence[float], tol: float = 1e-10) -> Symmetry:
    """First of (q, -q, q*, -q*) equal to r at every sample, else NONE."""
    x = np.asarray(sample_points, dtype=float).astype(complex)
    qv = p.q_eval(x)
    rv = p.r_eval(x)
    scale = max(1.0, float(np.max(np.abs(qv))) if qv.size else 1.0)
    cands = {
        Symmetry.R_EQ_Q: qv,
        Symmetry.R_EQ_NEG_Q: -qv,
        Symmetry.R_EQ_CONJ_Q: np.conj(qv),
        Symmetry.R_EQ_NEG_CONJ_Q: -np.conj(qv),
    }
    for tag in SYMMETRY_ORDER:
        if np.all(np.abs(rv - cands[tag]) <= tol * scale):
            return tag
    return Symmetry.NONE


def tail_integral(p: PotentialPair, R: float) -> float:
    """Gauss–Legendre estimate of int over R <= |x| <= 2R of |q| + |r|."""
    nodes, weights = np.polynomial.legendre.leggauss(40)
    total = 0.0
    for a, b in ((R, 2 * R), (-2 * R, -R)):
        for j in range(8):
            lo = a + (b - a) * j / 8
            hi = a + (b - a) * (j + 1) / 8
            xs = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
            vals = np.abs(p.q_func(xs.astype(complex))) + np.abs(p.r_func(xs.astype(complex)))
            total += 0.5 * (hi - lo) * float(np.dot(weights, vals))
    return total


def tail_beyond(p: PotentialPair, L: float) -> float:
    """Integral of |q| + |r| over |x| > L (dyadic windows until negligible)."""
    total, R = 0.0, float(L)
    for _ in range(12):
        piece = tail_integral(p, R)
        total += piece
        if piece < 1e-16 or R > 1e4:
            break
        R *= 2
    return total


__all__ = [
    "Symmetry",
    "PotentialPair",
    "make_potential",
    "locate_real_poles",
    "classify_symmetry",
    "denominator_zeros",
    "tail_integral",
    "tail_beyond",
    "negaton_d",
]
