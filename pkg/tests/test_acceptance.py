"""Acceptance gate: ten end-to-end criteria at their stated tolerances.

Each test prints one PASS/FAIL line; the session summary repeats them.
Negaton checks use the pair rebuilt from the double-pole data at k = +-i
(see conftest), which is the reflectionless potential of that data.
"""

from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from zsscatter import (
    build_contour,
    extract_discrete_data,
    locate_real_poles,
    make_potential,
    refine_zero,
    scatter_grid,
)
from zsscatter.discrete import DiscreteEigen, example31_data, one_soliton_data
from zsscatter.reconstruct import residue_terms, zs_residual
from zsscatter.scattering import (
    check_symmetry_relations,
    reflectionless_test,
    riccati_formal_series,
    schrodinger_form,
    stokes_matrices,
)
from zsscatter.spectrum import AFunction, count_zeros


def report(n: int, ok: bool, detail: str) -> None:
    print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


def negaton_a(k):
    return (k - 1j) ** 2 / (k + 1j) ** 2


def sech2_a(k):
    return (k - 0.5j) * (k - 1.5j) / ((k + 0.5j) * (k + 1.5j))


def test_criterion_01_negaton_round_trip(negaton, negaton_contour):
    ks = [0.5, 1.0, 2.0, 5.0]
    grid = scatter_grid(negaton, ks, negaton_contour)
    rel = max(abs(g.a - negaton_a(g.k)) / abs(negaton_a(g.k)) for g in grid)
    bmax = max(max(abs(g.b), abs(g.b_bar)) for g in grid)
    poles = locate_real_poles(negaton, (-2.0, 2.0))
    xs = np.linspace(-3, 3, 13) + 0.013
    sym = float(np.max(np.abs(negaton.q_eval(xs) - negaton.r_eval(xs))))
    ok = (rel < 1e-6 and bmax < 1e-6 and len(poles) == 2
          and abs(poles[0] + 0.245036) < 1e-4 and abs(poles[1] - 0.864558) < 1e-4 and sym < 1e-9)
    report(1, ok, f"a rel err {rel:.2e}, max|b| {bmax:.2e}, poles {poles}, |q-r| {sym:.1e}")
    assert rel < 1e-6
    assert bmax < 1e-6
    assert len(poles) == 2
    assert poles[0] == pytest.approx(-0.245036, abs=1e-4)
    assert poles[1] == pytest.approx(0.864558, abs=1e-4)
    assert sym < 1e-9


def _sample_points(poles, rng, n=20):
    pts = []
    while len(pts) < n:
        x = rng.uniform(-3, 3)
        k = complex(rng.uniform(-3, 3), rng.uniform(-2, 2))
        if min((abs(x - p) for p in poles), default=1.0) < 0.3:
            continue
        if abs(k) < 0.2 or abs(k - 1j) < 0.2 or abs(k + 1j) < 0.2:
            continue
        pts.append((x, k))
    return pts


def test_criterion_02_ode_self_consistency():
    rng = np.random.default_rng(20261017)
    worst = {}
    for name, data, poles in (
        ("negaton", example31_data(), (-0.245036534, 0.864558449)),
        ("one-soliton", one_soliton_data(), (0.0,)),
    ):
        res = [zs_residual(data, x, k) for x, k in _sample_points(poles, rng)]
        worst[name] = max(res)
    ok = all(v < 1e-8 for v in worst.values())
    report(2, ok, ", ".join(f"{k} residual {v:.2e}" for k, v in worst.items()))
    assert ok


REAL_GRID = [-3.0, -2.0, -1.5, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0]


def test_criterion_03_unitarity(zero, sech2, negaton, negaton_contour):
    worst = {}
    for name, p, c in (
        ("zero", zero, build_contour(zero)),
        ("2-sech", sech2, build_contour(sech2)),
        ("negaton", negaton, negaton_contour),
    ):
        grid = scatter_grid(p, REAL_GRID, c)
        worst[name] = max(g.unitarity_residual for g in grid)
    ok = all(v < 1e-8 for v in worst.values())
    report(3, ok, ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))
    assert ok


def test_criterion_04_symmetry_suite(negaton, negaton_contour):
    pm = [0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 0.5 + 0.7j, -0.5 - 0.7j]
    cj = [0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 0.5 + 0.7j, 0.5 - 0.7j]
    cases = [
        ("R_EQ_Q", negaton, negaton_contour, pm),
        ("R_EQ_NEG_Q", make_potential({"kind": "sech_family", "params": {"amplitude": 2, "reduction": "R_EQ_NEG_Q"}}), None, pm),
        ("R_EQ_CONJ_Q", make_potential({"kind": "sech_family", "params": {"amplitude": [1.0, 0.5], "reduction": "R_EQ_CONJ_Q"}}), None, cj),
        ("R_EQ_NEG_CONJ_Q", make_potential({"kind": "sech_family", "params": {"amplitude": [1.2, 0.7], "reduction": "R_EQ_NEG_CONJ_Q"}}), None, cj),
    ]
    devs = {}
    for tag, p, c, ks in cases:
        assert p.symmetry.value == tag
        c = c or build_contour(p)
        devs[tag] = check_symmetry_relations(scatter_grid(p, ks, c), tag)
    ok = all(v < 1e-8 for v in devs.values())
    report(4, ok, ", ".join(f"{k} {v:.1e}" for k, v in devs.items()))
    assert ok


def test_criterion_05_spectrum(negaton, negaton_contour, sech2):
    af = AFunction(negaton, negaton_contour)
    n = count_zeros(af, (-2, 2, 0.05, 2))
    k_ref = refine_zero(af, 0.9j + 0.05, tol=1e-10)
    eig = extract_discrete_data(negaton, negaton_contour, (-2, 2, 0.05, 2), a_fn=af)

    c = build_contour(sech2)
    eig2 = extract_discrete_data(sech2, c, (-2, 2, 0.05, 2))
    locs = sorted((e.location for e in eig2), key=lambda z: z.imag)
    probe = [0.5, 1.0, 2.0, 1 + 0.5j, 2j, -1 + 1j, -0.5 - 0.3j, 1 - 2j]
    grid = scatter_grid(sech2, probe, c)
    fs = max(abs((g.a if g.a is not None else g.a_bar)
                 - (sech2_a(g.k) if g.a is not None else 1 / sech2_a(g.k))) for g in grid)

    ok = (n == 2 and abs(k_ref - 1j) < 1e-8 and len(eig) == 1 and eig[0].multiplicity == 2
          and abs(eig[0].location - 1j) < 1e-8 and len(eig2) == 2
          and all(e.multiplicity == 1 for e in eig2)
          and abs(locs[0] - 0.5j) < 1e-5 and abs(locs[1] - 1.5j) < 1e-5 and fs < 1e-5)
    report(5, ok, f"count {n}, |k-i| {abs(k_ref - 1j):.1e}, nu {[e.multiplicity for e in eig]}, "
                  f"sech zeros {[complex(round(z.real, 8), round(z.imag, 8)) for z in locs]}, closed-form dev {fs:.1e}")
    assert n == 2
    assert abs(k_ref - 1j) < 1e-8
    assert len(eig) == 1 and eig[0].multiplicity == 2 and abs(eig[0].location - 1j) < 1e-8
    assert len(eig2) == 2 and all(e.multiplicity == 1 for e in eig2)
    assert abs(locs[0] - 0.5j) < 1e-5 and abs(locs[1] - 1.5j) < 1e-5
    assert fs < 1e-5


def test_criterion_06_reflectionless_discrimination(negaton, negaton_contour, sech2):
    ks = [0.5, 1.0, 2.0]
    sech15 = make_potential({"kind": "sech_family", "params": {"amplitude": 1.5, "reduction": "R_EQ_NEG_CONJ_Q"}})
    r_neg = reflectionless_test(scatter_grid(negaton, ks, negaton_contour), 1e-4)
    r_s2 = reflectionless_test(scatter_grid(sech2, ks, build_contour(sech2)), 1e-4)
    r_s15 = reflectionless_test(scatter_grid(sech15, ks, build_contour(sech15)), 1e-4)
    ok = r_neg.reflectionless and r_s2.reflectionless and not r_s15.reflectionless
    report(6, ok, f"negaton {r_neg.worst_value:.1e}, 2-sech {r_s2.worst_value:.1e}, 1.5-sech {r_s15.worst_value:.2f}")
    assert ok


def test_criterion_07_stokes(zero, sech2, negaton, negaton_contour):
    # tighter than the default integration tolerance: the product identity
    # is only as good as a*abar - b*bbar = 1
    tight = dict(rtol=1e-12, atol=1e-14)
    ks = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
    recs = []
    for p, c in ((zero, build_contour(zero)), (sech2, build_contour(sech2)), (negaton, negaton_contour)):
        recs += scatter_grid(p, ks, c, **tight)
    prod_err = det_err = 0.0
    for g in recs:
        sm, spl = stokes_matrices(g)
        prod_err = max(prod_err, float(np.max(np.abs(spl @ sm - np.eye(2)))))
        det_err = max(det_err, abs(np.linalg.det(sm) - 1))
    neg1 = scatter_grid(negaton, [1.0], negaton_contour, **tight)[0]
    sm1, _ = stokes_matrices(neg1)
    diag = float(np.max(np.abs(sm1 - np.diag([-1, -1]))))
    ok = prod_err < 1e-12 and det_err < 1e-10 and diag < 1e-6
    report(7, ok, f"|S+S- - I| {prod_err:.1e}, |det S- - 1| {det_err:.1e}, negaton S-(1) dev {diag:.1e}")
    assert ok


def test_criterion_08_formal_series():
    reg = riccati_formal_series([1], 1, 1, "REGULAR", 4)
    sing = riccati_formal_series([1], 1, 1, "SINGULAR", 4)
    expect = [0, 0, 0, 0, -sp.I / 2]
    ok = all(sp.simplify(a - b) == 0 for a, b in zip(reg, expect)) and len(reg) == 5 and sing[0] == -2 * sp.I
    report(8, ok, f"regular {reg}, singular zeta0 {sing[0]}")
    assert ok


def test_criterion_09_scalar_form_diagnostics():
    p = make_potential({"kind": "rational_in_x", "params": {"num": [0, 1], "den": [1, 0, 1], "reduction": "R_EQ_Q"}})
    sf = schrodinger_form(p)
    u1 = complex(sf.u1_eval(np.array([2.0]))[0])
    ok = (sf.order_u1_at_infinity == 1 and sf.order_u2_at_infinity == 2
          and sf.m2 - sf.m1 == 1 and abs(u1 + 0.3) < 1e-10)
    report(9, ok, f"orders ({sf.order_u1_at_infinity}, {sf.order_u2_at_infinity}), m2-m1 {sf.m2 - sf.m1}, u1(2) {u1.real:.12f}")
    assert ok


def _displayed(nu, lower, k, kj, x, b, bk, a1, a2, a3, N0, N1):
    """Residue formulas as displayed for nu = 1 and nu = 2 (oracle)."""
    s = -1 if lower else 1
    e = sp.exp(s * 2 * sp.I * kj * x)
    if nu == 1:
        return e / (k - kj) * b / a1 * N0
    return 2 * e / ((k - kj) * a2) * (b * N1 + (bk + s * 2 * sp.I * x * b + b / (k - kj) - a3 * b / (3 * a2)) * N0)


def test_criterion_10_residue_equivalence():
    k, kj, x = sp.symbols("k k_j x")
    b, bk, a1, a2, a3 = sp.symbols("b b_k a_k a_kk a_kkk")
    N0, N1 = sp.symbols("N0 N1")
    checked = 0
    mismatches = []
    for lower in (False, True):
        for nu in (1, 2):
            eig = (DiscreteEigen(kj, 1, (a1,), (b,)) if nu == 1
                   else DiscreteEigen(kj, 2, (a2, a3), (b, bk)))
            ex = residue_terms(eig, lower=lower, imag=sp.I)
            got = ex.symbolic(x, sp.exp, [N0, N1], k)
            want = _displayed(nu, lower, k, kj, x, b, bk, a1, a2, a3, N0, N1)
            # coefficient-by-coefficient in N_j^t and powers of 1/(k - k_j)
            eps = sp.Symbol("eps")
            g = sp.expand(sp.simplify(got.subs(k, kj + eps) * sp.exp(-(-1 if lower else 1) * 2 * sp.I * kj * x)))
            w = sp.expand(sp.simplify(want.subs(k, kj + eps) * sp.exp(-(-1 if lower else 1) * 2 * sp.I * kj * x)))
            for Nt in (N0, N1):
                for m in (1, 2):
                    cg = g.coeff(Nt).coeff(eps, -m)
                    cw = w.coeff(Nt).coeff(eps, -m)
                    checked += 1
                    if sp.simplify(cg - cw) != 0:
                        mismatches.append((nu, lower, str(Nt), m, cg, cw))
            if sp.simplify(got - want) != 0:
                mismatches.append((nu, lower, "total"))
    ok = not mismatches
    report(10, ok, f"{checked} coefficients compared, mismatches {mismatches}")
    assert ok
