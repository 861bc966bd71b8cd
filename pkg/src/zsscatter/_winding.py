"""Adaptive argument-increment tracking along closed curves."""

from __future__ import annotations

from typing import Callable

import numpy as np

MAX_JUMP = np.pi / 6


def arg_increment(f: Callable, path: Callable, n0: int = 128, max_points: int = 200_000):
    """Total change of ``arg f`` along ``path(t)``, ``t`` in [0, 1], in units of 2*pi.

    Intervals are bisected until the phase jump and the log-modulus jump
    between neighbours are both small, so a zero close to the path cannot
    slip between two samples unnoticed.  Returns ``(winding, min|f|, scale)``
    where ``scale`` is the median modulus on the path.
    """
    t = np.linspace(0.0, 1.0, n0 + 1)
    v = np.asarray(f(path(t)), dtype=complex)
    while True:
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("non-finite function value on the path")
        ratio = v[1:] / np.where(v[:-1] == 0, np.nan, v[:-1])
        dphi = np.angle(ratio)
        dmod = np.abs(np.log(np.abs(ratio)))
        bad = ~np.isfinite(dphi) | (np.abs(dphi) > MAX_JUMP) | (dmod > 0.5)
        if not np.any(bad) or len(t) > max_points:
            break
        if np.any(~np.isfinite(dphi)):
            break
        mid = 0.5 * (t[:-1][bad] + t[1:][bad])
        vm = np.asarray(f(path(mid)), dtype=complex)
        t = np.concatenate([t, mid])
        v = np.concatenate([v, vm])
        order = np.argsort(t, kind="stable")
        t, v = t[order], v[order]
    mod = np.abs(v)
    return float(np.nansum(dphi) / (2 * np.pi)), float(mod.min()), float(np.median(mod))


def rectangle_path(re0: float, re1: float, im0: float, im1: float) -> Callable:
    """Counter-clockwise boundary of a rectangle, parametrized by t in [0, 1]."""
    corners = np.array([re0 + 1j * im0, re1 + 1j * im0, re1 + 1j * im1, re0 + 1j * im1, re0 + 1j * im0])

    def path(t):
        t = np.asarray(t, dtype=float)
        s = np.clip(t * 4, 0, 4 - 1e-15)
        i = s.astype(int)
        frac = s - i
        return corners[i] + frac * (corners[i + 1] - corners[i])

    return path
