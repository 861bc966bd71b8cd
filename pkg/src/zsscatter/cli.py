"""Command-line front end.

Every command reads JSON input files, writes one artifact (JSON by default,
CSV where a table makes sense) and embeds the resolved configuration in it.
Exit codes: 0 success, 2 input/schema error, 3 numerical failure,
4 contract violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .contour_ode import build_contour
from .discrete import ReconstructionInput, cpair
from .errors import ContractViolation, NumericalError, SpecError
from .potentials import Symmetry, classify_symmetry, make_potential
from .reconstruct import recover_potentials, roundtrip
from .scattering import (
    ScatteringData,
    check_symmetry_relations,
    reflectionless_test,
    scatter_grid,
    schrodinger_form,
    stokes_matrices,
    to_csv,
)
from .spectrum import DEFAULT_REGION, extract_discrete_data

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_CONTRACT = 0, 2, 3, 4

COMMANDS = ("scatter", "spectrum", "reconstruct", "roundtrip", "check-symmetry", "classify", "schrodinger-form")


@dataclass
class RunConfig:
    command: str
    potential: str | None = None
    data: str | None = None
    k: list = field(default_factory=list)
    x: list = field(default_factory=list)
    region: tuple = DEFAULT_REGION
    contour_c: float = 1.0
    contour_L: float = 20.0
    margin: float = 0.05
    tol: float = 1e-6
    symmetry: str | None = None
    out: str | None = None
    format: str = "json"

    def to_json(self) -> dict:
        d = asdict(self)
        d["k"] = [cpair(v) for v in self.k]
        d["x"] = [float(v) for v in self.x]
        d["region"] = [float(v) for v in self.region]
        return d


def parse_grid(text: str, real: bool = False) -> list:
    """``"a,b,c"`` or ``"start:stop:count"`` (inclusive linspace)."""
    text = text.strip()
    conv = float if real else (lambda s: complex(s.replace(" ", "")))
    try:
        if ":" in text:
            a, b, n = text.split(":")
            vals = np.linspace(float(a), float(b), int(n))
            return [conv(repr(float(v))) for v in vals]
        return [conv(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise SpecError(f"cannot parse grid {text!r}: {exc}") from exc


def parse_region(text: str) -> tuple[float, float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise SpecError(f"cannot parse region {text!r}") from exc
    if len(vals) != 4:
        raise SpecError("region needs four numbers re0,re1,im0,im1")
    return vals  # type: ignore[return-value]


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path} is not valid JSON: {exc}") from exc


def _load_potential(cfg: RunConfig):
    if not cfg.potential:
        raise SpecError(f"{cfg.command} needs --potential")
    return make_potential(_read_json(cfg.potential))


def _load_data(cfg: RunConfig) -> ReconstructionInput:
    path = cfg.data or cfg.potential
    if not path:
        raise SpecError("reconstruct needs --data (discrete-data JSON)")
    obj = _read_json(path)
    if "result" in obj and isinstance(obj["result"], dict):
        obj = obj["result"]  # output of the spectrum command
    return ReconstructionInput.from_json(obj)


def _contour(cfg: RunConfig, p):
    return build_contour(p, cfg.contour_c, cfg.contour_L, cfg.margin)


def _need_k(cfg: RunConfig) -> list:
    if not cfg.k:
        raise SpecError(f"{cfg.command} needs --k")
    if any(complex(k) == 0 for k in cfg.k):
        raise ContractViolation("k = 0 is excluded")
    return cfg.k


def _mat(m: np.ndarray) -> list:
    return [[cpair(v) for v in row] for row in m]


def _records(grid) -> list:
    return [g.to_json() for g in grid]


# commands -----------------------------------------------------------------


def cmd_scatter(cfg: RunConfig):
    p = _load_potential(cfg)
    ks = _need_k(cfg)
    c = _contour(cfg, p)
    grid = scatter_grid(p, ks, c)
    if cfg.format == "csv":
        return to_csv(grid)
    return {"contour": c.to_json(), "records": _records(grid)}


def cmd_spectrum(cfg: RunConfig):
    p = _load_potential(cfg)
    c = _contour(cfg, p)
    upper = extract_discrete_data(p, c, cfg.region)
    lower = extract_discrete_data(p, c, cfg.region, lower=True)
    return ReconstructionInput(tuple(upper), tuple(lower)).to_json()


def cmd_reconstruct(cfg: RunConfig):
    data = _load_data(cfg)
    xs = cfg.x or list(np.linspace(-5, 5, 101))
    s = recover_potentials(data, xs)
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "q_re", "q_im", "r_re", "r_im"])
        for xv, qv, rv in s.rows():
            w.writerow([repr(float(v)) for v in (xv, qv.real, qv.imag, rv.real, rv.imag)])
        return buf.getvalue()
    return {
        "samples": [{"x": float(xv), "q": cpair(qv) if np.isfinite(qv) else None,
                     "r": cpair(rv) if np.isfinite(rv) else None} for xv, qv, rv in s.rows()],
        "pole_candidates": s.pole_candidates,
        "coefficient_table": s.coefficient_table,
    }


def cmd_roundtrip(cfg: RunConfig):
    p = _load_potential(cfg)
    c = _contour(cfg, p)
    ks = [k.real for k in cfg.k] if cfg.k else [0.5, 1.0, 2.0]
    rep = roundtrip(p, c, cfg.region, ks=ks, tol=cfg.tol)
    return rep.to_json()


def _partners(ks: Sequence[complex], sym: Symmetry) -> list[complex]:
    out = list(dict.fromkeys(complex(k) for k in ks))
    for k in list(out):
        partner = np.conj(k) if sym in (Symmetry.R_EQ_CONJ_Q, Symmetry.R_EQ_NEG_CONJ_Q) else -k
        if complex(partner) not in out:
            out.append(complex(partner))
    return out


def cmd_check_symmetry(cfg: RunConfig):
    p = _load_potential(cfg)
    sym = Symmetry(cfg.symmetry) if cfg.symmetry else p.symmetry
    if sym is Symmetry.NONE:
        raise ContractViolation("potential has no declared symmetry; pass --symmetry")
    ks = _partners(_need_k(cfg), sym)
    c = _contour(cfg, p)
    grid = scatter_grid(p, ks, c)
    dev = check_symmetry_relations(grid, sym)
    return {"symmetry": sym.value, "max_deviation": dev, "k": [cpair(k) for k in ks]}


def cmd_classify(cfg: RunConfig):
    p = _load_potential(cfg)
    ks = _need_k(cfg)
    if any(complex(k).imag != 0 for k in ks):
        raise ContractViolation("classify needs real k")
    c = _contour(cfg, p)
    grid = scatter_grid(p, ks, c)
    ok = [g for g in grid if isinstance(g, ScatteringData)]
    report = reflectionless_test(ok, cfg.tol)
    stokes = []
    for g in ok:
        sm, sp_ = stokes_matrices(g)
        stokes.append({"k": cpair(g.k), "S_minus": _mat(sm), "S_plus": _mat(sp_)})
    sym = classify_symmetry(p, np.linspace(-3.1, 3.3, 17))
    return {
        "reflectionless": report.to_json(),
        "stokes": stokes,
        "symmetry": sym.value,
        "failures": [g.to_json() for g in grid if not isinstance(g, ScatteringData)],
    }


def cmd_schrodinger_form(cfg: RunConfig):
    p = _load_potential(cfg)
    sf = schrodinger_form(p)
    xs = np.asarray(cfg.x or [0.5, 1.0, 2.0], dtype=complex)
    u1, u2 = sf.u1_eval(xs), sf.u2_eval(xs)
    return {
        "report": sf.report(),
        "samples": [{"x": cpair(xv), "u1": cpair(a), "u2": cpair(b)} for xv, a, b in zip(xs, u1, u2)],
    }


_DISPATCH = {
    "scatter": cmd_scatter,
    "spectrum": cmd_spectrum,
    "reconstruct": cmd_reconstruct,
    "roundtrip": cmd_roundtrip,
    "check-symmetry": cmd_check_symmetry,
    "classify": cmd_classify,
    "schrodinger-form": cmd_schrodinger_form,
}


def _emit(cfg: RunConfig, payload) -> str:
    if isinstance(payload, str):
        header = "# config: " + json.dumps(cfg.to_json(), sort_keys=True) + "\n"
        return header + payload
    doc = {"command": cfg.command, "config": cfg.to_json(), "result": payload, "version": __version__}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False, default=_fallback) + "\n"


def _fallback(obj):
    if isinstance(obj, complex):
        return cpair(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _write(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status."""
    try:
        if cfg.format not in ("json", "csv"):
            raise SpecError(f"unknown format {cfg.format!r}")
        if cfg.tol <= 0:
            raise SpecError("tol must be positive")
        payload = _DISPATCH[cfg.command](cfg)
        if isinstance(payload, str) and cfg.format != "csv":
            raise SpecError("internal: csv payload for json output")
        if cfg.format == "csv" and not isinstance(payload, str):
            raise SpecError(f"{cfg.command} has no CSV form; use --format json")
        _write(cfg, _emit(cfg, payload))
        return EXIT_OK
    except SpecError as exc:
        code = EXIT_INPUT
        err = exc
    except ContractViolation as exc:
        code = EXIT_CONTRACT
        err = exc
    except NumericalError as exc:
        code = EXIT_NUMERICAL
        err = exc
    report = {"error": type(err).__name__, "message": str(err)}
    print(f"{cfg.command}: {type(err).__name__}: {err}", file=sys.stderr)
    if cfg.format == "json":
        _write(cfg, _emit(cfg, report))
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zsscatter", description="Zakharov-Shabat forward and inverse scattering.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("--potential", help="potential constructor JSON file")
        sp_.add_argument("--data", help="discrete-data JSON file (reconstruct)")
        sp_.add_argument("--k", help="k grid: list 'a,b,c' or 'start:stop:count'")
        sp_.add_argument("--x", help="x grid: list or 'start:stop:count'")
        sp_.add_argument("--region", help="re0,re1,im0,im1")
        sp_.add_argument("--contour-c", type=float, default=1.0)
        sp_.add_argument("--contour-L", type=float, default=20.0)
        sp_.add_argument("--margin", type=float, default=0.05)
        sp_.add_argument("--tol", type=float, default=1e-6)
        sp_.add_argument("--symmetry", choices=[s.value for s in Symmetry if s is not Symmetry.NONE])
        sp_.add_argument("--out")
        sp_.add_argument("--format", choices=("csv", "json"), default="json")
        sp_.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        potential=ns.potential,
        data=ns.data,
        k=parse_grid(ns.k) if ns.k else [],
        x=parse_grid(ns.x, real=True) if ns.x else [],
        region=parse_region(ns.region) if ns.region else DEFAULT_REGION,
        contour_c=ns.contour_c,
        contour_L=ns.contour_L,
        margin=ns.margin,
        tol=ns.tol,
        symmetry=ns.symmetry,
        out=ns.out,
        format=ns.format,
    )


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
    except SpecError as exc:
        print(f"{ns.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
