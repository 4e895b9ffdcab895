"""Command-line front end.

Subcommands ``classify``, ``spectrum``, ``bari`` and ``string`` read a JSON
problem configuration and write a JSON result bundle (or a CSV table for
``spectrum``).  Complex numbers are written as ``[re, im]``.

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 boundary conditions not canonicalizable, 4 too many localization
failures, 5 conditions not strictly regular, 6 degenerate string boundary.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import bari as _bari
from .bc import (
    CanonicalBC, DiracWeights, RawBC, TOL_SA, adjoint_bc, canonicalize, classify_strict,
    is_regular, is_self_adjoint,
)
from .damped_string import StringProblem, reduce, similarity_residual, string_bari_condition
from .det0 import SpectrumWindow, derive_sequences, zeros
from .errors import (
    DegenerateBoundary, Inapplicable, LocalizationFailure, NotCanonicalizable, NotRegular,
)
from .perturbed import (
    EIG_TOL, Potential, eigenfunction, grid_size_for, perturbed_zeros, require_localized,
)

EXIT_OK, EXIT_PANIC, EXIT_CONFIG, EXIT_CANON, EXIT_LOCALIZE, EXIT_STRICT, EXIT_STRING = range(7)

TOLERANCE_KEYS = ("sa_tol", "eig_tol")


class ConfigError(ValueError):
    """The configuration could not be parsed or validated."""


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# JSON helpers


def cx(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def parse_complex(v, what: str = "value") -> complex:
    if isinstance(v, bool):
        raise ConfigError(f"{what}: expected a number or [re, im]")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{what}: expected a number or [re, im], got {v!r}")


def _num(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ProblemConfig:
    weights: DiracWeights
    weights_spec: dict
    bc_raw: np.ndarray | None = None
    bc_canonical: CanonicalBC | None = None
    potential: Potential = field(default_factory=Potential.zero)
    potential_spec: object = "zero"
    window: SpectrumWindow = field(default_factory=lambda: SpectrumWindow(16))
    grid: int | None = None
    tolerances: dict = field(default_factory=dict)
    string: StringProblem | None = None
    string_spec: dict | None = None

    @property
    def sa_tol(self) -> float:
        return self.tolerances.get("sa_tol", TOL_SA)

    @property
    def eig_tol(self) -> float:
        return self.tolerances.get("eig_tol", EIG_TOL)

    def canonical(self) -> CanonicalBC:
        if self.bc_canonical is not None:
            return self.bc_canonical
        if self.bc_raw is None:
            raise ConfigError("no boundary conditions given")
        return canonicalize(RawBC(self.bc_raw))

    def echo(self) -> dict:
        out: dict = {"weights": self.weights_spec}
        if self.bc_canonical is not None:
            out["bc"] = {"canonical": [cx(v) for v in self.bc_canonical.coefficients()]}
        elif self.bc_raw is not None:
            out["bc"] = {"raw": [[cx(v) for v in row] for row in self.bc_raw]}
        out["potential"] = self.potential_spec
        if self.window.re_range is not None:
            out["window"] = {"re_range": list(self.window.re_range)}
        else:
            out["window"] = {"n_side": self.window.n_side}
        if self.grid is not None:
            out["grid"] = self.grid
        if self.tolerances:
            out["tolerances"] = dict(self.tolerances)
        if self.string_spec is not None:
            out["string"] = self.string_spec
        return out


def _parse_weights(spec) -> tuple[DiracWeights, dict]:
    if spec is None or spec == "dirac":
        return DiracWeights.dirac(), {"rational": [1, 1, 1.0]}
    if not isinstance(spec, dict):
        raise ConfigError("weights must be \"dirac\" or an object")
    if "rational" in spec:
        r = spec["rational"]
        if not (isinstance(r, list) and len(r) in (2, 3)):
            raise ConfigError("weights.rational must be [n1, n2] or [n1, n2, b0]")
        n1, n2 = int(r[0]), int(r[1])
        b0 = float(r[2]) if len(r) == 3 else 1.0
        w = DiracWeights.from_rational(n1, n2, b0)
        return w, {"rational": [n1, n2, b0]}
    if "b1" in spec and "b2" in spec:
        w = DiracWeights(float(spec["b1"]), float(spec["b2"]))
        return w, {"b1": w.b1, "b2": w.b2}
    raise ConfigError("weights needs b1 and b2 or a rational triple")


def _parse_bc(spec):
    if not isinstance(spec, dict) or len(spec) != 1 or not ({"raw", "canonical"} & set(spec)):
        raise ConfigError("bc must be exactly one of {\"raw\": ...} or {\"canonical\": ...}")
    if "canonical" in spec:
        v = spec["canonical"]
        if not (isinstance(v, list) and len(v) == 4):
            raise ConfigError("bc.canonical must list a, b, c, d")
        return None, CanonicalBC(*(parse_complex(t, "bc.canonical") for t in v))
    rows = spec["raw"]
    if not (isinstance(rows, list) and len(rows) == 2 and all(
            isinstance(r, list) and len(r) == 4 for r in rows)):
        raise ConfigError("bc.raw must be a 2x4 matrix")
    A = np.array([[parse_complex(t, "bc.raw") for t in r] for r in rows], dtype=complex)
    return A, None


def _builtin_potential(name: str, params: dict) -> Potential:
    if name == "constant":
        return Potential.constant(parse_complex(params.get("q12", 0), "q12"),
                                  parse_complex(params.get("q21", 0), "q21"))
    if name == "exponential":
        g12 = parse_complex(params.get("q12", 0), "q12")
        g21 = parse_complex(params.get("q21", 0), "q21")
        k = float(params.get("k", 0.0))
        return Potential.from_callables(lambda x: g12 * np.exp(1j * k * x),
                                        lambda x: g21 * np.exp(-1j * k * x))
    raise ConfigError(f"unknown builtin potential {name!r} (constant, exponential)")


def read_potential_csv(path) -> Potential:
    """CSV with columns ``x, Re q12, Im q12, Re q21, Im q21``; a header line is optional."""
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read potential file: {exc}") from exc
    with fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                vals = [float(t) for t in row]
            except ValueError:
                if i == 0:
                    continue
                raise ConfigError(f"{path}: non-numeric row {i + 1}")
            if len(vals) != 5:
                raise ConfigError(f"{path}: row {i + 1} needs 5 columns")
            rows.append(vals)
    a = np.array(rows)
    if a.shape[0] < 2:
        raise ConfigError(f"{path}: need at least two rows")
    try:
        return Potential.sampled(a[:, 0], a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_potential(spec, base: Path) -> tuple[Potential, object]:
    if spec is None or spec == "zero":
        return Potential.zero(), "zero"
    if isinstance(spec, dict) and len(spec) >= 1:
        if "builtin" in spec and "file" not in spec:
            params = spec.get("params", {})
            if not isinstance(params, dict):
                raise ConfigError("potential.params must be an object")
            return _builtin_potential(spec["builtin"], params), {"builtin": spec["builtin"],
                                                                 "params": params}
        if "file" in spec and "builtin" not in spec:
            p = Path(spec["file"])
            return read_potential_csv(p if p.is_absolute() else base / p), {"file": spec["file"]}
    raise ConfigError("potential must be \"zero\", {\"builtin\": ...} or {\"file\": ...}")


def _parse_window(spec) -> SpectrumWindow:
    if spec is None:
        return SpectrumWindow(16)
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("window must be {\"n_side\": int} or {\"re_range\": [lo, hi]}")
    try:
        if "n_side" in spec:
            return SpectrumWindow(int(spec["n_side"]))
        lo, hi = spec["re_range"]
        return SpectrumWindow(re_range=(float(lo), float(hi)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad window: {exc}") from exc


def _parse_coefficient(v, what: str):
    if isinstance(v, dict):
        try:
            return (np.asarray(v["x"], dtype=float),
                    np.array([parse_complex(t, what) for t in v["values"]]))
        except KeyError as exc:
            raise ConfigError(f"{what} samples need x and values") from exc
    return parse_complex(v, what)


def _parse_string(spec) -> StringProblem:
    if not isinstance(spec, dict):
        raise ConfigError("string must be an object")
    try:
        return StringProblem(float(spec["beta1"]), float(spec["beta2"]),
                             _parse_coefficient(spec.get("a1", 0), "a1"),
                             _parse_coefficient(spec.get("a2", 0), "a2"),
                             parse_complex(spec.get("h0", 0), "h0"),
                             parse_complex(spec.get("h1", 0), "h1"),
                             parse_complex(spec.get("h2", 1), "h2"))
    except KeyError as exc:
        raise ConfigError(f"string needs {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad string problem: {exc}") from exc


KNOWN_KEYS = {"weights", "bc", "potential", "window", "grid", "tolerances", "string"}


def parse_config(data: dict, base: Path | str = ".") -> ProblemConfig:
    """Validate a decoded JSON configuration."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    try:
        w, wspec = _parse_weights(data.get("weights"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raw, canon = _parse_bc(data["bc"]) if "bc" in data else (None, None)
    q, qspec = _parse_potential(data.get("potential"), Path(base))
    win = _parse_window(data.get("window"))
    grid = data.get("grid")
    if grid is not None:
        if not isinstance(grid, int) or isinstance(grid, bool) or grid < 3 or grid % 2 == 0:
            raise ConfigError("grid must be an odd integer >= 3")
    tols = data.get("tolerances", {})
    if not isinstance(tols, dict):
        raise ConfigError("tolerances must be an object")
    for k, v in tols.items():
        if k not in TOLERANCE_KEYS:
            raise ConfigError(f"unknown tolerance {k!r} (allowed: {', '.join(TOLERANCE_KEYS)})")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"tolerance {k} must be positive")
    sspec = data.get("string")
    sp = _parse_string(sspec) if sspec is not None else None
    return ProblemConfig(w, wspec, raw, canon, q, qspec, win, grid,
                         {k: float(v) for k, v in tols.items()}, sp, sspec)


def load_config(path) -> ProblemConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(data, path.parent)


# ---------------------------------------------------------------------------
# commands


def _versions() -> dict:
    out = {}
    for pkg in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def bundle(command: str, cfg: ProblemConfig, payload: dict, t0: float) -> dict:
    return {"command": command, "config": cfg.echo(), "versions": _versions(),
            "timing_s": time.perf_counter() - t0, "payload": payload}


def _canonical_or_fail(cfg: ProblemConfig) -> CanonicalBC:
    try:
        return cfg.canonical()
    except NotCanonicalizable as exc:
        raise CliFailure(EXIT_CANON, str(exc)) from exc


def cmd_classify(cfg: ProblemConfig) -> dict:
    t0 = time.perf_counter()
    bc = _canonical_or_fail(cfg)
    w = cfg.weights
    regular = is_regular(bc)
    strict = classify_strict(bc, w).label() if regular else None
    adj = canonicalize(adjoint_bc(bc, w)) if regular else None
    payload = {
        "canonical": [cx(v) for v in bc.coefficients()],
        "regular": regular,
        "strictly_regular": strict,
        "self_adjoint": is_self_adjoint(bc, w, cfg.sa_tol),
        "adjoint_bc": [cx(v) for v in adj.coefficients()] if adj is not None else None,
    }
    return bundle("classify", cfg, payload, t0)


SPECTRUM_COLUMNS = ("n", "re", "im", "multiplicity", "residual", "method")
PERTURBED_COLUMNS = ("re0", "im0", "drift")


def cmd_spectrum(cfg: ProblemConfig, perturbed: bool = False) -> dict:
    t0 = time.perf_counter()
    bc = _canonical_or_fail(cfg)
    w = cfg.weights
    if not is_regular(bc):
        raise CliFailure(EXIT_STRICT, "boundary conditions are not regular")
    rows = []
    if perturbed:
        spec = perturbed_zeros(bc, w, cfg.potential, cfg.window)
        try:
            require_localized(spec)
        except LocalizationFailure as exc:
            raise CliFailure(EXIT_LOCALIZE, str(exc)) from exc
        ref = {z.index: z.value for z in spec.reference}
        for z in spec.zeros:
            r = ref[z.index]
            rows.append({"n": z.index, "re": z.value.real, "im": z.value.imag,
                         "multiplicity": z.multiplicity, "residual": z.residual,
                         "method": z.method.value, "re0": r.real, "im0": r.imag,
                         "drift": abs(z.value - r)})
        failures = list(spec.failures)
    else:
        for z in zeros(bc, w, cfg.window):
            rows.append({"n": z.index, "re": z.value.real, "im": z.value.imag,
                         "multiplicity": z.multiplicity, "residual": z.residual,
                         "method": z.method.value})
        failures = []
    columns = SPECTRUM_COLUMNS + (PERTURBED_COLUMNS if perturbed else ())
    return bundle("spectrum", cfg, {"columns": list(columns), "rows": rows,
                                    "failures": failures}, t0)


def spectrum_csv(result: dict) -> str:
    """CSV text of a spectrum payload; floats in shortest round-trip form."""
    payload = result["payload"]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(payload["columns"])
    for row in payload["rows"]:
        wr.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                     for c in payload["columns"]])
    return buf.getvalue()


def _diag_row(dg) -> dict:
    return {"n": dg.n, "lambda": cx(dg.lam), "alpha": _num(dg.alpha), "defect": _num(dg.defect),
            "z": cx(dg.z), "im_lambda": dg.lam.imag,
            "tau": [_num(t) for t in dg.tau] if dg.tau_available else None,
            "norm_f": dg.norm_f, "norm_g": dg.norm_g, "inner_fg": cx(dg.inner_fg)}


def cmd_bari(cfg: ProblemConfig, p: float = 2.0) -> dict:
    t0 = time.perf_counter()
    if not 1.0 <= p <= 2.0:
        raise ConfigError("p must lie in [1, 2]")
    bc = _canonical_or_fail(cfg)
    w = cfg.weights
    try:
        strict = classify_strict(bc, w)
    except NotRegular as exc:
        raise CliFailure(EXIT_STRICT, str(exc)) from exc
    if not strict.verdict.is_yes:
        raise CliFailure(EXIT_STRICT, f"not strictly regular: {strict.label()}")
    zs = zeros(bc, w, cfg.window)
    verdict = _bari.bari_c0_check(bc, w, zs, derive_sequences(zs, bc, w))
    if cfg.potential.is_zero:
        diags = _bari.unperturbed_diagnostics(bc, w, zs, cfg.grid)
    else:
        spec = perturbed_zeros(bc, w, cfg.potential, cfg.window)
        try:
            require_localized(spec)
        except LocalizationFailure as exc:
            raise CliFailure(EXIT_LOCALIZE, str(exc)) from exc
        diags = _bari.perturbed_diagnostics(bc, w, cfg.potential, spec.zeros, cfg.grid,
                                            tol=cfg.eig_tol)
    sums = _bari.closeness_sums(diags, p)
    payload = {
        "strictly_regular": strict.label(),
        "verdict": {
            "verdict": verdict.verdict.value, "route": verdict.route,
            "ratio_ok": verdict.ratio_ok, "im_trend": verdict.im_trend,
            "z_trend": verdict.z_trend, "im_ok": verdict.im_ok, "z_ok": verdict.z_ok,
            "self_adjoint": verdict.self_adjoint,
        },
        "pairs": [_diag_row(dg) for dg in diags],
        "closeness": {"p": p, "p_dual": _num(sums.p_dual), "levels": sums.levels.tolist(),
                      "partial_sums": sums.partial_sums.tolist(), "tail_sup": sums.tail_sup},
    }
    return bundle("bari", cfg, payload, t0)


def cmd_string(cfg: ProblemConfig, n_pairs: int = 5) -> dict:
    t0 = time.perf_counter()
    sp = cfg.string
    if sp is None:
        raise ConfigError("string subcommand needs a \"string\" section")
    try:
        red = reduce(sp, cfg.grid or 2049)
    except DegenerateBoundary as exc:
        raise CliFailure(EXIT_STRING, str(exc)) from exc
    bc, w = red.canonical_bc, red.weights
    try:
        cond, reason = string_bari_condition(sp, red), None
    except Inapplicable as exc:
        cond, reason = None, str(exc)
    payload = {
        "weights": {"b1": w.b1, "b2": w.b2},
        "canonical": [cx(v) for v in bc.coefficients()],
        "w1_at_1": cx(red.w1_at_1), "w2_at_1": cx(red.w2_at_1), "w_at_1": cx(red.w_at_1),
        "q": {"zero": red.q.is_zero, "sup_norm": red.q.sup_norm(), "l2_norm": red.q.l2_norm()},
        "c_small": red.c_small,
        "bari_condition": cond,
        "bari_condition_note": reason,
        "spectrum": [],
    }
    if is_regular(bc):
        win = SpectrumWindow(int((cfg.string_spec or {}).get("window", max(1, n_pairs // 2))))
        spec = perturbed_zeros(bc, w, red.q, win)
        near = sorted(spec.zeros, key=lambda z: (abs(z.index), z.index))[:n_pairs]
        m = grid_size_for([z.value for z in near] or [0], w, red.q)
        resid = {}
        for z in near:
            ef = eigenfunction(z.value, bc, w, red.q, m, tol=cfg.eig_tol)
            resid[z.index] = similarity_residual(sp, red, ef)
        for z in spec.zeros:
            row = {"n": z.index, "lambda": cx(z.value), "residual": z.residual}
            if z.index in resid:
                row["similarity_residual"] = resid[z.index]
            payload["spectrum"].append(row)
    return bundle("string", cfg, payload, t0)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diracbari",
        description="Spectra and basis diagnostics for 2x2 Dirac-type boundary value problems.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "classify": "regularity, strict regularity and self-adjointness of the conditions",
        "spectrum": "eigenvalues in a window",
        "bari": "pair diagnostics and the Bari-type verdict",
        "string": "reduce a damped string problem and report its spectrum",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="JSON problem configuration")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--window", type=int, help="override window n_side")
        sp.add_argument("--grid", type=int, help="override eigenfunction grid size")
        if name == "spectrum":
            sp.add_argument("--perturbed", action="store_true",
                            help="include the configured potential")
        if name == "bari":
            sp.add_argument("--p", type=float, default=2.0,
                            help="sequence-space exponent in [1, 2] for closeness sums")
    return parser


def run(argv=None) -> tuple[int, str, str | None]:
    """Run the CLI; return ``(exit code, output text, output path)`` without writing."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), "", None
    try:
        cfg = load_config(args.config)
        if args.window is not None:
            if args.window < 1:
                raise ConfigError("--window must be >= 1")
            cfg.window = SpectrumWindow(args.window)
            if cfg.string_spec is not None:
                cfg.string_spec = dict(cfg.string_spec, window=args.window)
        if args.grid is not None:
            if args.grid < 3 or args.grid % 2 == 0:
                raise ConfigError("--grid must be an odd integer >= 3")
            cfg.grid = args.grid
        if args.format == "csv" and args.command != "spectrum":
            raise ConfigError("csv output is only available for spectrum")
        if args.command == "classify":
            result = cmd_classify(cfg)
        elif args.command == "spectrum":
            result = cmd_spectrum(cfg, args.perturbed)
        elif args.command == "bari":
            result = cmd_bari(cfg, args.p)
        else:
            result = cmd_string(cfg)
    except ConfigError as exc:
        return EXIT_CONFIG, f"error: {exc}\n", None
    except CliFailure as exc:
        return exc.code, f"error: {exc}\n", None
    if args.format == "csv":
        text = spectrum_csv(result)
    else:
        text = json.dumps(result, indent=2) + "\n"
    return EXIT_OK, text, args.out


def main(argv=None) -> int:
    code, text, out = run(argv)
    if code != EXIT_OK:
        sys.stderr.write(text)
    elif out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
