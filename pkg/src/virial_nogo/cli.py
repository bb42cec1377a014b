"""Command-line front end.

Exit codes: 0 success, 1 numerical non-convergence, 2 input error.  Every
JSON document carries ``schema_version`` and floats are written with 17
significant digits (non-finite values become ``null``).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bundle import BundleError, load_bundle, save_bundle
from .lattice_fields import (
    THREADS_ENV,
    BoundaryContaminationError,
    DEFAULT_DECAY_TOL,
    GaugeGroup,
    ScalarGaugeConfig,
    compute_functionals,
)
from .potential_dsl import (
    PotentialDomainError,
    PotentialSyntaxError,
    classify,
    parse_potential,
)
from .qball_solver import (
    NonConvergent,
    NoSignChange,
    RadialProfile,
    exact_log_qball,
    profile_description,
    profile_to_config,
    shoot,
)
from .scaling_analysis import (
    DEFAULT_TOL_VIRIAL,
    TERM_NAMES,
    NonStaticConfigError,
    dispatch_theorem_cases,
    finite_difference_consistency,
    lambda_sweep,
    static_virial_derivative,
    virial_derivative,
)
from .vector_theory import (
    VectorConfig,
    compute_vector_functionals,
    harmonic_rigidity_check,
    helmholtz_diagnostics,
    vector_virial_derivative,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_NONCONVERGENT, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# JSON with fixed float formatting


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj) + 0.0  # no "-0"
        return format(x, ".17g") if math.isfinite(x) else "null"
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def emit(payload: dict, out: Optional[str] = None) -> None:
    text = dumps({"schema_version": SCHEMA_VERSION, **payload}) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# helpers


def _potential(text: str):
    return parse_potential(text)


def _positive(name: str, value: float) -> float:
    if not value > 0:
        raise InputError(f"{name} must be positive")
    return value


def _load(path: str):
    p = Path(path)
    if not p.is_dir():
        raise InputError(f"bundle directory {path!r} not found")
    return load_bundle(p)


def _load_scalar(path: str) -> ScalarGaugeConfig:
    cfg = _load(path)
    if not isinstance(cfg, ScalarGaugeConfig):
        raise InputError("command needs a scalar_gauge bundle")
    return cfg


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format(float(v) + 0.0, ".17g") for v in row) + "\n")


def _write_profile(profile: RadialProfile, out: str) -> dict:
    _write_csv(out, ("r", "f"), zip(profile.r, profile.f))
    desc = profile_description(profile)
    Path(out).with_suffix(".json").write_text(dumps({"schema_version": SCHEMA_VERSION, **desc}) + "\n")
    return desc


def _read_profile(csv_path: str) -> RadialProfile:
    p = Path(csv_path)
    side = p.with_suffix(".json")
    if not p.is_file() or not side.is_file():
        raise InputError(f"need {p} and its sidecar {side}")
    data = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(side.read_text())
    return RadialProfile(
        r=data[:, 0],
        f=data[:, 1],
        omega=float(meta["omega"]),
        f0=float(meta["f0"]),
        potential=parse_potential(meta["potential_text"]),
        node_count=int(meta.get("node_count", 0)),
        meta={"residual_max": meta.get("residual_max")},
    )


# ---------------------------------------------------------------------------
# commands


def cmd_classify(args) -> int:
    expr = _potential(args.potential)
    v = classify(expr, _positive("s_max", args.s_max), args.n_samples)
    emit(v.to_dict())
    return EXIT_OK


def cmd_functionals(args) -> int:
    cfg = _load(args.bundle)
    if isinstance(cfg, VectorConfig):
        fns = compute_vector_functionals(cfg, args.decay_tol)
        emit({"theory": "vector", "functionals": fns.to_dict()})
        return EXIT_OK
    pot = _potential(args.potential) if args.potential else None
    fns = compute_functionals(cfg, pot, args.decay_tol, threads=args.threads)
    emit({"theory": "scalar_gauge", "functionals": fns.to_dict()})
    return EXIT_OK


def cmd_virial(args) -> int:
    cfg = _load_scalar(args.bundle)
    pot = _potential(args.potential)
    fns = compute_functionals(cfg, pot, args.decay_tol, threads=args.threads)
    reports = [virial_derivative(fns, g, args.tol_virial).to_dict() for g in args.gamma]
    payload = {"functionals": fns.to_dict(), "reports": reports}
    if args.certify:
        verdict = classify(pot)
        cert = dispatch_theorem_cases(fns, verdict)
        payload["verdict"] = verdict.to_dict()
        payload["certificate"] = None if cert is None else cert.to_dict()
    if args.sweep_csv:
        lams = args.lambdas or list(np.linspace(0.9, 1.1, 21))
        for lam in lams:
            _positive("lambda", lam)
        rows = lambda_sweep(fns, pot, cfg, args.gamma[0], lams)
        _write_csv(args.sweep_csv, ("lambda", "S") + TERM_NAMES,
                   ([r["lambda"], r["S"]] + [r[k] for k in TERM_NAMES] for r in rows))
        payload["sweep_csv"] = args.sweep_csv
    emit(payload)
    return EXIT_OK


def cmd_static_virial(args) -> int:
    cfg = _load_scalar(args.bundle)
    pot = _potential(args.potential)
    fns = compute_functionals(cfg, pot, args.decay_tol, threads=args.threads)
    d = static_virial_derivative(fns, args.gamma, args.beta)
    emit({"gamma": args.gamma, "beta": args.beta, "derivative": d, "functionals": fns.to_dict()})
    return EXIT_OK


def cmd_qball(args) -> int:
    pot = _potential(args.potential)
    lo, hi = args.bracket
    prof = shoot(pot, _positive("omega", args.omega), (lo, hi), R=args.R, dr=args.dr, node_count=args.nodes)
    emit({"profile_csv": args.out, **_write_profile(prof, args.out)})
    return EXIT_OK


def cmd_exact_log_qball(args) -> int:
    prof = exact_log_qball(
        _positive("q1", args.q1), _positive("q2", args.q2), args.omega, R=args.R, dr=args.dr
    )
    emit({"profile_csv": args.out, **_write_profile(prof, args.out)})
    return EXIT_OK


def cmd_embed_profile(args) -> int:
    prof = _read_profile(args.profile)
    group = GaugeGroup.su2() if args.group == "SU(2)" else GaugeGroup.u1()
    cfg = profile_to_config(prof, args.n_x, _positive("box_L", args.box_L), args.n_t, group)
    save_bundle(args.out, cfg)
    emit({"bundle": args.out, "grid": cfg.grid.to_dict(), "group": group.name})
    return EXIT_OK


def cmd_vector_check(args) -> int:
    cfg = _load(args.bundle)
    if not isinstance(cfg, VectorConfig):
        raise InputError("vector-check needs a vector bundle")
    fns = compute_vector_functionals(cfg, args.decay_tol)
    payload = {
        "functionals": fns.to_dict(),
        "virial": [vector_virial_derivative(fns, b).to_dict() for b in args.beta],
    }
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        payload["helmholtz"] = helmholtz_diagnostics(cfg).to_dict()
        if args.rigidity:
            payload["rigidity"] = harmonic_rigidity_check(cfg, tol=args.tol, decay_tol=args.decay_tol).to_dict()
    payload["warnings"] = sorted({str(w.message) for w in caught})
    emit(payload)
    return EXIT_OK


def cmd_fd_check(args) -> int:
    cfg = _load_scalar(args.bundle)
    pot = _potential(args.potential)
    fns = compute_functionals(cfg, pot, args.decay_tol, threads=args.threads)
    checks = [finite_difference_consistency(cfg, pot, g, args.h, fns).to_dict() for g in args.gamma]
    emit({"checks": checks})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="virial-nogo", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (overrides ${THREADS_ENV})")
    p.add_argument("--deterministic", action="store_true",
                   help="bit-identical reductions across thread counts (always on)")
    sub = p.add_subparsers(dest="command", required=True)

    def add_decay(sp):
        sp.add_argument("--decay-tol", type=float, default=DEFAULT_DECAY_TOL)

    sp = sub.add_parser("classify", help="no-go verdict for a potential V(s)")
    sp.add_argument("potential")
    sp.add_argument("--s-max", type=float, default=10.0)
    sp.add_argument("--n-samples", type=int, default=4096)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("functionals", help="action functionals of a field bundle")
    sp.add_argument("bundle")
    sp.add_argument("--potential", default=None)
    add_decay(sp)
    sp.set_defaults(func=cmd_functionals)

    sp = sub.add_parser("virial", help="scaling derivative for each gamma")
    sp.add_argument("bundle")
    sp.add_argument("potential")
    sp.add_argument("--gamma", type=float, nargs="+", default=[1.0])
    sp.add_argument("--tol-virial", type=float, default=DEFAULT_TOL_VIRIAL)
    sp.add_argument("--sweep-csv", default=None, help="write S(lambda) for the first gamma")
    sp.add_argument("--lambda", dest="lambdas", type=float, nargs="+", default=None)
    sp.add_argument("--certify", action="store_true", help="classify the potential and attach a certificate")
    add_decay(sp)
    sp.set_defaults(func=cmd_virial)

    sp = sub.add_parser("static-virial", help="static rescaling derivative")
    sp.add_argument("bundle")
    sp.add_argument("potential")
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--beta", type=float, default=-2.0)
    add_decay(sp)
    sp.set_defaults(func=cmd_static_virial)

    sp = sub.add_parser("qball", help="shoot a radial Q-ball profile")
    sp.add_argument("potential")
    sp.add_argument("--omega", type=float, required=True)
    sp.add_argument("--bracket", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    sp.add_argument("--R", type=float, default=None)
    sp.add_argument("--dr", type=float, default=1e-3)
    sp.add_argument("--nodes", type=int, default=0)
    sp.add_argument("--out", required=True, help="profile CSV; sidecar JSON written next to it")
    sp.set_defaults(func=cmd_qball)

    sp = sub.add_parser("exact-log-qball", help="closed-form Gaussian profile of the log potential")
    sp.add_argument("--q1", type=float, default=1.0)
    sp.add_argument("--q2", type=float, default=1.0)
    sp.add_argument("--omega", type=float, default=1.0)
    sp.add_argument("--R", type=float, default=12.0)
    sp.add_argument("--dr", type=float, default=1e-3)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_exact_log_qball)

    sp = sub.add_parser("embed-profile", help="embed a radial profile as a lattice bundle")
    sp.add_argument("profile", help="profile CSV with JSON sidecar")
    sp.add_argument("--n-x", type=int, default=64)
    sp.add_argument("--box-L", type=float, default=16.0)
    sp.add_argument("--n-t", type=int, default=32)
    sp.add_argument("--group", choices=("U(1)", "SU(2)"), default="U(1)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_embed_profile)

    sp = sub.add_parser("vector-check", help="vector-sector functionals and diagnostics")
    sp.add_argument("bundle")
    sp.add_argument("--beta", type=float, nargs="+", default=[1.5])
    sp.add_argument("--rigidity", action="store_true")
    sp.add_argument("--tol", type=float, default=1e-8)
    add_decay(sp)
    sp.set_defaults(func=cmd_vector_check)

    sp = sub.add_parser("fd-check", help="closed-form vs finite-difference scaling derivative")
    sp.add_argument("bundle")
    sp.add_argument("potential")
    sp.add_argument("--gamma", type=float, nargs="+", default=[1.0])
    sp.add_argument("--h", type=float, default=1e-3)
    add_decay(sp)
    sp.set_defaults(func=cmd_fd_check)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        os.environ[THREADS_ENV] = str(args.threads)
    for name in ("decay_tol", "tol_virial", "tol", "h"):
        if getattr(args, name, 1.0) <= 0:
            parser.error(f"--{name.replace('_', '-')} must be positive")
    try:
        return args.func(args)
    except PotentialSyntaxError as exc:
        print(f"error: syntax error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonConvergent as exc:
        print(f"error: no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENT
    except (InputError, BundleError, BoundaryContaminationError, NonStaticConfigError,
            NoSignChange, PotentialDomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
