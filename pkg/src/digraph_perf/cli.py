"""Command-line front end.

Exit codes: 0 success, 1 input or I/O error, 2 unstable, 3 assumption
violated, 4 decomposition failure, 5 oracle mismatch. Errors are reported as a
single JSON line on standard error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, oracle
from .closed_form import Dynamics, Output, PerformanceQuery, performance
from .errors import DigraphPerfError, InvalidQuery
from .graph import (
    FAMILIES,
    WeightedDigraph,
    build_laplacian,
    deviation_from_average_output,
    family_laplacian,
    hermitian_part,
)
from .inputs import Covariance, Deterministic, IdentityCovariance
from .spectral import decompose, import_jordan, jordan_from_json
from .stability import GainSet, check_assumptions

EXIT_ORACLE_MISMATCH = 5
COMMANDS = ("compute", "compare", "sweep-omega", "sweep-gamma", "star-complete", "oracle-check")


@dataclass
class RunConfig:
    command: str
    graph: str | None = None
    jordan: str | None = None
    dynamics: str = "first"
    output: str = "position"
    gains: str | None = None
    C: str = "dav"
    input: str = "identity"
    out: str | None = None
    n: int | None = None
    n_min: int = 2
    n_max: int = 49
    kp: float | None = None
    kd: float | None = None
    gd: float | None = None
    gamma_p: str = "0:20:41"
    dt: float | None = None
    rtol: float = 1e-8
    rk4: bool = True

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidQuery(f"unknown command {self.command!r}")
        if self.command in ("compute", "compare", "sweep-gamma", "oracle-check") and not self.graph:
            raise InvalidQuery("--graph is required for this command")
        if self.command in ("sweep-omega", "star-complete", "compute", "compare", "oracle-check"):
            second = self.dynamics == "second"
            if second and self.gains is None:
                raise InvalidQuery("--gains kp,kd,gp,gd is required for second-order networks")
            if not second and self.gains is not None:
                raise InvalidQuery("--gains only applies to second-order networks")


def _fmt(x: float) -> float | str:
    return float(x) if np.isfinite(x) else str(x)


def _read_json(path: str):
    return json.loads(Path(path).read_text())


def load_graph(source: str, jordan: str | None = None):
    """Return ``(L, spectral data loader)`` for a family shorthand or graph JSON file."""
    name = source.split(":", 1)[0].strip().lower()
    if ":" in source and name in FAMILIES:
        L = family_laplacian(source)
        hint = source
    else:
        L = build_laplacian(WeightedDigraph.from_json(_read_json(source)))
        hint = None

    def spectral():
        if jordan:
            eig, sizes, R = jordan_from_json(_read_json(jordan))
            return import_jordan(L, eig, sizes, R)
        return decompose(L, hint)

    return L, spectral


def load_output_matrix(spec: str, n: int) -> np.ndarray:
    if spec == "dav":
        return deviation_from_average_output(n)
    data = _read_json(spec)
    if isinstance(data, dict):
        data = data.get("C", data)
    return np.atleast_2d(np.asarray(data, dtype=float))


def load_input(spec: str):
    if spec == "identity":
        return IdentityCovariance()
    kind, _, path = spec.partition(":")
    if not path:
        raise InvalidQuery(f"bad input specification {spec!r}")
    data = _read_json(path)
    if kind == "w0":
        if isinstance(data, dict):
            data = data.get("w0", data)
        return Deterministic(np.asarray(data, dtype=float))
    if kind == "sigma0":
        if isinstance(data, dict):
            data = data.get("Sigma0", data.get("sigma0", data))
        return Covariance(np.asarray(data, dtype=float))
    raise InvalidQuery(f"bad input specification {spec!r}")


def _gains(cfg: RunConfig) -> GainSet | None:
    return GainSet.parse(cfg.gains) if cfg.gains is not None else None


def _query(cfg: RunConfig, n: int) -> PerformanceQuery:
    gains = _gains(cfg)
    C = load_output_matrix(cfg.C, n)
    check_assumptions(gains, C)
    return PerformanceQuery(cfg.dynamics, C, cfg.output, gains, load_input(cfg.input))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def oracle_check(cfg: RunConfig) -> tuple[dict, bool]:
    """Closed form, Gramian and (optionally) RK4 values for one query."""
    L, spectral = load_graph(cfg.graph, cfg.jordan)
    query = _query(cfg, L.shape[0])
    S = spectral()
    closed = performance(L, S, query).value
    ss = oracle.assemble(L, query.gains, query.dynamics, query.output, query.C)
    d = oracle.deflate(ss, S)
    inp = query.input
    if isinstance(inp, IdentityCovariance):
        gram = oracle.h2_norm(d)
        directions = np.eye(L.shape[0])
    elif isinstance(inp, Deterministic):
        gram = oracle.l2_response(d, inp.w0)
        directions = inp.w0
    else:
        gram = oracle.covariance_response(d, inp.sigma0)
        directions = oracle.psd_factor(inp.sigma0)
    report = {"closed_form": closed, "gramian": gram, "rel_closed_gramian": _rel(closed, gram)}
    if cfg.rk4:
        rk4 = oracle.simulate_impulse(ss, directions, dt=cfg.dt)
        report.update(rk4=rk4, rel_closed_rk4=_rel(closed, rk4), rel_gramian_rk4=_rel(gram, rk4))
    ok = report["rel_closed_gramian"] <= cfg.rtol
    report["pass"] = ok
    return report, ok


def run(cfg: RunConfig) -> int:
    """Dispatch one command and return its exit status."""
    try:
        return _dispatch(cfg)
    except DigraphPerfError as exc:
        _error(exc, exc.exit_code)
        return exc.exit_code
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _error(exc, 1)
        return 1


def _error(exc: Exception, code: int) -> None:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")


def _dispatch(cfg: RunConfig) -> int:
    if cfg.command == "compute":
        L, spectral = load_graph(cfg.graph, cfg.jordan)
        query = _query(cfg, L.shape[0])
        result = performance(L, spectral(), query)
        _emit(json.dumps(result.to_json()) + "\n", cfg.out)
        return 0
    if cfg.command == "compare":
        L, _ = load_graph(cfg.graph)
        query = _query(cfg, L.shape[0])
        report = analysis.compare_directed_undirected(L, query)
        _emit(json.dumps(report.to_json()) + "\n", cfg.out)
        return 0
    if cfg.command == "oracle-check":
        report, ok = oracle_check(cfg)
        _emit(json.dumps(report) + "\n", cfg.out)
        return 0 if ok else EXIT_ORACLE_MISMATCH
    if cfg.command == "sweep-omega":
        if cfg.n is None or cfg.n < 3:
            raise InvalidQuery("--n >= 3 is required for sweep-omega")
        gains = _gains(cfg)
        C = load_output_matrix(cfg.C, cfg.n)
        check_assumptions(gains, C)
        rows = analysis.omega_sweep(cfg.n, gains, cfg.dynamics, cfg.output, C)
        _emit(analysis.to_csv(rows, "omega"), cfg.out)
        return 0
    if cfg.command == "star-complete":
        gains = _gains(cfg)
        if gains is not None:
            check_assumptions(gains, deviation_from_average_output(max(cfg.n_min, 2)))
        rows = analysis.star_vs_complete(range(cfg.n_min, cfg.n_max + 1), gains, cfg.dynamics, cfg.output)
        _emit(analysis.to_csv(rows, "star"), cfg.out)
        return 0
    if cfg.command == "sweep-gamma":
        if None in (cfg.kp, cfg.kd, cfg.gd):
            raise InvalidQuery("--kp, --kd and --gd are required for sweep-gamma")
        L, _ = load_graph(cfg.graph)
        C = load_output_matrix(cfg.C, L.shape[0])
        try:
            start, stop, num = cfg.gamma_p.split(":")
            grid = np.linspace(float(start), float(stop), int(num))
        except ValueError as exc:
            raise InvalidQuery(f"--gamma-p expects start:stop:num, got {cfg.gamma_p!r}") from exc
        # relative position gain varies along the sweep; check the smallest one
        check_assumptions(GainSet(cfg.kp, cfg.kd, float(grid.min()), cfg.gd), C)
        rows = analysis.gamma_sweep(L, hermitian_part(L), cfg.kp, cfg.kd, cfg.gd, grid, cfg.output, C)
        _emit(analysis.to_csv(rows, "gamma"), cfg.out)
        return 0
    raise InvalidQuery(f"unknown command {cfg.command!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="digraph-perf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def query_args(sp, graph=True):
        if graph:
            sp.add_argument("--graph", required=True,
                            help="graph JSON file or family shorthand (cycle:n,d,omega | star:n | path:n | complete:n)")
        sp.add_argument("--dynamics", choices=[d.value for d in Dynamics], default="first")
        sp.add_argument("--output", choices=[o.value for o in Output], default="position")
        sp.add_argument("--gains", help="kp,kd,gp,gd (second order only)")
        sp.add_argument("--C", dest="C", default="dav", help="'dav' or a JSON file with the output matrix")
        sp.add_argument("--out", help="write result here instead of stdout")

    for name in ("compute", "compare", "oracle-check"):
        sp = sub.add_parser(name)
        query_args(sp)
        sp.add_argument("--input", default="identity", help="identity | w0:FILE | sigma0:FILE")
        if name != "compare":
            sp.add_argument("--jordan", help="JSON file with explicit Jordan data")
        if name == "oracle-check":
            sp.add_argument("--dt", type=float, help="RK4 step (default from the spectral radius)")
            sp.add_argument("--rtol", type=float, default=1e-8, help="closed form vs Gramian tolerance")
            sp.add_argument("--no-rk4", dest="rk4", action="store_false", help="skip the time-domain oracle")

    sp = sub.add_parser("sweep-omega")
    query_args(sp, graph=False)
    sp.add_argument("--n", type=int, required=True)

    sp = sub.add_parser("star-complete")
    query_args(sp, graph=False)
    sp.add_argument("--n-min", type=int, default=2)
    sp.add_argument("--n-max", type=int, default=49)

    sp = sub.add_parser("sweep-gamma")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--output", choices=[o.value for o in Output], default="position")
    sp.add_argument("--C", dest="C", default="dav")
    sp.add_argument("--kp", type=float, required=True)
    sp.add_argument("--kd", type=float, required=True)
    sp.add_argument("--gd", type=float, required=True)
    sp.add_argument("--gamma-p", dest="gamma_p", default="0:20:41", help="grid start:stop:num")
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 1
    try:
        cfg = RunConfig(**vars(ns))
    except DigraphPerfError as exc:
        _error(exc, exc.exit_code)
        return exc.exit_code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
