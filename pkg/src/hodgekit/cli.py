"""Command line front end: ``hodgekit <info|decompose|spectrum|green|expand|verify>``.

Exit codes: 0 ok, 1 property failure, 2 input error, 3 rank/kernel
disagreement, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from . import meshgen, spectral, verify
from .cochain import SCHEMES, Cochain, CochainSpace, OperatorSet, mass_matrix
from .hodge import betti, decompose, harmonic_basis
from .linsolve import NumericalError
from .mesh import MeshError, SimplicialComplex, read_off, write_off

OK, PROPERTY_FAILURE, INPUT_ERROR, DISAGREEMENT, NUMERICAL_FAILURE = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    mesh: str
    scheme: str = "combinatorial"
    degrees: Optional[list[int]] = None
    modes: Optional[int] = None
    threshold: float = 1e-8
    out: Optional[str] = None
    seed: int = 0

    def validate(self, K: SimplicialComplex) -> list[int]:
        if self.scheme not in SCHEMES:
            raise CliError(f"unknown scheme {self.scheme!r}", INPUT_ERROR)
        if self.modes is not None and self.modes < 0:
            raise CliError("--modes must be non-negative", INPUT_ERROR)
        if not 0.0 < self.threshold < 1.0:
            raise CliError("--threshold must lie in (0, 1)", INPUT_ERROR)
        degrees = list(range(K.dim + 1)) if self.degrees is None else self.degrees
        for p in degrees:
            if not 0 <= p <= K.dim:
                raise CliError(f"degree {p} outside 0..{K.dim}", INPUT_ERROR)
        return degrees


def load_mesh(spec: str) -> SimplicialComplex:
    """Read an OFF file, or a bundled mesh given as ``builtin:NAME``."""
    try:
        if spec.startswith("builtin:"):
            return meshgen.bundled(spec.split(":", 1)[1])
        return read_off(spec)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read mesh {spec!r}: {exc}", INPUT_ERROR) from exc


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HODGEKIT_THREADS", "1")))
    except ValueError:
        return 1


def _per_degree(fn, degrees):
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(fn, degrees))


def _emit(text: str, out: Optional[str]):
    if not text.endswith("\n"):
        text += "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _operators(cfg: RunConfig, K: SimplicialComplex) -> OperatorSet:
    try:
        return OperatorSet.build(K, cfg.scheme)
    except MeshError as exc:
        raise CliError(str(exc), INPUT_ERROR) from exc


def _cochain(path: Optional[str], ops: OperatorSet, degree: Optional[int], seed: int) -> Cochain:
    """Read a cochain file, or draw a seeded random one; ``degree`` (if given) must match."""
    if path is None:
        degree = 0 if degree is None else degree
        rng = np.random.default_rng(seed)
        return Cochain(degree, rng.standard_normal(ops.count(degree)))
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        probe = json.loads(text)
        p = int(probe["degree"])
        if not 0 <= p <= ops.dim:
            raise ValueError(f"degree {p} not present in a {ops.dim}-complex")
        a = Cochain.from_json(text, count=ops.count(p))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"bad cochain file {path!r}: {exc}", INPUT_ERROR) from exc
    if degree is not None and a.degree != degree:
        raise CliError(f"cochain degree {a.degree} does not match --degree {degree}", INPUT_ERROR)
    return a


# ---------------------------------------------------------------------------
# commands

def cmd_info(cfg: RunConfig) -> int:
    K = load_mesh(cfg.mesh)
    degrees = cfg.validate(K)
    ops = _operators(cfg, K)
    b = [betti(K, p) for p in degrees]
    h = _per_degree(lambda p: harmonic_basis(ops, p, cfg.threshold).dim, degrees)
    agree = b == h
    report = {
        "mesh": cfg.mesh,
        "scheme": cfg.scheme,
        "counts": list(K.counts()),
        "degrees": degrees,
        "betti": b,
        "harmonic_dims": h,
        "agree": agree,
    }
    _emit(json.dumps(report), cfg.out)
    return OK if agree else DISAGREEMENT


def cmd_decompose(cfg: RunConfig, cochain_path: Optional[str]) -> int:
    K = load_mesh(cfg.mesh)
    cfg.validate(K)
    ops = _operators(cfg, K)
    a = _cochain(cochain_path, ops, cfg.degrees[0] if cfg.degrees else None, cfg.seed)
    split = decompose(ops, harmonic_basis(ops, a.degree, cfg.threshold), a)
    _emit(split.to_json(), cfg.out)
    return OK if split.residual <= ops.tol.decomposition else NUMERICAL_FAILURE


def cmd_green(cfg: RunConfig, cochain_path: Optional[str]) -> int:
    K = load_mesh(cfg.mesh)
    cfg.validate(K)
    ops = _operators(cfg, K)
    a = _cochain(cochain_path, ops, cfg.degrees[0] if cfg.degrees else None, cfg.seed)
    sol = spectral.green(ops, harmonic_basis(ops, a.degree, cfg.threshold), a)
    _emit(sol.to_json(), cfg.out)
    return OK if sol.residual <= ops.tol.green else NUMERICAL_FAILURE


def _trace(ops, cfg, cochain_path):
    a = _cochain(cochain_path, ops, cfg.degrees[0] if cfg.degrees else None, cfg.seed)
    basis = harmonic_basis(ops, a.degree, cfg.threshold)
    spec = spectral.spectrum(ops, basis)
    return spectral.trace_csv(spectral.expansion_trace(ops, spec, basis, a))


def cmd_spectrum(cfg: RunConfig, expansion_csv: Optional[str] = None,
                 cochain_path: Optional[str] = None) -> int:
    K = load_mesh(cfg.mesh)
    degrees = cfg.validate(K)
    ops = _operators(cfg, K)

    def one(p):
        basis = harmonic_basis(ops, p, cfg.threshold)
        k = cfg.modes
        if k is not None and k > ops.count(p) - basis.dim:
            raise CliError(f"--modes {k} exceeds the {ops.count(p) - basis.dim} nonzero modes of degree {p}",
                           INPUT_ERROR)
        return json.loads(spectral.spectrum(ops, basis, p, k).to_json())

    out = _per_degree(one, degrees)
    _emit(json.dumps(out[0] if len(out) == 1 else out), cfg.out)
    if expansion_csv:
        _emit(_trace(ops, cfg, cochain_path), expansion_csv)
    return OK


def cmd_expand(cfg: RunConfig, cochain_path: Optional[str]) -> int:
    K = load_mesh(cfg.mesh)
    cfg.validate(K)
    ops = _operators(cfg, K)
    _emit(_trace(ops, cfg, cochain_path), cfg.out)
    return OK


def corrupted_operators(K: SimplicialComplex, scheme: str) -> OperatorSet:
    """Operators whose degree-0 mass has been made non-symmetric (fault injection)."""
    spaces = [mass_matrix(K, p, scheme) for p in range(K.dim + 1)]
    M = spaces[0].mass.tolil()
    M[0, 1] = 0.5 * M[0, 0]
    spaces[0] = CochainSpace(0, spaces[0].count, sparse.csr_matrix(M), scheme)
    return OperatorSet(K, spaces, check=False)


def cmd_verify(cfg: RunConfig, samples: int = 50, schemes: Optional[Sequence[str]] = None,
               corrupt: bool = False) -> int:
    if cfg.mesh:
        meshes = {cfg.mesh: load_mesh(cfg.mesh)}
    else:
        meshes = {f"builtin:{name}": meshgen.bundled(name) for name in meshgen.BUNDLED}
    schemes = list(schemes or SCHEMES)
    if corrupt:
        report = verify.Report()
        for name, K in meshes.items():
            for scheme in schemes:
                report.results.extend(verify.verify_ops(name, corrupted_operators(K, scheme), cfg.seed, samples))
    else:
        report = verify.run_suite(meshes, schemes, cfg.seed, samples)
    _emit(report.to_json(), cfg.out)
    return OK if report.ok else PROPERTY_FAILURE


def cmd_genmesh(name: str, out: Optional[str]) -> int:
    try:
        K = meshgen.bundled(name)
    except ValueError as exc:
        raise CliError(str(exc), INPUT_ERROR) from exc
    _emit(write_off(K), out)
    return OK


# ---------------------------------------------------------------------------

def _degree_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad degree list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh", help="OFF file or builtin:NAME")
    common.add_argument("--scheme", choices=SCHEMES, help="mass scheme (default combinatorial)")
    common.add_argument("--degree", type=_degree_list, help="degree or comma separated degrees")
    common.add_argument("--modes", type=int, help="number of nonzero modes")
    common.add_argument("--threshold", type=float, default=1e-8, help="relative kernel cutoff")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (default stdout)")

    parser = argparse.ArgumentParser(prog="hodgekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="{info,decompose,spectrum,green,expand,verify}")
    sub.add_parser("info", parents=[common], help="simplex counts, Betti numbers, harmonic dimensions")
    for name, text in (("decompose", "Hodge split of a cochain"),
                       ("green", "apply the Green operator"),
                       ("expand", "eigen-expansion residual trace as CSV")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--cochain", help="cochain JSON (default: seeded random)")
    p = sub.add_parser("spectrum", parents=[common], help="nonzero Laplacian spectrum")
    p.add_argument("--expansion-csv", help="also write the expansion trace here")
    p.add_argument("--cochain", help="cochain for the expansion trace")
    p = sub.add_parser("verify", parents=[common], help="run the property suite")
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--corrupt-mass", action="store_true", help=argparse.SUPPRESS)
    p = sub.add_parser("genmesh")
    p.add_argument("name", choices=sorted(meshgen.BUNDLED))
    p.add_argument("--out")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "genmesh":
            return cmd_genmesh(args.name, args.out)
        if args.command != "verify" and not args.mesh:
            raise CliError("--mesh is required", INPUT_ERROR)
        cfg = RunConfig(args.mesh, args.scheme or "combinatorial", args.degree, args.modes, args.threshold, args.out, args.seed)
        if args.command == "info":
            return cmd_info(cfg)
        if args.command == "decompose":
            return cmd_decompose(cfg, args.cochain)
        if args.command == "green":
            return cmd_green(cfg, args.cochain)
        if args.command == "expand":
            return cmd_expand(cfg, args.cochain)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, args.expansion_csv, args.cochain)
        schemes = [args.scheme] if args.scheme else None
        return cmd_verify(cfg, args.samples, schemes, args.corrupt_mass)
    except CliError as exc:
        print(f"hodgekit: {exc}", file=sys.stderr)
        return exc.code
    except NumericalError as exc:
        print(f"hodgekit: numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
