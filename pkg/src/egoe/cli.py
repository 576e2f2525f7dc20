"""``egoe`` command line: analytic tables, densities, moments, survival curves.

Exit codes: 0 success, 1 usage error, 2 more than 1% of members failed.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import (
    SystemParams,
    fourth_moment_V,
    gamma2_asymptotic,
    gamma2_finite,
    variance_H0,
    variance_V,
)
from .dynamics import averaged_survival
from .ensemble import EnsembleConfig, member_hamiltonian
from .fock import dump_matrix, sp_energies
from .io import (
    ANALYTIC_COLUMNS,
    DENSITY_COLUMNS,
    MOMENTS_COLUMNS,
    STRENGTH_COLUMNS,
    SURVIVAL_COLUMNS,
    write_csv,
    write_manifest,
)
from .spectral import chi2_distance, ensemble_density, model_columns

log = logging.getLogger("egoe")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
FAILURE_THRESHOLD = 0.01

# defaults reproduce the reference quench run: N=10, m=5, lambda=0.5, 1000 members, delta=0.01
DEFAULTS = {
    "N": 10,
    "m": 5,
    "k": "2..5",
    "lambda": 0.5,
    "members": 1000,
    "seed": 20170101,
    "delta": 0.01,
    "tmax": 4.0,
    "nt": 400,
    "bins": 50,
    "range": "-3.5,3.5",
    "normalize": "unit",
    "pure_interaction": False,
    "threads": 1,
    "out": None,
    "dump_matrices": False,
}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    N: int
    m: int
    ks: list
    lam: float
    members: int
    seed: int
    delta: float
    tmax: float
    nt: int
    bins: int
    range: tuple
    normalize: str
    pure_interaction: bool
    threads: int
    out: str | None
    config_file: str | None = None
    dump_matrices: bool = False
    raw: dict = field(default_factory=dict)

    def params(self, k: int) -> SystemParams:
        return SystemParams(self.N, self.m, k, self.lam)

    def ensemble(self, k: int, pure: bool | None = None) -> EnsembleConfig:
        pure = self.pure_interaction if pure is None else pure
        return EnsembleConfig(self.params(k), self.members, self.seed, pure)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.tmax, self.nt)

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("raw")
        d["range"] = list(self.range)
        return d


def parse_k(spec) -> list[int]:
    """'3' -> [3], '2..5' or '2-5' -> [2, 3, 4, 5], '1,3,5' -> [1, 3, 5]."""
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        return [int(x) for x in spec]
    s = str(spec).strip()
    try:
        for sep in ("..", "-"):
            if sep in s:
                lo, hi = s.split(sep)
                ks = list(range(int(lo), int(hi) + 1))
                break
        else:
            ks = [int(x) for x in s.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse k specification {spec!r}") from None
    if not ks:
        raise UsageError(f"empty k range {spec!r}")
    return ks


def parse_range(spec) -> tuple[float, float]:
    if isinstance(spec, (list, tuple)):
        lo, hi = spec
    else:
        try:
            lo, hi = (float(x) for x in str(spec).split(","))
        except ValueError:
            raise UsageError(f"--range expects LO,HI, got {spec!r}") from None
    if not lo < hi:
        raise UsageError("--range needs LO < HI")
    return float(lo), float(hi)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--N", type=int, help="number of single-particle levels")
    common.add_argument("--m", type=int, help="number of fermions")
    common.add_argument("--k", help="interaction rank: K, K1..K2 or K1,K2,...")
    common.add_argument("--lambda", dest="lambda", type=float, help="quench strength")
    common.add_argument("--members", type=int, help="ensemble size")
    common.add_argument("--seed", type=int, help="64-bit base seed")
    common.add_argument("--delta", type=float, help="initial-state energy window width")
    common.add_argument("--tmax", type=float, help="last time point (normalized units)")
    common.add_argument("--nt", type=int, help="number of time points")
    common.add_argument("--bins", type=int, help="histogram bins")
    common.add_argument("--range", help="histogram range LO,HI in normalized energy")
    common.add_argument("--normalize", choices=("unit", "dim"), help="density normalization")
    common.add_argument(
        "--pure-interaction",
        dest="pure_interaction",
        action="store_true",
        help="drop H0 and use lambda V(k) alone",
    )
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument(
        "--dump-matrices",
        dest="dump_matrices",
        action="store_true",
        help="write member 0's Hamiltonian per k as a binary dump",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = _Parser(prog="egoe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"egoe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analytic", parents=[common], help="closed-form moments and sigma0^2")
    sub.add_parser("density", parents=[common], help="ensemble eigenvalue densities")
    sub.add_parser("moments", parents=[common], help="numeric vs analytic moments")
    sub.add_parser("survival", parents=[common], help="post-quench survival probability")
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Merge defaults < config file < flags and validate."""
    merged = dict(DEFAULTS)
    config_file = getattr(ns, "config", None)
    if config_file:
        try:
            with open(config_file) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {config_file}: {exc}") from None
        unknown = set(from_file) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(from_file)
    for key in DEFAULTS:
        if hasattr(ns, key):
            merged[key] = getattr(ns, key)

    cfg = RunConfig(
        command=ns.command,
        N=int(merged["N"]),
        m=int(merged["m"]),
        ks=parse_k(merged["k"]),
        lam=float(merged["lambda"]),
        members=int(merged["members"]),
        seed=int(merged["seed"]),
        delta=float(merged["delta"]),
        tmax=float(merged["tmax"]),
        nt=int(merged["nt"]),
        bins=int(merged["bins"]),
        range=parse_range(merged["range"]),
        normalize=str(merged["normalize"]),
        pure_interaction=bool(merged["pure_interaction"]),
        threads=int(merged["threads"]),
        out=merged["out"],
        config_file=config_file,
        dump_matrices=bool(merged["dump_matrices"]),
        raw=merged,
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if not 1 <= cfg.N <= 63:
        raise UsageError("--N must be in [1, 63]")
    for k in cfg.ks:
        if not 1 <= k <= cfg.m <= cfg.N:
            raise UsageError(f"need 1 <= k <= m <= N, got k={k}, m={cfg.m}, N={cfg.N}")
    if cfg.lam < 0:
        raise UsageError("--lambda must be >= 0")
    if cfg.members < 1:
        raise UsageError("--members must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise UsageError("--seed must fit in 64 unsigned bits")
    if not cfg.delta > 0:
        raise UsageError("--delta must be positive")
    if cfg.nt < 2 or not cfg.tmax > 0:
        raise UsageError("--nt must be >= 2 and --tmax positive")
    if cfg.bins < 1:
        raise UsageError("--bins must be >= 1")
    if cfg.normalize not in ("unit", "dim"):
        raise UsageError("--normalize must be unit or dim")
    if cfg.threads < 1:
        raise UsageError("--threads must be >= 1")
    if cfg.command in ("density", "moments") and cfg.lam == 0 and cfg.pure_interaction:
        raise UsageError("pure-interaction spectra with lambda = 0 are degenerate")
    if cfg.command == "moments" and cfg.lam == 0:
        raise UsageError("moments need lambda > 0")
    if cfg.command == "survival" and cfg.lam == 0 and cfg.pure_interaction:
        raise UsageError("survival with lambda = 0 needs H0 (drop --pure-interaction)")


def analytic_row(cfg: RunConfig, k: int) -> dict:
    p = cfg.params(k)
    eps = sp_energies(cfg.N)
    s2h0 = 0.0 if cfg.pure_interaction else variance_H0(cfg.N, cfg.m, eps)
    s2v = variance_V(p)
    total = s2h0 + s2v
    return {
        "k": k,
        "sigma2_V": s2v,
        "m4_V": fourth_moment_V(p),
        "gamma2_finite": gamma2_finite(SystemParams(cfg.N, cfg.m, k, 1.0)),
        "gamma2_asymptotic": gamma2_asymptotic(k, cfg.m),
        "sigma2_H0": s2h0,
        "sigma0_sq": s2v / total if total > 0 else float("nan"),
    }


def cmd_analytic(cfg: RunConfig, out: Path | None = None) -> list[dict]:
    rows = [analytic_row(cfg, k) for k in cfg.ks]
    header = "  ".join(f"{c:>17}" for c in ANALYTIC_COLUMNS)
    print(header)
    for r in rows:
        print("  ".join(f"{r[c]:>17.10g}" for c in ANALYTIC_COLUMNS))
    if out is not None:
        write_csv(
            out / "analytic.csv",
            ANALYTIC_COLUMNS,
            [[r[c] for c in ANALYTIC_COLUMNS] for r in rows],
            _meta(cfg),
        )
    return rows


def _meta(cfg: RunConfig, **extra) -> dict:
    meta = {
        "tool": f"egoe {__version__}",
        "command": cfg.command,
        "N": cfg.N,
        "m": cfg.m,
        "lambda": cfg.lam,
        "members": cfg.members,
        "seed": cfg.seed,
        "pure_interaction": cfg.pure_interaction,
    }
    meta.update(extra)
    return meta


def _failure_rate(failures: list, members: int) -> float:
    return len(failures) / members


def _maybe_dump(cfg: RunConfig, out: Path, k: int, pure: bool) -> str | None:
    if not cfg.dump_matrices:
        return None
    H = member_hamiltonian(cfg.ensemble(k, pure), 0)
    path = out / f"matrix_k{k}_member0.bin"
    dump_matrix(path, H, cfg.N, cfg.m, k)
    return path.name


def cmd_density(cfg: RunConfig, out: Path, manifest: dict) -> int:
    lo, hi = cfg.range
    status = EXIT_OK
    d = math.comb(cfg.N, cfg.m)
    for k in cfg.ks:
        res = ensemble_density(cfg.ensemble(k), cfg.bins, lo, hi, cfg.threads)
        h, mom = res.histogram, res.moments
        centers = h.centers
        ed, sc = model_columns(centers, mom.gamma1, mom.gamma2)
        rho_unit = h.density("unit")
        chi_ed = chi2_distance(rho_unit, ed)
        chi_sc = chi2_distance(rho_unit, sc)
        scale = d if cfg.normalize == "dim" else 1.0
        rows = zip(centers, rho_unit * scale, ed * scale, sc * scale)
        name = f"density_k{k}.csv"
        write_csv(
            out / name,
            DENSITY_COLUMNS,
            rows,
            _meta(
                cfg,
                k=k,
                normalize=cfg.normalize,
                dim=d,
                gamma1=mom.gamma1,
                gamma2=mom.gamma2,
                underflow=h.underflow,
                overflow=h.overflow,
                chi2_ed_gaussian=chi_ed,
                chi2_semicircle=chi_sc,
            ),
        )
        manifest["outputs"].append(name)
        dumped = _maybe_dump(cfg, out, k, cfg.pure_interaction)
        if dumped:
            manifest["outputs"].append(dumped)
        manifest["results"][str(k)] = {
            "gamma1_numeric": mom.gamma1,
            "gamma2_numeric": mom.gamma2,
            "chi2_ed_gaussian": chi_ed,
            "chi2_semicircle": chi_sc,
            "closer": "ed_gaussian" if chi_ed < chi_sc else "semicircle",
            "underflow": h.underflow,
            "overflow": h.overflow,
        }
        manifest["failures"][str(k)] = res.failures
        log.info("density k=%d: gamma2=%.4f chi2 ED=%.3g SC=%.3g", k, mom.gamma2, chi_ed, chi_sc)
        if _failure_rate(res.failures, cfg.members) > FAILURE_THRESHOLD:
            status = EXIT_NUMERICAL
    return status


def cmd_moments(cfg: RunConfig, out: Path, manifest: dict) -> int:
    """Always pure interaction: the analytic columns describe lambda V(k) alone."""
    lo, hi = cfg.range
    status = EXIT_OK
    rows = []
    M = cfg.members
    for k in cfg.ks:
        res = ensemble_density(cfg.ensemble(k, pure=True), cfg.bins, lo, hi, cfg.threads)
        tr2, g2 = res.trace_v2, res.member_gamma2
        n = len(tr2)
        err = (lambda a: float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan"))
        p = cfg.params(k)
        row = {
            "k": k,
            "sigma2_numeric": float(tr2.mean()),
            "sigma2_numeric_err": err(tr2),
            "sigma2_analytic": variance_V(p),
            "gamma2_numeric": res.moments.gamma2,
            "gamma2_numeric_err": err(g2),
            "gamma2_finite": gamma2_finite(p),
            "gamma2_asymptotic": gamma2_asymptotic(k, cfg.m),
        }
        rows.append(row)
        manifest["results"][str(k)] = row
        manifest["failures"][str(k)] = res.failures
        if _failure_rate(res.failures, M) > FAILURE_THRESHOLD:
            status = EXIT_NUMERICAL
    write_csv(
        out / "moments.csv",
        MOMENTS_COLUMNS,
        [[r[c] for c in MOMENTS_COLUMNS] for r in rows],
        _meta(cfg, pure_interaction=True),
    )
    manifest["outputs"].append("moments.csv")
    return status


def cmd_survival(cfg: RunConfig, out: Path, manifest: dict) -> int:
    status = EXIT_OK
    lo, hi = cfg.range
    for k in cfg.ks:
        curve = averaged_survival(
            cfg.ensemble(k),
            delta=cfg.delta,
            times=cfg.times(),
            threads=cfg.threads,
            strength_bins=cfg.bins,
            strength_range=(lo, hi),
        )
        name = f"survival_k{k}.csv"
        write_csv(
            out / name,
            SURVIVAL_COLUMNS,
            zip(curve.times, curve.F_numeric, curve.F_sem, curve.F_gauss, curve.F_bessel),
            _meta(
                cfg,
                k=k,
                delta=cfg.delta,
                sigma0_sq=curve.sigma0_sq,
                sigma0_sq_numeric=curve.sigma0_sq_numeric,
                pairs=curve.pairs,
                fallbacks=curve.fallbacks,
            ),
        )
        st = curve.strength
        sname = f"strength_k{k}.csv"
        write_csv(
            out / sname,
            STRENGTH_COLUMNS,
            zip(st.centers, st.counts / st.widths),
            _meta(cfg, k=k, underflow_weight=st.underflow, overflow_weight=st.overflow),
        )
        manifest["outputs"] += [name, sname]
        dumped = _maybe_dump(cfg, out, k, cfg.pure_interaction)
        if dumped:
            manifest["outputs"].append(dumped)
        result = {
            "sigma0_sq": curve.sigma0_sq,
            "sigma0_sq_numeric": curve.sigma0_sq_numeric,
            "pairs": curve.pairs,
            "fallbacks": curve.fallbacks,
        }
        if curve.sigma0_sq > 0:
            result["max_dev_gauss"] = curve.max_deviation("gauss")
            result["max_dev_bessel"] = curve.max_deviation("bessel")
        manifest["results"][str(k)] = result
        manifest["failures"][str(k)] = curve.failures
        log.info("survival k=%d: %s", k, result)
        if _failure_rate(curve.failures, cfg.members) > FAILURE_THRESHOLD:
            status = EXIT_NUMERICAL
    return status


COMMANDS = {"density": cmd_density, "moments": cmd_moments, "survival": cmd_survival}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(ns)
    except (UsageError, ValueError) as exc:
        print(f"egoe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if cfg.command == "analytic":
        out = None
        if cfg.out is not None:
            out = Path(cfg.out)
            out.mkdir(parents=True, exist_ok=True)
        cmd_analytic(cfg, out)
        return EXIT_OK

    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "egoe",
        "version": __version__,
        "command": cfg.command,
        "config": cfg.echo(),
        "analytic": {str(k): analytic_row(cfg, k) for k in cfg.ks},
        "results": {},
        "failures": {},
        "outputs": [],
        "started_at": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    start = time.perf_counter()
    status = EXIT_NUMERICAL
    try:
        status = COMMANDS[cfg.command](cfg, out, manifest)
    except Exception as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest["wall_clock_seconds"] = time.perf_counter() - start
        manifest["exit_code"] = status
        manifest["status"] = "ok" if status == EXIT_OK else "failed"
        write_manifest(out / "manifest.json", manifest)
    return status


if __name__ == "__main__":
    sys.exit(main())
