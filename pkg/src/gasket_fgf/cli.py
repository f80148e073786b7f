"""Command-line front end.

Subcommands ``graph``, ``spectrum``, ``sample`` and ``lab`` write CSV/JSON
files plus a ``manifest.json``; ``replay`` re-runs a manifest.  Exit status is
0 when every pass flag is true, 1 when some check failed (the failure list is
printed to stderr as JSON) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import export, lab
from .constants import CRITICAL_S
from .fields import TestFunction, sample_ensemble
from .gasket import DEFAULT_LEVEL_CAP, DEFAULT_QUADRATURE_OFFSET, ResourceLimitError, build_graph
from .spectral import SPECTRAL_LEVEL_CAP, spectrum

OUT_ENV = "GASKET_FGF_OUT"
EXPERIMENTS = (
    "weyl", "riesz-regime", "semigroup", "quadform", "holder", "logcorr",
    "sobolev", "supnorm", "lipschitz", "eigsweep", "charfun", "voronoi", "heat",
)
# sample counts used by lab experiments when --n is not given
LAB_DEFAULT_N = {"holder": 200, "logcorr": 10_000, "sobolev": 200, "lipschitz": 100}
# config keys of the form tolerance.NAME override these lab constants
TOLERANCE_KEYS = {
    "weyl_slope": "WEYL_SLOPE_TOL",
    "weyl_ratio": "WEYL_RATIO_MAX",
    "subcritical_exponent": "SUBCRITICAL_EXPONENT_TOL",
    "log_r2": "LOG_FIT_MIN_R2",
    "bounded_sup": "BOUNDED_SUP_REL_TOL",
    "holder": "HOLDER_TOL",
    "supnorm_factor": "SUPNORM_LEVEL_FACTOR",
    "lipschitz_band": "LIPSCHITZ_SCALE_BAND",
}

log = logging.getLogger("gasket_fgf")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    m: int = 2
    s: float = 0.5
    seed: int = 0
    n: int = 1
    out: str = "out"
    cap: int = SPECTRAL_LEVEL_CAP
    offset: int = DEFAULT_QUADRATURE_OFFSET
    experiment: str | None = None
    t: float = 0.01
    m_lo: int | None = None
    j: int = 3
    ref_level: int = 7
    alpha: list[float] = field(default_factory=lambda: [0.3, 1.0])
    vectors: bool = False
    ensemble: bool = False
    tolerance: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


# ---------------------------------------------------------------- config

def read_config(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(cfg: RunConfig, key: str, value):
    if key.startswith("tolerance."):
        name = key.split(".", 1)[1]
        if name not in TOLERANCE_KEYS:
            raise UsageError(f"unknown tolerance {name!r}; known: {', '.join(TOLERANCE_KEYS)}")
        cfg.tolerance[name] = float(value)
        return
    if key not in RunConfig.__dataclass_fields__ or key == "command":
        raise UsageError(f"unknown config key {key!r}")
    current = getattr(cfg, key)
    if key == "alpha":
        value = [float(a) for a in str(value).split(",")] if isinstance(value, str) else list(value)
    elif key == "m_lo":
        value = None if value in (None, "", "none") else int(value)
    elif isinstance(current, bool):
        value = str(value).lower() in ("1", "true", "yes") if isinstance(value, str) else bool(value)
    elif isinstance(current, int):
        value = int(value)
    elif isinstance(current, float):
        value = float(value)
    setattr(cfg, key, value)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command, out=os.environ.get(OUT_ENV, "out"))
    if cfg.command == "lab":
        cfg.m = 6
        cfg.n = LAB_DEFAULT_N.get(args.experiment, cfg.n)
    if args.config:
        for k, v in read_config(args.config).items():
            _coerce(cfg, k, v)
    for key in RunConfig.__dataclass_fields__:
        v = getattr(args, key, None)
        if v is not None and key != "command":
            _coerce(cfg, key, v)
    if cfg.command == "lab":
        cfg.experiment = args.experiment
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.m < 0:
        raise UsageError("--m must be nonnegative")
    if cfg.n < 0:
        raise UsageError("--n must be nonnegative")
    if cfg.seed < 0:
        raise UsageError("--seed must be nonnegative")
    if cfg.s < 0:
        raise UsageError("--s must be nonnegative")
    if cfg.command == "graph" and cfg.m > max(cfg.cap, DEFAULT_LEVEL_CAP):
        raise UsageError(f"level {cfg.m} exceeds cap")
    if cfg.command in ("spectrum", "sample") and cfg.m > cfg.cap:
        raise UsageError(f"level {cfg.m} exceeds spectral cap {cfg.cap}")


# ---------------------------------------------------------------- commands

def cmd_graph(cfg: RunConfig, out: Path) -> tuple[list[Path], list[dict]]:
    g = build_graph(cfg.m, cap=max(cfg.cap, DEFAULT_LEVEL_CAP))
    print(f"V_{cfg.m}: {g.n_vertices} vertices, {len(g.edges)} edges")
    return export.write_graph(g, out), []


def cmd_spectrum(cfg: RunConfig, out: Path) -> tuple[list[Path], list[dict]]:
    if cfg.m == 0:
        raise UsageError("level 0 has no interior vertices")
    sp = spectrum(cfg.m, cap=cfg.cap)
    print(f"lambda_1^{cfg.m} = {float(sp.eigenvalues[0])!r}  N_{cfg.m} = {sp.n}")
    return export.write_spectrum(sp, out, vectors=cfg.vectors), []


def cmd_sample(cfg: RunConfig, out: Path) -> tuple[list[Path], list[dict]]:
    if cfg.m == 0:
        raise UsageError("level 0 has no interior vertices")
    if cfg.n == 0:
        return [], []
    sp = spectrum(cfg.m, cap=cfg.cap)
    X = sample_ensemble(sp, cfg.s, cfg.n, cfg.seed)
    if cfg.ensemble:
        return [export.write_ensemble(X, out / f"ensemble_m{cfg.m}.csv", cfg.m, cfg.s, cfg.seed)], []
    width = max(4, len(str(cfg.n - 1)))
    return [
        export.write_field(X[:, k], out / f"field_m{cfg.m}_{k:0{width}d}.csv", cfg.m, cfg.s, cfg.seed, k)
        for k in range(cfg.n)
    ], []


def _levels(cfg: RunConfig, default_lo: int) -> range:
    lo = default_lo if cfg.m_lo is None else cfg.m_lo
    if lo >= cfg.m:
        raise UsageError("need --m-lo < --m for a level sweep")
    return range(lo, cfg.m + 1)


def run_experiment(cfg: RunConfig):
    """Dispatch to a lab operation; returns a report object with ``to_dict``."""
    name, m = cfg.experiment, cfg.m
    if m > cfg.cap:
        raise UsageError(f"level {m} exceeds spectral cap {cfg.cap}")
    if name == "weyl":
        return lab.weyl_check(spectrum(m, cfg.cap))
    if name == "riesz-regime":
        ref = spectrum(m - 1, cfg.cap) if m > 1 else None
        return lab.riesz_regime_fit(spectrum(m, cfg.cap), cfg.s, reference=ref)
    if name == "holder":
        return lab.holder_exponent(spectrum(m, cfg.cap), cfg.s, cfg.n, cfg.seed)
    if name == "logcorr":
        return lab.log_correlation_fit(spectrum(m, cfg.cap), cfg.n, cfg.seed)
    if name == "sobolev":
        return lab.sobolev_membership_scan(cfg.s, cfg.alpha, m, cfg.n, cfg.seed)
    if name == "supnorm":
        if m < 2:
            raise UsageError("supnorm compares levels m-1 and m; need --m >= 2")
        return lab.supnorm_level_comparison(m - 1, m)
    if name == "lipschitz":
        return lab.lipschitz_kernel_check(spectrum(m, cfg.cap), cfg.s, cfg.n, cfg.seed)
    if name == "eigsweep":
        lv = _levels(cfg, 1)
        return lab.eigen_level_sweep(lv.start, lv.stop - 1, cfg.j)
    if name == "heat":
        return lab.heat_diagonal_check(spectrum(m, cfg.cap))
    if name in ("semigroup", "quadform", "charfun"):
        if cfg.ref_level > cfg.cap or cfg.ref_level < m:
            raise UsageError("--ref-level must lie between --m and the spectral cap")
        f = lab.eigenfunction_surrogate(cfg.ref_level)
        lv = _levels(cfg, 2)
        if name == "semigroup":
            return lab.semigroup_convergence(f, cfg.t, lv)
        if name == "quadform":
            return lab.quadratic_form_convergence(f, cfg.s, lv)
        return lab.characteristic_convergence(f, cfg.s, lv)
    if name == "voronoi":
        f: TestFunction = lab.ground_state_surrogate(max(cfg.ref_level, m + cfg.offset))
        return lab.voronoi_lifting_rate(f, _levels(cfg, 2), cfg.offset)
    raise UsageError(f"unknown experiment {name!r}")


def _plot_data(report, out: Path, stem: str) -> list[Path]:
    if isinstance(report, lab.WeylReport):
        return [export.write_xy(report.t, report.counts, out / f"{stem}_counts.csv", ("t", "N")),
                export.write_xy(report.t, report.ratios, out / f"{stem}_ratio.csv", ("t", "ratio"))]
    if isinstance(report, lab.RegimeFit):
        return [export.write_xy(report.x, report.y, out / f"{stem}_fit.csv")]
    obs = report.observed
    if obs and isinstance(obs[0], list):
        rows = [(m, j + 1, row[k]) for j, row in enumerate(obs) for k, m in enumerate(report.levels)]
        return [export.atomic_write(out / f"{stem}_levels.csv", export.csv_text(["level", "j", "value"], rows))]
    x = report.levels if len(report.levels) == len(obs) else list(range(len(obs)))
    return [export.write_xy(x, obs, out / f"{stem}_levels.csv")]


def cmd_lab(cfg: RunConfig, out: Path) -> tuple[list[Path], list[dict]]:
    saved = {name: getattr(lab, TOLERANCE_KEYS[name]) for name in cfg.tolerance}
    try:
        for name, value in cfg.tolerance.items():
            setattr(lab, TOLERANCE_KEYS[name], value)
        report = run_experiment(cfg)
    finally:
        for name, value in saved.items():
            setattr(lab, TOLERANCE_KEYS[name], value)
    record = report.to_dict()
    stem = f"{cfg.experiment}_m{cfg.m}"
    paths = [export.write_json(record, out / f"{stem}.json")] + _plot_data(report, out, stem)
    print(f"{cfg.experiment}: {'PASS' if record['pass'] else 'FAIL'}")
    failures = [] if record["pass"] else [{"experiment": cfg.experiment, "file": paths[0].name,
                                           "fit": record.get("fit"), "predicted": record.get("predicted")}]
    return paths, failures


COMMANDS = {"graph": cmd_graph, "spectrum": cmd_spectrum, "sample": cmd_sample, "lab": cmd_lab}


def execute(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        paths, failures = COMMANDS[cfg.command](cfg, out)
    except (lab.PreconditionError, lab.RegimeWindowError, ResourceLimitError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        failures, paths = [{"command": cfg.command, "error": f"{type(exc).__name__}: {exc}"}], []
    manifest = {
        "config": cfg.to_dict(),
        "log_correlated": abs(cfg.s - CRITICAL_S) < 1e-12,
        "outputs": {p.name: export.sha256(p) for p in paths},
        "pass": not failures,
        "failures": failures,
    }
    export.write_json(manifest, out / "manifest.json")
    if failures:
        print(json.dumps({"failures": failures}, sort_keys=True), file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=int, help="gasket level")
    common.add_argument("--s", type=float, help="fractional parameter s >= 0")
    common.add_argument("--seed", type=int, help="noise seed (64-bit unsigned)")
    common.add_argument("--n", type=int, help="number of samples")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    common.add_argument("--config", help="key = value file; command-line flags take precedence")
    common.add_argument("--cap", type=int, help=f"spectral level cap (default {SPECTRAL_LEVEL_CAP})")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gasket-fgf", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("graph", parents=[common], help="vertex and edge CSVs for level m")
    sp = sub.add_parser("spectrum", parents=[common], help="eigenvalue CSV for level m")
    sp.add_argument("--vectors", action="store_const", const=True, help="also write the eigenvector matrix")
    sa = sub.add_parser("sample", parents=[common], help="n field samples at level m")
    sa.add_argument("--ensemble", action="store_const", const=True, help="one file with a column per sample")
    la = sub.add_parser("lab", parents=[common], help="run one experiment and write its report")
    la.add_argument("experiment", choices=EXPERIMENTS)
    la.add_argument("--t", type=float, help="heat time for semigroup (default 0.01)")
    la.add_argument("--m-lo", dest="m_lo", type=int, help="first level of a level sweep")
    la.add_argument("--j", type=int, help="eigenvalues tracked by eigsweep (default 3)")
    la.add_argument("--ref-level", dest="ref_level", type=int, help="level of the reference test function")
    la.add_argument("--offset", type=int, help="Voronoi reference offset M - m")
    la.add_argument("--alpha", help="comma-separated alpha grid for sobolev")
    rp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", help="output directory (default: the manifest's directory)")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
    try:
        if args.command == "replay":
            recorded = json.loads(Path(args.manifest).read_text())["config"]
            cfg = RunConfig(command=recorded.pop("command"))
            cfg.tolerance.update(recorded.pop("tolerance", {}))
            for k, v in recorded.items():
                _coerce(cfg, k, v)
            cfg.out = args.out or str(Path(args.manifest).parent)
            _validate(cfg)
        else:
            cfg = resolve_config(args)
        return execute(cfg)
    except UsageError as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
