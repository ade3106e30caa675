"""Command-line front end: ``svmrates <subcommand> [options]``.

Every subcommand writes a comma-separated data table and a ``key = value``
summary into the output directory. Both begin with a header carrying the
config hash, seed and package version. File names embed the config hash.
Wall-clock times are only logged, so data files from identical configs are
byte-identical.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, SUBCOMMANDS, ConfigError, RunConfig, parse_config
from .distributions import SyntheticDistribution, make_distribution, sample
from .io import header_line, read_table, write_record, write_solution, write_table, write_training_set

log = logging.getLogger("svmrates")

# config keys that each subcommand accepts as direct flags besides --set
_FLAG_KEYS = {"seed": int, "jobs": int, "out": str}


def build_distribution(cfg: RunConfig) -> SyntheticDistribution:
    family = cfg["family"]
    if family == "power_margin":
        return make_distribution(family, gamma=cfg["gamma"])
    if family == "weighted_power_margin":
        return make_distribution(family, gamma=cfg["gamma"], q=cfg["q"])
    if family == "separated":
        return make_distribution(family, delta=cfg["delta"], d=cfg["d"])
    raise ConfigError(f"unknown family {family!r}")


def _paths(cfg: RunConfig, stem: str) -> tuple[Path, Path]:
    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    base = f"{stem}_{cfg.config_hash}"
    return out / f"{base}.csv", out / f"{base}_summary.txt"


def _summary(cfg: RunConfig, path: Path, record: dict) -> Path:
    echo = {f"config.{k}": v for k, v in (line.split("=", 1) for line in cfg.canonical().splitlines())}
    return write_record(path, {**record, **echo}, cfg.header())


def _prepend_header(cfg: RunConfig, path: Path) -> None:
    # sample and solution files carry their own header; the run header goes above it
    path.write_text(header_line(cfg.header()) + "\n" + path.read_text(encoding="utf-8"), encoding="utf-8")


def _tol(cfg: RunConfig, n: int) -> float:
    return cfg["tol_opt"] if cfg["tol_opt"] > 0 else 1e-8 * n


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(cfg: RunConfig) -> int:
    dist = build_distribution(cfg)
    ts = sample(dist, cfg["n"], cfg["seed"])
    table, summ = _paths(cfg, "gen")
    write_training_set(table, ts)
    _prepend_header(cfg, table)
    n_pos = int(np.sum(ts.y == 1))
    _summary(cfg, summ, {"n": ts.n, "d": ts.d, "n_positive": n_pos, "n_negative": ts.n - n_pos})
    print(f"wrote {table}")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    from .distributions import excess_risk
    from .kernel import GaussianKernel
    from .solver import SvmProblem, norm_bound_check, offset_bound_check, train

    dist = build_distribution(cfg)
    ts = sample(dist, cfg["n"], cfg["seed"])
    prob = SvmProblem(ts, cfg["lambda"], GaussianKernel(cfg["sigma"]), cfg["with_offset"])
    sol = train(prob, _tol(cfg, ts.n), route=cfg["route"])
    table, summ = _paths(cfg, "train")
    write_solution(table, sol)
    _prepend_header(cfg, table)
    ex = excess_risk(dist, sol.expansion)
    record = {
        "objective": sol.objective,
        "certificate": sol.certificate,
        "iterations": sol.iterations,
        "rkhs_norm": sol.rkhs_norm(),
        "offset": sol.offset,
        "norm_slack": norm_bound_check(sol).slack,
        "excess_risk": ex.value,
        "excess_risk_err": ex.error,
    }
    if sol.with_offset:
        record["offset_slack"] = offset_bound_check(sol).slack
    _summary(cfg, summ, record)
    print(f"objective={sol.objective!r} certificate={sol.certificate!r}")
    return 0


def cmd_noise(cfg: RunConfig) -> int:
    from .noise import noise_report

    dist = build_distribution(cfg)
    rep = noise_report(dist, t_grid=cfg["t_grid"], geo_grid=cfg["t_grid"])
    known = dist.known_exponents
    table, summ = _paths(cfg, "noise")
    rows = [(k, v) for k, v in rep.as_record().items()]
    write_table(table, ("quantity", "value"), rows, cfg.header())
    record = rep.as_record()
    if known is not None:
        record.update({"q_known": known.q, "alpha_known": known.alpha})
    _summary(cfg, summ, record)
    print(f"q_hat={rep.q_hat:.4f} alpha_hat={rep.alpha_hat:.4f} gamma_hat={rep.gamma_hat:.4f}")
    return 0


def cmd_approx(cfg: RunConfig) -> int:
    from .approximation import approx_scan

    dist = build_distribution(cfg)
    pts = approx_scan(dist, cfg["sigma_grid"], cfg["lambda_grid"], cfg["empirical"], cfg["n_dense"], cfg["seed"])
    table, summ = _paths(cfg, "approx")
    cols = ("sigma", "lambda", "witness", "empirical", "rhs", "ratio")
    write_table(table, cols, [(p.sigma, p.lam, p.a_upper_witness, p.a_upper_empirical, p.rhs, p.ratio) for p in pts],
                cfg.header())
    finite = [p.ratio for p in pts if math.isfinite(p.ratio)]
    best = {}
    for p in pts:
        if p.lam not in best or p.a_upper_witness < best[p.lam]:
            best[p.lam] = p.a_upper_witness
    lams = np.array(sorted(best))
    record = {"points": len(pts), "max_ratio": max(finite) if finite else math.nan}
    if lams.size >= 2:
        vals = np.array([best[l] for l in lams])
        record["slope_best_sigma"] = float(np.polyfit(np.log(lams), np.log(vals), 1)[0])
    _summary(cfg, summ, record)
    print(f"wrote {table}")
    return 0


def cmd_cover(cfg: RunConfig) -> int:
    from .complexity import cover_scaling_scan

    dist = build_distribution(cfg)
    rep = cover_scaling_scan(dist, cfg["sigma_grid"], cfg["epsilon_grid"], n=cfg["n"], seed=cfg["seed"])
    table, summ = _paths(cfg, "cover")
    write_table(table, ("sigma", "epsilon", "n", "log_cover_lower", "log_cover_upper"), rep.rows(), cfg.header())
    record = {
        "max_eps_slope": float(np.nanmax(rep.eps_slopes)),
        "max_sigma_slope": float(np.nanmax(rep.sigma_slopes)),
        "rank_correlation": rep.rank_correlation,
    }
    record.update({f"eps_slope.sigma={s!r}": float(v) for s, v in zip(rep.sigma, rep.eps_slopes)})
    record.update({f"sigma_slope.eps={e!r}": float(v) for e, v in zip(rep.epsilon, rep.sigma_slopes)})
    _summary(cfg, summ, record)
    print(f"max eps slope={record['max_eps_slope']:.3f} max sigma slope={record['max_sigma_slope']:.3f}")
    return 0


def cmd_rates(cfg: RunConfig) -> int:
    from .rates import DATA_COLUMNS, fit_rate, make_schedule, run_experiment

    dist = build_distribution(cfg)
    known = dist.known_exponents
    if known is None:
        raise ConfigError(f"family {cfg['family']!r} has no known exponents for the schedule")
    alpha = known.alpha
    fixed = cfg["fixed_sigma"] if cfg["fixed_sigma"] > 0 else None
    sched = make_schedule(
        known.q,
        alpha,
        dist.d,
        fixed_sigma=fixed if math.isinf(alpha) else None,
        lambda_exponent=cfg["lambda_exponent"] or None,
        sigma_exponent=cfg["sigma_exponent"] or None,
    )
    t0 = time.perf_counter()
    rep = run_experiment(dist, sched, cfg["n_grid"], cfg["trials"], cfg["seed"], cfg["with_offset"], cfg.jobs(),
                         cfg["tol_opt"] or None)
    log.info("rates: %d rows in %.1f s", len(rep.rows), time.perf_counter() - t0)
    table, summ = _paths(cfg, "rates")
    write_table(table, DATA_COLUMNS, rep.data_rows(), cfg.header())
    record = {"beta": sched.beta, "q": known.q, "alpha": alpha, "rows": len(rep.rows),
              "failed_rows": len(rep.rows) - len(rep.ok_rows())}
    record.update({f"median.n={n}": m for n, m in rep.medians().items()})
    try:
        fit = fit_rate(rep, n_boot=cfg["n_boot"], seed=cfg["seed"])
    except ValueError as exc:
        record["fit"] = f"unavailable ({exc})"
        print(f"beta={sched.beta:.6f} beta_hat unavailable: {exc}")
    else:
        if fit.exact_learning:
            record["fit"] = "exact_learning"
            print(f"beta={sched.beta:.6f} exact learning (all excess risks zero)")
        else:
            record.update({"beta_hat": fit.beta_hat, "beta_hat_ci_low": fit.ci_low, "beta_hat_ci_high": fit.ci_high})
            print(f"beta_hat={fit.beta_hat:.4f} [{fit.ci_low:.4f}, {fit.ci_high:.4f}]  beta={sched.beta:.6f}")
    _summary(cfg, summ, record)
    return 0 if record["failed_rows"] == 0 else 1


def cmd_check(cfg: RunConfig) -> int:
    from .checks import RESULT_COLUMNS, run_all

    t0 = time.perf_counter()
    results = run_all(cfg["seed"])
    log.info("check: %d suites in %.1f s", len(results), time.perf_counter() - t0)
    table, summ = _paths(cfg, "check")
    write_table(table, RESULT_COLUMNS, [r.row() for r in results], cfg.header())
    failed = [r.name for r in results if not r.passed]
    _summary(cfg, summ, {"suites": len(results), "failed": len(failed), "failed_names": ",".join(failed) or "none"})
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: worst={r.worst!r} threshold={r.threshold!r} cases={r.cases}")
    return 1 if failed else 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "noise": cmd_noise,
    "approx": cmd_approx,
    "cover": cmd_cover,
    "rates": cmd_rates,
    "check": cmd_check,
}


# ---------------------------------------------------------------------------
# plots


def plot_outputs(cfg: RunConfig) -> list[Path]:
    """SVG plots derived from the data table written by the subcommand."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    table, _ = _paths(cfg, cfg.subcommand)
    if not table.exists() or cfg.subcommand not in ("rates", "approx", "cover"):
        return []
    _, cols, rows = read_table(table)
    data = {c: [r[i] for r in rows] for i, c in enumerate(cols)}
    fig, ax = plt.subplots(figsize=(5, 4))
    if cfg.subcommand == "rates":
        by_n: dict[int, list[float]] = {}
        for n, e, st in zip(data["n"], data["excess_risk"], data["status"]):
            if st == "ok":
                by_n.setdefault(int(n), []).append(float(e))
        ns = np.array(sorted(by_n))
        med = np.array([np.median(by_n[n]) for n in ns])
        ax.loglog(ns, med, "o-", label="median excess risk")
        pos = med > 0
        if pos.sum() >= 2:
            k, c = np.polyfit(np.log(ns[pos]), np.log(med[pos]), 1)
            ax.loglog(ns[pos], np.exp(c) * ns[pos] ** k, "--", label=f"slope {k:.3f}")
        ax.set_xlabel("n")
    elif cfg.subcommand == "approx":
        for s in sorted(set(data["sigma"])):
            sel = [i for i, v in enumerate(data["sigma"]) if v == s]
            ax.loglog([data["lambda"][i] for i in sel], [data["witness"][i] for i in sel], "o-", label=f"sigma={s:g}")
        ax.set_xlabel("lambda")
    else:
        for s in sorted(set(data["sigma"])):
            sel = [i for i, v in enumerate(data["sigma"]) if v == s and data["log_cover_upper"][i] > 0]
            ax.loglog([1.0 / data["epsilon"][i] for i in sel], [data["log_cover_upper"][i] for i in sel], "o-",
                      label=f"sigma={s:g}")
        ax.set_xlabel("1/epsilon")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = table.with_suffix(".svg")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return [path]


# ---------------------------------------------------------------------------
# entry point


def _set_pair(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svmrates", description="Learning-rate experiments for Gaussian-kernel SVMs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "gen": "sample a training set",
        "train": "train one SVM and dump the solution",
        "noise": "estimate noise exponents of a family",
        "approx": "scan approximation-error bounds over (sigma, lambda)",
        "cover": "scan covering-number bounds over (sigma, epsilon)",
        "rates": "run a rate experiment and fit the exponent",
        "check": "run every property suite",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
        p.add_argument("--out", help="output directory (default: $SVMRATES_OUT or ./svmrates_out)")
        p.add_argument("--plot", action="store_true", help="also write SVG plots")
        p.add_argument("--set", dest="overrides", action="append", type=_set_pair, default=[], metavar="KEY=VALUE",
                       help="override any config key; repeatable")
        if name == "rates":
            p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    flags = dict(args.overrides)
    for key in _FLAG_KEYS:
        val = getattr(args, key)
        if val is not None:
            flags[key] = str(val)
    if args.plot:
        flags["plot"] = "true"
    return parse_config(args.subcommand, args.config, flags, getattr(args, "preset", None))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        parser.error(str(exc))
    try:
        status = COMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(f"svmrates: error: {exc}", file=sys.stderr)
        return 2
    if cfg["plot"]:
        for path in plot_outputs(cfg):
            print(f"wrote {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
