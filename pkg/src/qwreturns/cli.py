"""
Command-line interface: ``qwreturns {simulate,stats,scaling,fit}``.

Exit codes: 0 success (a fit that hit its iteration cap still counts),
2 usage or input-format error, 3 not enough data for the requested horizon.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import gaussian_fit, gmm2_fit
from .fit import FixedN, SearchConfig, hill_climb_fit, refine_with_ensemble
from .io import (
    DataFormatError,
    dumps,
    file_digest,
    read_price_csv,
    write_csv,
    write_curves,
    write_distribution,
    write_json,
)
from .qwalk import (
    CoinParams,
    InitParams,
    distribution,
    ensemble_distribution,
    evolve,
    smooth_aggregate,
)
from .returns import (
    CLASSIFY_BINS,
    DegenerateSampleError,
    InsufficientHistoryError,
    bimodality,
    histogram,
    log_returns,
    scaling_exponent,
    skewness,
)

log = logging.getLogger("qwreturns")

EXIT_USAGE = 2
EXIT_DATA = 3


@dataclass
class RunConfig:
    input: str = ""
    out: str = "qwreturns-out"
    ticker: str | None = None
    dt: int = 504
    classify_bins: int = CLASSIFY_BINS
    base_bins: int = 20
    n: int = 100
    ensemble: bool = True
    n_mean: float = 100.0
    n_std: float = 15.0
    samples: int = 1000
    seed: int = 42
    grid_points: int = 8
    shift_range: tuple[int, int] = (-3, 3)
    bin_delta_range: tuple[int, int] = (-4, 4)
    max_iter: int = 10_000
    gmm_restarts: int = 5
    scaling: bool = False
    dt_max: int = 504

    def validate(self):
        for name in ("dt", "classify_bins", "base_bins", "n", "samples", "grid_points",
                     "max_iter", "dt_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.gmm_restarts < 0 or self.n_std < 0 or not self.n_mean > 0:
            raise ValueError("gmm_restarts and n_std must be non-negative, n_mean positive")
        self.shift_range = tuple(int(v) for v in self.shift_range)
        self.bin_delta_range = tuple(int(v) for v in self.bin_delta_range)

    def search(self) -> SearchConfig:
        return SearchConfig(self.grid_points, self.shift_range, self.bin_delta_range,
                            max_iter=self.max_iter)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["input"] = Path(self.input).name
        d.pop("out")
        return d


class _UsageError(Exception):
    pass


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    coin = CoinParams(args.eta, args.theta)
    init = InitParams(args.phi, args.omega)
    if args.n < 0:
        raise _UsageError("--n must be non-negative")
    out = Path(args.out)
    raw = distribution(evolve(init, coin, args.n), keep_odd_sites=args.keep_odd_sites)
    write_distribution(out / "raw", raw)
    if args.n > 0 or not args.keep_odd_sites:
        smoothed = smooth_aggregate(distribution(evolve(init, coin, args.n)))
        write_distribution(out / "smoothed", smoothed)
    if args.ensemble:
        ens = ensemble_distribution(init, coin, args.n_mean, args.n_std, args.samples, args.seed)
        write_distribution(out / "ensemble", ens)
    write_json(out / "simulate.json", {
        "coin": {"eta": coin.eta, "theta": coin.theta},
        "init": {"phi": init.phi, "omega": init.omega},
        "n": args.n,
        "ensemble": {"n_mean": args.n_mean, "n_std": args.n_std, "samples": args.samples,
                     "seed": args.seed} if args.ensemble else None,
        "version": __version__,
    })
    return 0


# ------------------------------------------------------------------- stats

def _horizon_stats(series, dt: int, bins: int) -> tuple[dict, object]:
    sample = log_returns(series, dt)
    entry = {"dt": dt, "sample_size": len(sample)}
    try:
        hist = histogram(sample, bins)
    except DegenerateSampleError as exc:
        entry.update(histogram=None, bimodality=None, classification=None, note=str(exc))
        hist = None
    else:
        bm = bimodality(hist)
        entry.update(
            histogram=hist.to_dict(),
            classification=bm.classification,
            bimodality=dataclasses.asdict(bm),
        )
    try:
        entry["skewness"] = skewness(sample)
    except DegenerateSampleError as exc:
        entry["skewness"] = None
        entry.setdefault("note", str(exc))
    return entry, hist


def cmd_stats(args) -> int:
    series = read_price_csv(args.input, args.ticker)
    out = Path(args.out)
    dts = args.dt or [504]
    horizons = []
    for dt in dts:
        entry, hist = _horizon_stats(series, dt, args.bins)
        horizons.append(entry)
        if hist is not None:
            write_csv(out / f"hist_dt{dt}.csv", ["bin_left", "bin_right", "bin_center", "probability"],
                      zip(hist.edges[:-1], hist.edges[1:], hist.centers, hist.probabilities))
    write_json(out / "stats.json", {
        "ticker": series.ticker,
        "observations": len(series),
        "first_date": series.dates[0],
        "last_date": series.dates[-1],
        "bins": args.bins,
        "horizons": horizons,
        "provenance": {"input_sha256": file_digest(args.input), "version": __version__},
    })
    return 0


# ----------------------------------------------------------------- scaling

def cmd_scaling(args) -> int:
    series = read_price_csv(args.input, args.ticker)
    res = scaling_exponent(series, args.dt_max)
    out = Path(args.out)
    write_csv(out / "std_by_scale.csv", ["dt", "std"], zip(res.dts.tolist(), res.std))
    write_json(out / "scaling.json", {
        "ticker": series.ticker,
        **res.to_dict(),
        "provenance": {"input_sha256": file_digest(args.input), "version": __version__},
    })
    return 0


# --------------------------------------------------------------------- fit

def _digest(report: dict) -> str:
    body = json.loads(dumps(report))
    body["provenance"].pop("generated_at", None)
    body["provenance"].pop("report_digest", None)
    return hashlib.sha256(dumps(body).encode()).hexdigest()


def run_fit(cfg: RunConfig, progress=None) -> dict:
    series = read_price_csv(cfg.input, cfg.ticker)
    sample = log_returns(series, cfg.dt)
    classify = bimodality(histogram(sample, cfg.classify_bins))
    out = Path(cfg.out)

    fixed = hill_climb_fit(sample, cfg.base_bins, FixedN(cfg.n), cfg.search(), progress)
    qw = refine_with_ensemble(fixed, sample, cfg.n_mean, cfg.n_std, cfg.samples, cfg.seed) if cfg.ensemble else fixed
    gauss = gaussian_fit(sample, cfg.base_bins)
    gmm = gmm2_fit(sample, cfg.base_bins, cfg.seed, cfg.gmm_restarts)

    write_curves(out / "curves_qw.csv", qw.edges, qw.empirical_curve, qw.fitted_curve)
    write_curves(out / "curves_gaussian.csv", gauss.edges, gauss.empirical_curve, gauss.fitted_curve)
    write_curves(out / "curves_gmm.csv", gmm.edges, gmm.empirical_curve, gmm.fitted_curve)

    report = {
        "ticker": series.ticker,
        "dt": cfg.dt,
        "sample_size": len(sample),
        "classification": classify.classification,
        "bimodality": dataclasses.asdict(classify),
        "skewness": skewness(sample),
        "scaling": scaling_exponent(series, cfg.dt_max).to_dict() if cfg.scaling else None,
        "quantum_walk_fixed": fixed.to_dict(),
        "quantum_walk": qw.to_dict(),
        "initial_position": qw.initial_position,
        "converged": fixed.converged,
        "gaussian": gauss.to_dict(),
        "gmm": gmm.to_dict(),
        "scores": {
            "mae": {"quantum_walk": qw.mae, "gaussian": gauss.mae, "gmm": gmm.mae},
            "ks": {"quantum_walk": qw.ks, "gaussian": gauss.ks, "gmm": gmm.ks},
        },
        "provenance": {
            "input_sha256": file_digest(cfg.input),
            "config": cfg.echo(),
            "seed": cfg.seed,
            "version": __version__,
            "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        },
    }
    report["provenance"]["report_digest"] = _digest(report)
    write_json(out / "report.json", report)
    return report


_FIT_FLAGS = {
    "dt": int, "classify_bins": int, "base_bins": int, "n": int, "n_mean": float,
    "n_std": float, "samples": int, "seed": int, "grid_points": int, "max_iter": int,
    "gmm_restarts": int, "dt_max": int,
}


def _fit_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise _UsageError(f"cannot read config {args.config}: {exc}") from None
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise _UsageError(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(cfg, key, value)
    for key in list(_FIT_FLAGS) + ["input", "out", "ticker", "shift_range", "bin_delta_range"]:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if args.no_ensemble:
        cfg.ensemble = False
    if args.scaling:
        cfg.scaling = True
    if not cfg.input:
        raise _UsageError("an input CSV is required")
    cfg.validate()
    return cfg


def cmd_fit(args) -> int:
    cfg = _fit_config(args)
    report = run_fit(cfg, progress=lambda msg: log.info(msg))
    if not report["converged"]:
        print("warning: hill climb hit the iteration cap before converging", file=sys.stderr)
    s = report["scores"]["mae"]
    print(f"{report['ticker']}: {report['classification']}, MAE qw={s['quantum_walk']:.4g} "
          f"gaussian={s['gaussian']:.4g} gmm={s['gmm']:.4g}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qwreturns", description=__doc__.splitlines()[1])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write walk distributions")
    s.add_argument("--eta", type=float, default=0.0)
    s.add_argument("--theta", type=float, default=np.pi / 4)
    s.add_argument("--phi", type=float, default=0.0)
    s.add_argument("--omega", type=float, default=0.0)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--keep-odd-sites", action="store_true")
    s.add_argument("--ensemble", action="store_true", help="also average over step counts")
    s.add_argument("--n-mean", type=float, default=100.0)
    s.add_argument("--n-std", type=float, default=15.0)
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", default="qwreturns-out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("stats", help="histograms, bimodality and skewness per horizon")
    s.add_argument("input")
    s.add_argument("--dt", type=int, action="append", help="horizon in trading days (repeatable)")
    s.add_argument("--bins", type=int, default=CLASSIFY_BINS)
    s.add_argument("--ticker")
    s.add_argument("--out", default="qwreturns-out")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("scaling", help="volatility scaling exponent")
    s.add_argument("input")
    s.add_argument("--dt-max", type=int, default=504)
    s.add_argument("--ticker")
    s.add_argument("--out", default="qwreturns-out")
    s.set_defaults(func=cmd_scaling)

    s = sub.add_parser("fit", help="quantum-walk fit with Gaussian and GMM baselines")
    s.add_argument("input", nargs="?")
    s.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    s.add_argument("--out")
    s.add_argument("--ticker")
    for name, kind in _FIT_FLAGS.items():
        s.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)
    s.add_argument("--shift-range", dest="shift_range", type=int, nargs=2, metavar=("LO", "HI"))
    s.add_argument("--bin-delta-range", dest="bin_delta_range", type=int, nargs=2, metavar=("LO", "HI"))
    s.add_argument("--no-ensemble", action="store_true")
    s.add_argument("--scaling", action="store_true", help="also fit the scaling exponent")
    s.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InsufficientHistoryError, DegenerateSampleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (_UsageError, DataFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
