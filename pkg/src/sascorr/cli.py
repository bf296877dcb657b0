"""Command-line front end.

Subcommands
    simulate    run the Monte Carlo model, write an RTG1 tag file + summary
    correlate   histogram an RTG1 file, extract comb peaks, report g2
    sweep       count-level runs over a power list, write a CSV table
    fit         power-series model selection and log-log exponent on a CSV column
    oracle      closed-form rates, pair expectations and g2 per power

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import correlate as corr
from . import model as mdl
from . import powerfit as pf
from . import simulate as sim
from .config import (
    ConfigError,
    RunConfig,
    config_digest,
    default_bin_width,
    parse_config,
)
from .tagstore import TagFormatError, read_stream, write_stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4

_SWEEP_COLUMNS = [
    "power_mW",
    "n_pulses",
    "rate_S_Hz",
    "rate_aS_Hz",
    "mean_stokes_per_pulse",
    "mean_as_pair_per_pulse",
    "mean_as_thermal_per_pulse",
    "center_pairs",
    "side_pairs",
    "n_side_pairs",
    "g2",
    "g2_sigma",
]

_ORACLE_COLUMNS = [
    "power_mW",
    "m_S",
    "m_aS_pair",
    "m_aS_thermal",
    "detected_S_Hz",
    "detected_aS_Hz",
    "p_center",
    "p_side",
    "g2",
]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, comments: list[str], columns: list[str], rows) -> None:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _read_csv_columns(path) -> dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise TagFormatError("CSV file has no header row", 0)
    header, data = rows[0], rows[1:]
    out = {}
    for i, name in enumerate(header):
        out[name.strip()] = np.array([float(r[i]) for r in data])
    return out


def _load_config(path, args) -> RunConfig:
    cfg = parse_config(path)
    overrides = {}
    for attr in ("n_pulses", "seed", "workers"):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[attr] = value
    if getattr(args, "powers", None):
        overrides["powers_mw"] = tuple(args.powers)
    if overrides:
        cfg = RunConfig(
            model=cfg.model,
            n_pulses=overrides.get("n_pulses", cfg.n_pulses),
            seed=overrides.get("seed", cfg.seed),
            powers_mw=overrides.get("powers_mw", cfg.powers_mw),
            bin_width_ps=cfg.bin_width_ps,
            max_lag_multiples=cfg.max_lag_multiples,
            workers=overrides.get("workers", cfg.workers),
        )
    return cfg


def _parse_powers(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, args)
    power = args.power if args.power is not None else cfg.model.laser.power_mw
    if power < 0:
        raise ConfigError("power must be non-negative")
    stream, summary = sim.simulate_run(
        cfg.model, power, cfg.n_pulses, cfg.seed, n_workers=cfg.workers
    )
    write_stream(args.out, stream)
    digest = config_digest(cfg)
    lines = [
        f"config_digest={digest}",
        f"power_mW={_fmt(float(power))}",
        f"n_pulses={summary.n_pulses}",
        f"seed={summary.rng_seed}",
        f"elapsed_s={_fmt(summary.elapsed_s)}",
        f"total_stokes_generated={summary.total_stokes_generated}",
        f"total_as_pair={summary.total_as_pair}",
        f"total_as_thermal={summary.total_as_thermal}",
        f"total_stokes_detected={summary.total_stokes_detected}",
        f"total_as_detected={summary.total_as_detected}",
        f"mean_stokes_per_pulse={_fmt(summary.mean_stokes_per_pulse)}",
        f"rate_S_Hz={_fmt(summary.rate_s_hz)}",
        f"rate_aS_Hz={_fmt(summary.rate_as_hz)}",
        f"tags_stokes={len(stream.stokes)}",
        f"tags_antistokes={len(stream.antistokes)}",
    ]
    text = "\n".join(lines) + "\n"
    with open(str(args.out) + ".summary.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_correlate(args) -> int:
    stream = read_stream(args.tagfile)
    rep = stream.rep_period_ps
    bin_width = args.bin_width_ps
    if bin_width is None:
        bin_width = default_bin_width(rep)
    window = args.window_ps
    if 2 * window > rep:
        raise ConfigError(
            f"window {window} ps exceeds half the repetition period {rep} ps"
        )
    if rep % bin_width != 0:
        raise ConfigError(
            f"bin width {bin_width} ps must divide the repetition period {rep} ps"
        )
    bins_per_rep = rep // bin_width
    extra = window // bin_width + 1
    max_lag = (args.max_lag_multiples * bins_per_rep + extra) * bin_width
    hist = corr.cross_correlate(stream.stokes, stream.antistokes, bin_width, max_lag)
    peaks = corr.extract_peaks(hist, rep, window)
    est = corr.g2_from_peaks(peaks)
    prefix = args.out_prefix
    _write_csv(
        f"{prefix}.hist.csv",
        [f"source={args.tagfile}", f"bin_width_ps={bin_width}"],
        ["lag_ps", "count"],
        zip(hist.lag_centers().tolist(), hist.counts.tolist()),
    )
    _write_csv(
        f"{prefix}.peaks.csv",
        [f"source={args.tagfile}", f"rep_period_ps={rep}", f"window_ps={window}"],
        ["peak_index", "count"],
        sorted(peaks.peak_counts.items()),
    )
    report = [
        f"g2={_fmt(est.g2)}",
        f"sigma={_fmt(est.sigma)}",
        f"center={est.center_count}",
        f"side_mean={_fmt(est.side_mean)}",
        f"n_side_peaks={est.n_side_peaks}",
    ]
    if args.autocorr:
        g2_ss = corr.g2_from_peaks(
            corr.extract_peaks(
                corr.autocorrelate_hbt(
                    stream.stokes, args.splitter_seed, bin_width, max_lag
                ),
                rep,
                window,
            )
        )
        g2_asas = corr.g2_from_peaks(
            corr.extract_peaks(
                corr.autocorrelate_hbt(
                    stream.antistokes, args.splitter_seed + 1, bin_width, max_lag
                ),
                rep,
                window,
            )
        )
        r_factor = corr.cauchy_schwarz_factor(est.g2, g2_ss.g2, g2_asas.g2)
        report += [
            f"g2_ss={_fmt(g2_ss.g2)}",
            f"g2_ss_sigma={_fmt(g2_ss.sigma)}",
            f"g2_asas={_fmt(g2_asas.g2)}",
            f"g2_asas_sigma={_fmt(g2_asas.sigma)}",
            f"R={_fmt(r_factor)}",
        ]
    text = "\n".join(report) + "\n"
    with open(f"{prefix}.g2.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def _sweep_rows(cfg: RunConfig):
    rows = sim.sweep(
        cfg.model, cfg.powers_mw, cfg.n_pulses, cfg.seed, n_workers=cfg.workers
    )
    for row in rows:
        s, t = row.summary, row.tally
        g2, g2_sigma = t.g2()
        yield [
            float(row.power_mw),
            s.n_pulses,
            s.rate_s_hz,
            s.rate_as_hz,
            s.mean_stokes_per_pulse,
            s.mean_as_pair_per_pulse,
            s.mean_as_thermal_per_pulse,
            t.center_sum,
            t.side_sum,
            t.n_side_pairs,
            g2,
            g2_sigma,
        ]


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config, args)
    if len(cfg.powers_mw) < 3:
        raise ConfigError(
            f"sweep needs at least 3 powers for downstream fitting, "
            f"got {len(cfg.powers_mw)}"
        )
    comments = [
        "sascorr sweep",
        f"config_digest={config_digest(cfg)}",
        f"seed={cfg.seed}",
        "columns: rates in Hz, means per pulse, center pairs per pulse at "
        "zero delay, side pairs per adjacent pulse pair",
    ]
    _write_csv(args.out, comments, _SWEEP_COLUMNS, _sweep_rows(cfg))
    sys.stdout.write(f"wrote {args.out}\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load_config(args.config, args)
    if not cfg.powers_mw:
        raise ConfigError("no powers given (run.powers_mw or --powers)")
    rows = []
    for p in cfg.powers_mw:
        rates = mdl.expected_rates(cfg.model, p)
        if p > 0:
            fc = mdl.forecast(cfg.model, p)
            p_center, p_side, g2 = fc.p_center, fc.p_side, fc.g2
        else:
            p_center, p_side, g2 = 0.0, 0.0, math.nan
        rows.append(
            [
                float(p),
                rates.m_s,
                rates.m_as_pair,
                rates.m_as_thermal,
                rates.detected_s_hz,
                rates.detected_as_hz,
                p_center,
                p_side,
                g2,
            ]
        )
    comments = [
        "sascorr oracle (closed-form expectations; no randomness)",
        f"config_digest={config_digest(cfg)}",
        "g2 is nan where power is zero",
    ]
    _write_csv(args.out, comments, _ORACLE_COLUMNS, rows)
    sys.stdout.write(f"wrote {args.out}\n")
    return EXIT_OK


def _parse_bases(text: str) -> list[tuple[int, ...]]:
    bases = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            bases.append(tuple(int(tok) for tok in chunk.replace(",", " ").split()))
    if not bases:
        raise ConfigError(f"no candidate bases in {text!r}")
    return bases


def cmd_fit(args) -> int:
    table = _read_csv_columns(args.csv)
    if args.column not in table:
        raise TagFormatError(
            f"column {args.column!r} not in CSV (have {sorted(table)})", 0
        )
    if "power_mW" not in table:
        raise TagFormatError("CSV has no power_mW column", 0)
    power = table["power_mW"]
    value = table[args.column]
    if args.sigma_column:
        if args.sigma_column not in table:
            raise TagFormatError(f"sigma column {args.sigma_column!r} not in CSV", 0)
        sigma = table[args.sigma_column]
    else:
        sigma = pf.poisson_sigma(value)
    series = pf.DataSeries(
        power_mw=power, value=value, sigma=sigma, label=args.column
    )
    best = pf.select_model(series, _parse_bases(args.bases))
    lines = [
        f"column={args.column}",
        f"basis={','.join(str(e) for e in best.basis)}",
    ]
    for e, c, s in zip(best.basis, best.coefficients, best.stderr):
        lines.append(f"coeff_P{e}={_fmt(float(c))} +- {_fmt(float(s))}")
    lines += [
        f"chi2={_fmt(best.chi2)}",
        f"dof={best.dof}",
        f"aic={_fmt(best.aic)}",
    ]
    positive = (power > 0) & (value > 0)
    if positive.sum() >= 2 and len(set(power[positive])) >= 2:
        expo = pf.fit_exponent(
            pf.DataSeries(
                power_mw=power[positive],
                value=value[positive],
                sigma=sigma[positive],
                label=args.column,
            )
        )
        lines.append(f"exponent={_fmt(expo.exponent)} +- {_fmt(expo.stderr)}")
        if positive.sum() != len(power):
            lines.append(
                f"exponent_note=fitted on {int(positive.sum())} of {len(power)} "
                "rows (non-positive rows dropped)"
            )
    else:
        expo = None
        lines.append("exponent=nan (not enough positive rows)")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.plot:
        _plot_fit(args.plot, series, best, expo)
        sys.stdout.write(f"wrote {args.plot}\n")
    return EXIT_OK


def _plot_fit(path, series, best, expo) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.errorbar(
        series.power_mw,
        series.value,
        yerr=series.sigma,
        fmt="o",
        ms=4,
        capsize=2,
        label=series.label or "data",
    )
    grid = np.geomspace(series.power_mw.min(), series.power_mw.max(), 200)
    ax.plot(grid, best.predict(grid), "-", label=f"fit {best.basis}")
    positive = np.all(series.value > 0) and np.all(series.power_mw > 0)
    if positive:
        ax.set_xscale("log")
        ax.set_yscale("log")
        if expo is not None:
            guide_slope = round(expo.exponent)
            anchor_i = len(series) // 2
            anchor_p = series.power_mw[anchor_i]
            anchor_v = series.value[anchor_i]
            ax.plot(
                grid,
                anchor_v * (grid / anchor_p) ** guide_slope,
                "--",
                color="gray",
                label=f"slope {guide_slope:+d} guide",
            )
    ax.set_xlabel("power (mW)")
    ax.set_ylabel(series.label or "value")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sascorr",
        description="Stokes/anti-Stokes pair statistics: simulate, correlate, fit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the model and write an RTG1 tag file")
    p.add_argument("--config", required=True)
    p.add_argument("--power", type=float, default=None, help="laser power in mW")
    p.add_argument("--out", required=True, help="output RTG1 path")
    p.add_argument("--n-pulses", dest="n_pulses", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("correlate", help="histogram + comb peaks + g2 report")
    p.add_argument("tagfile")
    p.add_argument("--bin-width-ps", dest="bin_width_ps", type=int, default=None)
    p.add_argument("--window-ps", dest="window_ps", type=int, default=1000)
    p.add_argument(
        "--max-lag-multiples",
        dest="max_lag_multiples",
        type=int,
        default=6,
        help="how many repetition periods of lag to histogram on each side",
    )
    p.add_argument("--out-prefix", dest="out_prefix", required=True)
    p.add_argument(
        "--autocorr",
        action="store_true",
        help="also HBT-autocorrelate each channel and report the Cauchy-Schwarz factor",
    )
    p.add_argument("--splitter-seed", dest="splitter_seed", type=int, default=20260809)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("sweep", help="count-level power sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--powers", type=_parse_powers, default=None)
    p.add_argument("--n-pulses", dest="n_pulses", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="power-series + exponent fit on a CSV column")
    p.add_argument("csv")
    p.add_argument("--column", required=True)
    p.add_argument(
        "--bases",
        default="1;2;1,2;2,3;1,2,3",
        help="candidate exponent sets, e.g. '1,2;2,3'",
    )
    p.add_argument("--sigma-column", dest="sigma_column", default=None)
    p.add_argument("--report", default=None, help="also write the report to a file")
    p.add_argument("--plot", default=None, help="write an SVG plot")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("oracle", help="closed-form expectations to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--powers", type=_parse_powers, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TagFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (pf.FitError, mdl.CalibrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"file not found: {exc.filename}", file=sys.stderr)
        return EXIT_FORMAT
    except (ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
