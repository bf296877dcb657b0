#!/usr/bin/env python3
"""Power-scaling experiment: sweep laser power, fit the scaling laws.

Runs count-level Monte Carlo sweeps at the calibrated defaults and fits
  * the Stokes rate        (expected exponent 1),
  * the anti-Stokes mean   (linear + quadratic mixture),
  * the zero-delay pair counts (quadratic + cubic mixture, at unit
    detection efficiency so the counts are usable),
then prints the fit report and saves a log-log figure.

Example:
    python scripts/power_sweep_scaling.py --pulses 2000000 --out scaling.svg
"""

import argparse

import numpy as np

from sascorr.model import default_config
from sascorr.powerfit import DataSeries, fit_exponent, fit_poly, poisson_sigma, select_model
from sascorr.simulate import sweep


def run(args):
    powers = np.geomspace(args.p_min, args.p_max, args.points)
    cfg = default_config()
    rows = sweep(cfg, powers, args.pulses, seed=args.seed)

    stokes = np.array([r.summary.rate_s_hz for r in rows])
    as_totals = np.array(
        [r.summary.total_as_pair + r.summary.total_as_thermal for r in rows],
        dtype=float,
    )
    as_mean = as_totals / args.pulses
    as_sigma = np.sqrt(np.maximum(as_totals, 1.0)) / args.pulses

    seen = stokes > 0
    stokes_fit = fit_exponent(
        DataSeries(
            power_mw=powers[seen], value=stokes[seen], sigma=np.ones(int(seen.sum()))
        )
    )
    print(f"stokes rate exponent: {stokes_fit.exponent:.4f} +- {stokes_fit.stderr:.4f}")

    as_fit = fit_poly(
        DataSeries(power_mw=powers, value=as_mean, sigma=as_sigma, label="aS"),
        {1, 2},
    )
    for e, c, s in zip(as_fit.basis, as_fit.coefficients, as_fit.stderr):
        print(f"anti-stokes coeff P^{e}: {c:.4g} +- {s:.2g}  ({abs(c)/s:.1f} sigma)")
    crossover = as_fit.coefficients[0] / as_fit.coefficients[1]
    print(f"linear/quadratic crossover: {crossover:.3f} mW")

    unit = cfg.with_rates(eta_s=1.0, eta_as=1.0)
    rows_unit = sweep(unit, powers, args.pulses, seed=args.seed + 1)
    center = np.array([r.tally.center_sum for r in rows_unit], dtype=float)
    best = select_model(
        DataSeries(
            power_mw=powers, value=center, sigma=poisson_sigma(center), label="pairs"
        ),
        [{2}, {2, 3}, {1, 2, 3}],
    )
    print(f"zero-delay pair counts: selected basis {best.basis}, chi2 {best.chi2:.1f}")

    if args.out:
        plot(args.out, powers, stokes, as_mean, as_sigma, as_fit, center)


def plot(path, powers, stokes, as_mean, as_sigma, as_fit, center):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
    seen = stokes > 0
    ax1.loglog(
        powers[seen], stokes[seen] / stokes[seen][0], "o", color="crimson",
        label="Stokes rate",
    )
    scale = as_mean[0]
    ax1.errorbar(
        powers, as_mean / scale, yerr=as_sigma / scale, fmt="^", color="royalblue",
        label="anti-Stokes mean",
    )
    grid = np.geomspace(powers[0], powers[-1], 200)
    a, b = as_fit.coefficients
    ax1.loglog(grid, a * grid / scale, ":", color="gray", label="linear part")
    ax1.loglog(grid, b * grid**2 / scale, "--", color="gray", label="quadratic part")
    ax1.set_xlabel("power (mW)")
    ax1.set_ylabel("signal (scaled)")
    ax1.legend(fontsize=8)

    ax2.loglog(powers, center, "s", color="seagreen", label="zero-delay pairs")
    mid = len(powers) // 2
    ax2.loglog(
        grid, center[mid] * (grid / powers[mid]) ** 2, "--", color="gray",
        label="slope 2 guide",
    )
    ax2.loglog(
        grid, center[mid] * (grid / powers[mid]) ** 3, ":", color="gray",
        label="slope 3 guide",
    )
    ax2.set_xlabel("power (mW)")
    ax2.set_ylabel("pair counts")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    print(f"wrote {path}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p-min", type=float, default=0.5)
    parser.add_argument("--p-max", type=float, default=200.0)
    parser.add_argument("--points", type=int, default=13)
    parser.add_argument("--pulses", type=int, default=2_000_000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="scaling.svg")
    run(parser.parse_args())


if __name__ == "__main__":
    main()
