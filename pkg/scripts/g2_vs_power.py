#!/usr/bin/env python3
"""Zero-delay cross-correlation versus laser power.

Overlays the closed-form g2 curve on Monte Carlo estimates (peak-count
ratio from simulated time tags, at unit efficiency where g2 is unchanged
by thinning), with the 1/P asymptote and the low-power plateau marked.

Example:
    python scripts/g2_vs_power.py --pulses 2000000 --out g2.svg
"""

import argparse

import numpy as np

from sascorr.correlate import cross_correlate, extract_peaks, g2_from_peaks
from sascorr.model import default_config, g2_closed_form
from sascorr.simulate import simulate_run


def measure_g2(cfg, power, pulses, seed):
    stream, _ = simulate_run(cfg, power, pulses, seed=seed)
    rep = cfg.rep_period_ps
    bin_width = 86
    max_lag = (8 * (rep // bin_width) + 13) * bin_width
    hist = cross_correlate(stream.stokes, stream.antistokes, bin_width, max_lag)
    return g2_from_peaks(extract_peaks(hist, rep, cfg.coincidence_window_ps))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p-min", type=float, default=0.5)
    parser.add_argument("--p-max", type=float, default=200.0)
    parser.add_argument("--points", type=int, default=7)
    parser.add_argument("--pulses", type=int, default=2_000_000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="g2.svg")
    args = parser.parse_args()

    cfg = default_config().with_rates(eta_s=1.0, eta_as=1.0)
    k = cfg.rates
    plateau = 1.0 + k.k_r_per_mw / k.k_th_per_mw
    crossover = k.k_th_per_mw / (k.k_s_per_mw * k.k_r_per_mw)
    print(f"low-power plateau g2 = {plateau:.2f}, crossover near {crossover:.3f} mW")

    mc_powers = np.geomspace(args.p_min, args.p_max, args.points)
    estimates = []
    for i, power in enumerate(mc_powers):
        est = measure_g2(cfg, float(power), args.pulses, seed=args.seed + i)
        estimates.append(est)
        print(
            f"P = {power:8.3f} mW: g2 = {est.g2:7.4f} +- {est.sigma:.4f}   "
            f"closed form {g2_closed_form(cfg, float(power)):7.4f}"
        )

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grid = np.geomspace(crossover / 100, args.p_max, 400)
    curve = np.array([g2_closed_form(cfg, p) for p in grid])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(grid, curve - 1, "-", color="black", label="closed form  g2 - 1")
    ax.errorbar(
        mc_powers,
        [e.g2 - 1 for e in estimates],
        yerr=[e.sigma for e in estimates],
        fmt="o",
        color="crimson",
        label="Monte Carlo",
    )
    anchor = grid[-1]
    ax.loglog(
        grid,
        (g2_closed_form(cfg, anchor) - 1) * anchor / grid,
        "--",
        color="gray",
        label="1/P asymptote",
    )
    ax.axhline(plateau - 1, ls=":", color="gray", label="thermal-seed plateau")
    ax.set_xlabel("power (mW)")
    ax.set_ylabel("g2(0) - 1")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
