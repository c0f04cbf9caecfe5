#!/usr/bin/env python3
"""
Bandwidth Demo: Pixel Filter Response

This script prints the pixel bandwidth over radiance, the step responses for
brightening and darkening, and the importance-sampled blurred log-radiance
synthesis. With --plot (matplotlib required) the curves are saved as PNGs.
"""

import argparse
import math

import numpy as np

from src.filter_engine import synthesize_blurred_log_radiance
from src.pixel_model import (
    PixelBandwidthParams,
    format_params,
    lux_to_illuminance_scale,
)
from src.response import bandwidth_sweep, step_response


def time_to_half(rows):
    start, end = rows[0, 4], rows[-1, 1]
    progress = (rows[:, 4] - start) / (end - start)
    return rows[np.argmax(progress >= 0.5), 0]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument('--lux', type=float, default=1000.0)
    parser.add_argument('--plot', action='store_true', help="save PNG plots")
    args = parser.parse_args()

    params = PixelBandwidthParams.default()
    scale = lux_to_illuminance_scale(args.lux)

    print("=" * 60)
    print("Pixel Bandwidth Demo")
    print("=" * 60)
    print()
    print(format_params(params, radiance=scale))
    print()

    # Bandwidth over the intensity range of the scene
    print(f"Bandwidth at {args.lux:g} lux:")
    print("=" * 60)
    intensities = [0.01, 0.03, 0.1, 0.3, 1.0]
    sweep = bandwidth_sweep(params, [i * scale for i in intensities])
    print(f"{'intensity':>10} {'L_sig':>10} {'-3 dB (Hz)':>12} {'1-pole (Hz)':>12}")
    for intensity, (L, bw, dom) in zip(intensities, sweep):
        print(f"{intensity:>10.2f} {L:>10.0f} {bw:>12.1f} {dom:>12.1f}")
    print()

    # Brightening vs darkening
    print("Step responses (time to 50%):")
    print("=" * 60)
    u_dark = math.log(0.02 * scale + params.black_level)
    u_bright = math.log(scale + params.black_level)
    up = step_response(params, u_dark, u_bright, duration=0.05, n=5000)
    down = step_response(params, u_bright, u_dark, duration=0.05, n=5000)
    print(f"✓ dark -> bright: {time_to_half(up) * 1e3:.3f} ms")
    print(f"✓ bright -> dark: {time_to_half(down) * 1e3:.3f} ms")
    print()

    # Blurred log-radiance from 30 importance-sampled inputs
    print("Blurred log-radiance synthesis:")
    print("=" * 60)
    for t_k in (0.0005, 0.002, 0.01):
        def u_fn(t):
            return u_bright if t > 0 else u_dark
        sf, diff = synthesize_blurred_log_radiance(u_fn, t_k, params)
        reference = np.interp(t_k, up[:, 0], up[:, 4])
        print(f"  t={t_k * 1e3:6.2f} ms  logL_diff={diff:.4f}  (stepped filter {reference:.4f})")
    print()

    if args.plot:
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt

        radiances = np.logspace(0, 6, 61)
        curve = bandwidth_sweep(params, radiances)
        fig, ax = plt.subplots()
        ax.loglog(curve[:, 0], curve[:, 1], label="4th-order -3 dB")
        ax.loglog(curve[:, 0], curve[:, 2], '--', label="dominant pole")
        ax.set_xlabel("signal radiance")
        ax.set_ylabel("bandwidth (Hz)")
        ax.legend()
        fig.savefig("bandwidth.png", dpi=120)

        fig, ax = plt.subplots()
        ax.plot(up[:, 0] * 1e3, up[:, 4], label="brightening")
        ax.plot(down[:, 0] * 1e3, down[:, 4], label="darkening")
        ax.set_xlabel("time (ms)")
        ax.set_ylabel("logL_diff")
        ax.legend()
        fig.savefig("step_response.png", dpi=120)
        print("✓ Saved bandwidth.png and step_response.png")

    print("=" * 60)
    print("Demo complete")
    print("=" * 60)


if __name__ == "__main__":
    main()
