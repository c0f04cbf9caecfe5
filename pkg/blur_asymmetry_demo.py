#!/usr/bin/env python3
"""
Blur Asymmetry Demo: Moving Bar

This script simulates a bright bar moving across a dark background, once
with the pixel filter and once with an ideal (infinite-bandwidth) camera,
and compares event counts and how far events trail the bar edges.
With --sweep it repeats the comparison over a range of light levels and
over easy / medium / hard (speed, lux) settings.
"""

import argparse

from src.event_core import EventCameraConfig
from src.pixel_model import PixelBandwidthParams, lux_to_illuminance_scale
from src.response import bandwidth_sweep
from src.scenes import MovingBarScene
from src.simulator import (
    RadiometryConfig,
    SimulationOptions,
    compare_to_ideal,
    edge_offset_spread,
    event_statistics,
    simulate,
    write_events,
)

SWEEP_LUX = (100000.0, 1000.0, 10.0)

# (label, speed in px/s, lux)
DIFFICULTY = (
    ('easy', 250.0, 100000.0),
    ('medium', 500.0, 1000.0),
    ('hard', 1000.0, 10.0),
)


def bar_scene(speed, width=64, height=8, duration=0.1):
    return MovingBarScene(width=width, height=height, bar_width=width / 4, speed=speed,
                          foreground=1.0, background=0.02, duration=duration)


def sweep_row(label, speed, lux, params, cam, workers=1, **scene_kw):
    """Bandwidth span over the scene and filtered/ideal event counts at one setting."""
    scene = bar_scene(speed, **scene_kw)
    scale = lux_to_illuminance_scale(lux)
    span = bandwidth_sweep(params, [scene.background * scale, scene.foreground * scale])
    counts = compare_to_ideal(scene, RadiometryConfig(illuminance_scale=scale), params, cam,
                              SimulationOptions(workers=workers))
    return {
        'label': label,
        'speed': speed,
        'lux': lux,
        'bw_lo_hz': float(span[0, 1]),
        'bw_hi_hz': float(span[1, 1]),
        **counts,
    }


def print_rows(rows):
    print(f"{'setting':>8} {'speed':>7} {'lux':>8} {'bandwidth (Hz)':>18} "
          f"{'filtered':>9} {'ideal':>7} {'ratio':>6}")
    for row in rows:
        span = f"{row['bw_lo_hz']:.0f}-{row['bw_hi_hz']:.0f}"
        print(f"{row['label']:>8} {row['speed']:>7g} {row['lux']:>8g} {span:>18} "
              f"{row['filtered']:>9d} {row['ideal']:>7d} {row['ratio']:>6.0%}")


def report(name, stream, scene):
    stats = event_statistics(stream)
    pos = edge_offset_spread(stream, scene.leading_edge, 1)
    neg = edge_offset_spread(stream, scene.trailing_edge, -1)
    print(f"{name}:")
    print(f"  events: {stats['total']} ({stats['positive']} +, {stats['negative']} -)")
    print(f"  rate: {stats['rate_hz']:.0f} ev/s")
    print(f"  +1 offset spread from leading edge:  {pos:.2f} px")
    print(f"  -1 offset spread from trailing edge: {neg:.2f} px")


def run_single(args, params, cam):
    scene = bar_scene(args.speed)
    radiometry = RadiometryConfig(illuminance_scale=lux_to_illuminance_scale(args.lux))

    print(f"Scene: {scene.width}x{scene.height}, bar {scene.bar_width:g} px at "
          f"{scene.speed:g} px/s, {args.lux:g} lux")
    print()

    filtered = simulate(scene, radiometry, params, cam, SimulationOptions(workers=args.workers))
    ideal = simulate(scene, radiometry, params, cam,
                     SimulationOptions(workers=args.workers, infinite_bandwidth=True))

    report("Pixel filter", filtered, scene)
    print()
    report("Ideal camera", ideal, scene)
    print()

    if len(ideal):
        print(f"✓ Filter kept {len(filtered) / len(ideal):.0%} of the ideal events")

    if args.out:
        path = write_events(filtered, args.out)
        print(f"✓ Wrote {len(filtered)} events to {path}")


def run_sweep(args, params, cam):
    print(f"Light levels at {args.speed:g} px/s:")
    print("=" * 60)
    print_rows([sweep_row(f"{lux:g}lx", args.speed, lux, params, cam, args.workers)
                for lux in SWEEP_LUX])
    print()

    print("Difficulty settings:")
    print("=" * 60)
    print_rows([sweep_row(label, speed, lux, params, cam, args.workers)
                for label, speed, lux in DIFFICULTY])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument('--lux', type=float, default=10.0)
    parser.add_argument('--speed', type=float, default=500.0)
    parser.add_argument('--workers', type=int, default=4)
    parser.add_argument('--out', help="write the filtered stream here (.csv or .bin)")
    parser.add_argument('--sweep', action='store_true',
                        help=f"compare at {', '.join(f'{v:g}' for v in SWEEP_LUX)} lux "
                             "and at the easy/medium/hard settings")
    args = parser.parse_args()

    print("=" * 60)
    print("Blur Asymmetry Demo")
    print("=" * 60)
    print()

    params = PixelBandwidthParams.default()
    cam = EventCameraConfig(c_pos=0.25, c_neg=0.25)

    if args.sweep:
        run_sweep(args, params, cam)
    else:
        run_single(args, params, cam)

    print()
    print("=" * 60)
    print("Demo complete")
    print("=" * 60)


if __name__ == "__main__":
    main()
