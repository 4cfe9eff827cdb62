"""Timing comparison of the compiled and pure-NumPy depth kernels.

Runs the three perception stages (render, robot removal, minimum-distance
search) on a representative workcell frame with each available backend,
checks that the outputs agree exactly, and prints per-stage timings plus
the achievable perception refresh rate.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from tpik.kinematics import Chain, default_arm
from tpik.perception import (
    CameraModel,
    Sphere,
    SurveillanceRegion,
    available_backends,
    min_distance_search,
    remove_robot,
    render_depth,
    robot_link_boxes,
)
from tpik.sim import person_proxy


def build_frame():
    model = default_arm()
    q = np.array([0.1, 0.5, -0.2, -1.2, 0.3, 0.8, 0.0])
    camera = CameraModel.looking_at((0.0, -1.6, 0.7), (0.0, 0.0, 0.7))
    person = person_proxy([0.0], [[0.45, 0.8, 0.9]]).primitive
    ball = Sphere(np.array([0.5, 0.3, 0.8]), 0.12)
    prims = [ball, person] + robot_link_boxes(model, q)
    chain = Chain(model, q)
    regions = [SurveillanceRegion(chain.joint_position(cp.joint, cp.offset),
                                  0.5, cp.label)
               for cp in model.control_points]
    return model, q, camera, prims, regions


def best_of(repeats, fn):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def stage_times(backend, repeats, frame):
    model, q, camera, prims, regions = frame
    image = render_depth(prims, camera, kernel_backend=backend)
    cleaned = remove_robot(image, model, q, kernel_backend=backend)
    times = {
        "render": best_of(repeats, lambda: render_depth(
            prims, camera, kernel_backend=backend)),
        "remove_robot": best_of(repeats, lambda: remove_robot(
            image, model, q, kernel_backend=backend)),
        "min_search": best_of(repeats, lambda: min_distance_search(
            cleaned, regions, kernel_backend=backend)),
    }
    return times, image, cleaned


def check_agreement(frames):
    """Backends must be interchangeable bit for bit."""
    names = list(frames)
    if len(names) < 2:
        return
    ref_img, ref_clean = frames[names[0]]
    for name in names[1:]:
        img, clean = frames[name]
        ref = np.nan_to_num(ref_img.values, nan=-1.0)
        got = np.nan_to_num(img.values, nan=-1.0)
        if not np.array_equal(ref, got):
            raise SystemExit(f"render mismatch between {names[0]} and {name}")
        ref = np.nan_to_num(ref_clean.values, nan=-1.0)
        got = np.nan_to_num(clean.values, nan=-1.0)
        if not np.array_equal(ref, got):
            raise SystemExit(f"removal mismatch between {names[0]} and {name}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats per stage (best is kept)")
    args = parser.parse_args()

    frame = build_frame()
    camera = frame[2]
    backends = available_backends()
    print(f"backends: {', '.join(backends)}   "
          f"image {camera.width}x{camera.height}")

    results = {}
    frames = {}
    for backend in backends:
        results[backend], *frames[backend] = stage_times(
            backend, args.repeats, frame)
    check_agreement(frames)

    stages = ("render", "remove_robot", "min_search")
    width = max(len(s) for s in stages)
    header = f"{'stage'.ljust(width)}  " + "  ".join(
        f"{b + ' (ms)':>14}" for b in backends)
    if len(backends) > 1:
        header += f"  {'speedup':>8}"
    print(header)
    totals = dict.fromkeys(backends, 0.0)
    for stage in stages:
        cells = []
        for backend in backends:
            t = results[backend][stage]
            totals[backend] += t
            cells.append(f"{t * 1e3:14.2f}")
        line = f"{stage.ljust(width)}  " + "  ".join(cells)
        if len(backends) > 1:
            line += f"  {results[backends[-1]][stage] / results[backends[0]][stage]:7.1f}x"
        print(line)
    for backend in backends:
        print(f"{backend}: full refresh {totals[backend] * 1e3:.2f} ms "
              f"-> {1.0 / totals[backend]:.0f} Hz")


if __name__ == "__main__":
    main()
