"""Timing comparison of the ray-cast backends.

Casts the same pixel grids through the compiled kernel and the numpy
fallback, reports rays per second for each, and verifies the outputs stay
bit-identical (both backends promise the same arithmetic in the same
order).
"""

import argparse
import time

import numpy as np

from echovision.sim.generate import SamplerConfig, sample_scene
from echovision.sim.render import camera_rays


def load_backends():
    from echovision.sim.kernels import raycast_np

    backends = {"numpy": raycast_np.cast_rays}
    try:
        from echovision.sim.kernels import _raycast
        backends["compiled"] = _raycast.cast_rays
    except ImportError:
        pass
    return backends


def build_cases(n_scenes, seed):
    cfg = SamplerConfig()
    cases = []
    for index in range(n_scenes):
        scene, rig = sample_scene(cfg, seed, index)
        if scene.obstacles:
            obs_lo = np.stack([b.lo for b in scene.obstacles])
            obs_hi = np.stack([b.hi for b in scene.obstacles])
        else:
            obs_lo = np.zeros((0, 3))
            obs_hi = np.zeros((0, 3))
        cases.append((rig.camera_pos, camera_rays(rig), np.zeros(3),
                      scene.room_size, obs_lo, obs_hi))
    return cases


def run(fn, cases, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for args in cases:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(
        description="compare ray-cast backend throughput")
    parser.add_argument("--scenes", type=int, default=50)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = load_backends()
    cases = build_cases(args.scenes, args.seed)
    n_rays = sum(c[1].shape[0] for c in cases)
    print(f"{args.scenes} scenes, {n_rays} rays per pass, "
          f"best of {args.repeats}")

    times = {}
    for name, fn in sorted(backends.items()):
        times[name] = run(fn, cases, args.repeats)
        print(f"  {name:9s} {times[name] * 1e3:8.1f} ms  "
              f"{n_rays / times[name] / 1e6:6.2f} Mrays/s")

    if len(backends) == 2:
        print(f"  speedup   {times['numpy'] / times['compiled']:8.2f}x")
        mismatches = 0
        for case in cases:
            outs = [backends[n](*case) for n in ("numpy", "compiled")]
            for a, b in zip(*outs):
                mismatches += int(not np.array_equal(a, b))
        print(f"  backend outputs identical: {mismatches == 0}")
    else:
        print("  compiled backend not built; numpy fallback only")


if __name__ == "__main__":
    main()
