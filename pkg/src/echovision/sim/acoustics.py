"""Echo synthesis by the image-source method for shoebox rooms.

Wall reflections come from mirrored virtual sources enumerated per axis up
to a reflection order; each obstacle adds one first-order specular echo off
its best-facing face. Delays are rounded to the sample grid and amplitudes
follow spherical spreading with a per-reflection absorption factor.

Floating-point care: per-axis coordinate differences are evaluated in a
form that is symmetric under exchanging source and microphone (even-order
images negate exactly, odd-order images are computed from s+m), and taps
are accumulated in a canonical sort order. Swapping source and microphone
therefore yields a bit-identical impulse response, not merely a close one.
"""

import math
import numpy as np

from .scene import Scene, SensorRig


def _check_inside(scene, p, name):
    if not np.all((p > 0) & (p < scene.room_size)):
        raise ValueError(f"{name} {p} outside room of size {scene.room_size}")


def _wall_image_taps(scene, src, mic, max_order, sample_rate, include_direct):
    """(delay, amplitude, order) for every room image source up to max_order."""
    c = scene.speed_of_sound
    absorb = 1.0 - scene.wall_absorption
    four_pi = 4.0 * math.pi
    axis_diffs = []
    for a in range(3):
        L = float(scene.room_size[a])
        s = float(src[a])
        m = float(mic[a])
        per_q = {}
        for q in range(-max_order, max_order + 1):
            if q % 2 == 0:
                per_q[q] = q * L + (s - m)
            else:
                per_q[q] = (q + 1) * L - (s + m)
        axis_diffs.append(per_q)

    taps = []
    for qx in range(-max_order, max_order + 1):
        for qy in range(-max_order, max_order + 1):
            for qz in range(-max_order, max_order + 1):
                order = abs(qx) + abs(qy) + abs(qz)
                if order > max_order:
                    continue
                if order == 0 and not include_direct:
                    continue
                dx = axis_diffs[0][qx]
                dy = axis_diffs[1][qy]
                dz = axis_diffs[2][qz]
                d = math.sqrt(dx * dx + dy * dy + dz * dz)
                if d == 0.0:
                    raise ValueError("microphone coincides with source")
                amp = absorb ** order / (four_pi * d)
                delay = int(round(d / c * sample_rate))
                taps.append((delay, amp, order))
    return taps


def _obstacle_tap(scene, box, src, mic, sample_rate):
    """Best first-order specular reflection off one obstacle, or None.

    A face qualifies when source and microphone are both strictly on its
    outer side and the specular point lies within the face rectangle; the
    shortest qualifying path wins.
    """
    c = scene.speed_of_sound
    absorb = 1.0 - scene.wall_absorption
    four_pi = 4.0 * math.pi
    best = None
    for a in range(3):
        s = float(src[a])
        m = float(mic[a])
        for face, outward_below in ((float(box.lo[a]), True),
                                    (float(box.hi[a]), False)):
            if outward_below:
                if not (s < face and m < face):
                    continue
                ds = face - s
                dm = face - m
            else:
                if not (s > face and m > face):
                    continue
                ds = s - face
                dm = m - face
            den = ds + dm
            ok = True
            diffs = [0.0, 0.0, 0.0]
            diffs[a] = 2.0 * face - (s + m)
            for b in range(3):
                if b == a:
                    continue
                sb = float(src[b])
                mb = float(mic[b])
                p = (sb * dm + mb * ds) / den
                if not (float(box.lo[b]) <= p <= float(box.hi[b])):
                    ok = False
                    break
                diffs[b] = sb - mb
            if not ok:
                continue
            d = math.sqrt(diffs[0] * diffs[0] + diffs[1] * diffs[1]
                          + diffs[2] * diffs[2])
            if d == 0.0:
                continue
            if best is None or d < best[0]:
                amp = absorb / (four_pi * d)
                delay = int(round(d / c * sample_rate))
                best = (d, delay, amp)
    if best is None:
        return None
    return (best[1], best[2], 1)


def echo_taps(scene, src, mic, max_order, sample_rate, include_direct=True):
    """All (delay_sample, amplitude, order) taps, canonically sorted.

    Sorting by (delay, amplitude) fixes the accumulation order so that the
    result is independent of enumeration order.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    src = np.asarray(src, dtype=np.float64)
    mic = np.asarray(mic, dtype=np.float64)
    _check_inside(scene, src, "source")
    _check_inside(scene, mic, "microphone")
    taps = _wall_image_taps(scene, src, mic, max_order, sample_rate,
                            include_direct)
    if max_order >= 1:
        for box in scene.obstacles:
            tap = _obstacle_tap(scene, box, src, mic, sample_rate)
            if tap is not None:
                taps.append(tap)
    taps.sort(key=lambda t: (t[0], t[1]))
    return taps


def impulse_response(scene, src, mic, max_order, length, sample_rate,
                     include_direct=True):
    """Room impulse response between a source and microphone position.

    Taps beyond ``length`` samples are dropped silently; the caller picks
    a length that covers the reflection orders it cares about.
    """
    ir = np.zeros(length, dtype=np.float64)
    for delay, amp, _ in echo_taps(scene, src, mic, max_order, sample_rate,
                                   include_direct=include_direct):
        if 0 <= delay < length:
            ir[delay] += amp
    return ir


def render_echo(scene, rig, chirp, max_order, length, include_direct=True):
    """Binaural echo of the emitted sweep: tap-weighted chirp copies per ear.

    Equivalent to convolving the chirp with each ear's impulse response,
    but accumulated per tap in canonical order for reproducibility.
    """
    from ..signal import BinauralRecording

    n = len(chirp.samples)
    channels = []
    for mic in (rig.mic_left_pos, rig.mic_right_pos):
        out = np.zeros(length, dtype=np.float64)
        for delay, amp, _ in echo_taps(scene, rig.source_pos, mic, max_order,
                                       chirp.sample_rate,
                                       include_direct=include_direct):
            if delay >= length:
                continue
            stop = min(delay + n, length)
            out[delay:stop] += amp * chirp.samples[:stop - delay]
        channels.append(out)
    return BinauralRecording(left=channels[0], right=channels[1],
                             sample_rate=chirp.sample_rate)
