"""Empirical calibration of the silence radius used by schedule dilution."""

from __future__ import annotations

import math

from ..sinr import SinrParams, Station, box_distance, grid_coord, pivotal_cell, transmission_range
from ..ssf import DilutionConfig

MAX_SILENCE = 8
RECEIVER_DIRECTIONS = 64
CORNER_INSET = 1e-6


class CalibrationFailed(RuntimeError):
    pass


def _nearest_point_of_box(a: int, b: int, cell: float, px: float, py: float) -> tuple[float, float]:
    x = min(max(px, a * cell), (a + 1) * cell)
    y = min(max(py, b * cell), (b + 1) * cell)
    return x, y


def _boxes_at(distance: int, cell: float, reach: int):
    origin = grid_coord((0.5 * cell, 0.5 * cell), cell)
    for a in range(-reach, reach + 1):
        for b in range(-reach, reach + 1):
            if box_distance(origin, grid_coord(((a + 0.5) * cell, (b + 0.5) * cell), cell)) == distance:
                yield a, b


def silence_holds(params: SinrParams, k_density: int, d_silence: int) -> bool:
    """Adversarial check for one silence radius.

    The sender sits at the lower-left corner of box (0, 0); receivers lie on the
    circle of radius sqrt(2)*cell = r around it and at the opposite corner of the
    sender's box. For each receiver, all `k_density` interferers are stacked at the
    point, of any box at box distance exactly `d_silence`, closest to that receiver.
    """
    if k_density < 1:
        raise ValueError("k_density must be at least 1")
    cell = pivotal_cell(params)
    r = transmission_range(params)
    inset = CORNER_INSET * cell
    sx, sy = inset, inset
    sender = Station(0, sx, sy)
    receivers = [(cell - inset, cell - inset)]
    for i in range(RECEIVER_DIRECTIONS):
        ang = 2 * math.pi * i / RECEIVER_DIRECTIONS
        receivers.append((sx + r * (1 - 1e-9) * math.cos(ang), sy + r * (1 - 1e-9) * math.sin(ang)))
    boxes = list(_boxes_at(d_silence, cell, d_silence + 3))
    for rx, ry in receivers:
        listener = Station(-1, rx, ry)
        best = min((_nearest_point_of_box(a, b, cell, rx, ry) for a, b in boxes),
                   key=lambda p: math.hypot(p[0] - rx, p[1] - ry))
        if math.hypot(best[0] - rx, best[1] - ry) < 1e-12:
            return False
        # Co-located interferers: the stack is evaluated directly, not via a station set.
        interferers = [Station(i + 1, best[0], best[1]) for i in range(k_density)]
        if not _receives_with_stack(sender, listener, interferers, params):
            return False
    return True


def _receives_with_stack(sender, listener, interferers, params) -> bool:
    d_signal = math.hypot(sender.x - listener.x, sender.y - listener.y)
    signal = params.power / d_signal ** params.alpha
    interference = sum(params.power / math.hypot(s.x - listener.x, s.y - listener.y) ** params.alpha
                       for s in interferers)
    floor = params.sensitivity_floor
    tol = 1 + 1e-9
    return signal * tol >= params.beta * (params.noise + interference) and signal * tol >= floor


def calibrate_dilution(params: SinrParams, k_density: int, max_silence: int = MAX_SILENCE) -> DilutionConfig:
    """Smallest silence radius in [1, max_silence] passing the adversarial check."""
    if k_density < 1:
        raise ValueError("k_density must be at least 1")
    for d in range(1, max_silence + 1):
        if silence_holds(params, k_density, d):
            return DilutionConfig(k_density, d)
    raise CalibrationFailed(f"no silence radius up to {max_silence} works for k={k_density}, {params}")

