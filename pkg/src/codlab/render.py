"""Flat SVG scatter plots of axis-aligned slices through a point cloud."""

from __future__ import annotations

import warnings

import numpy as np

from .codiagonal import as_points
from .errors import EmptySlice


def slice_points(cloud, axes, offsets=None, thickness: float = 0.05) -> np.ndarray:
    """Points within ``thickness`` of the offsets on every non-plotted axis, projected to ``axes``."""
    P = as_points(cloud)
    n = P.shape[1]
    i, j = (int(a) for a in axes)
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"axes must be two distinct indices in 0..{n - 1}")
    if thickness < 0:
        raise ValueError("thickness must be non-negative")
    rest = [k for k in range(n) if k not in (i, j)]
    offsets = np.zeros(len(rest)) if offsets is None else np.atleast_1d(np.asarray(offsets, dtype=float))
    if offsets.size != len(rest):
        raise ValueError(f"need {len(rest)} offsets for the remaining axes {rest}")
    keep = np.ones(P.shape[0], dtype=bool)
    for k, o in zip(rest, offsets):
        keep &= np.abs(P[:, k] - o) <= thickness
    return P[keep][:, [i, j]]


def render_slice(cloud, axes=(0, 1), offsets=None, thickness: float = 0.05, size: int = 512,
                 bounds=None, max_points: int = 20000) -> str:
    """SVG text for the slice; warns :class:`EmptySlice` (and still draws the frame) when nothing is in the slab.

    ``bounds`` is ``((x_lo, y_lo), (x_hi, y_hi))``; by default the extent of
    the sliced points.  At most ``max_points`` points are drawn, taken at
    an even stride so the output is deterministic.
    """
    Q = slice_points(cloud, axes, offsets, thickness)
    if Q.shape[0] == 0:
        warnings.warn("no points fall inside the slice", EmptySlice, stacklevel=2)
    if bounds is None:
        if Q.shape[0]:
            lo, hi = Q.min(axis=0), Q.max(axis=0)
        else:
            lo, hi = np.zeros(2), np.ones(2)
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    if Q.shape[0] > max_points:
        Q = Q[:: int(np.ceil(Q.shape[0] / max_points))]
    margin = 24
    inner = size - 2 * margin
    X = margin + (Q[:, 0] - lo[0]) / span[0] * inner
    Y = size - margin - (Q[:, 1] - lo[1]) / span[1] * inner
    i, j = axes
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="{margin}" y="{margin}" width="{inner}" height="{inner}" fill="white" stroke="black"/>',
        f'<text x="{size / 2:.1f}" y="{size - 6}" font-size="11" text-anchor="middle">'
        f'x{i} [{lo[0]:.4g}, {hi[0]:.4g}]</text>',
        f'<text x="10" y="{size / 2:.1f}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 10 {size / 2:.1f})">x{j} [{lo[1]:.4g}, {hi[1]:.4g}]</text>',
        '<g fill="black">',
    ]
    out.extend(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="0.8"/>' for x, y in zip(X, Y))
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
