"""Orientation and incircle predicates with exact signs.

Each predicate evaluates in double precision first and accepts the sign when
the magnitude clears a forward error bound (Shewchuk's stage-A bounds).
Otherwise the determinant is recomputed in exact rational arithmetic, which
is always possible because every double is a dyadic rational.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

_EPS = 2.0 ** -53
CCW_ERRBOUND = (3.0 + 16.0 * _EPS) * _EPS
ICC_ERRBOUND = (10.0 + 96.0 * _EPS) * _EPS


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def orient2d_exact(ax, ay, bx, by, cx, cy) -> int:
    ax, ay, bx, by, cx, cy = map(Fraction, (ax, ay, bx, by, cx, cy))
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def orient2d(ax, ay, bx, by, cx, cy) -> int:
    """+1 if a, b, c turn counter-clockwise, -1 clockwise, 0 collinear."""
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    if abs(det) > CCW_ERRBOUND * (abs(detleft) + abs(detright)):
        return 1 if det > 0 else -1
    return orient2d_exact(ax, ay, bx, by, cx, cy)


def incircle_exact(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    ax, ay, bx, by, cx, cy, dx, dy = map(Fraction, (ax, ay, bx, by, cx, cy, dx, dy))
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    det = ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
           + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
           + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))
    return _sign(det)


def incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """+1 if d lies strictly inside the circle through CCW a, b, c; 0 on it."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    if abs(det) > ICC_ERRBOUND * permanent:
        return 1 if det > 0 else -1
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def orient2d_many(ax, ay, bx, by, px, py) -> np.ndarray:
    """Vectorized :func:`orient2d`; all six arguments broadcast together."""
    ax, ay, bx, by, px, py = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                                   for v in (ax, ay, bx, by, px, py)))
    detleft = (ax - px) * (by - py)
    detright = (ay - py) * (bx - px)
    det = detleft - detright
    out = np.sign(det).astype(np.int8)
    unsure = np.abs(det) <= CCW_ERRBOUND * (np.abs(detleft) + np.abs(detright))
    for i in zip(*np.nonzero(unsure)):
        out[i] = orient2d_exact(float(ax[i]), float(ay[i]), float(bx[i]), float(by[i]),
                                float(px[i]), float(py[i]))
    return out
