"""Independent reference implementations used to check the library.

Nothing here imports the code under test beyond plain data types, so a bug
in the library cannot leak into its own oracle.
"""

from __future__ import annotations

import math

import numpy as np

# -- kinematics: bisection roots of the explicit moment balances --------------


def bisect(f, lo, hi, iters: int = 200):
    """Vectorized bisection; f(lo) and f(hi) must differ in sign elementwise."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def pp_pat_root(theta_t, mu):
    """Root of sum M_B - sum M_T: cos(θT+θ) - μ sin(θT+θ) = 0."""
    theta_t = np.asarray(theta_t, dtype=float)
    mu = np.asarray(mu, dtype=float) + 0 * theta_t
    f = lambda th: np.cos(theta_t + th) - mu * np.sin(theta_t + th)
    eps = 1e-12
    return bisect(f, -theta_t + eps, math.pi - theta_t - eps)


def _moment_b(th, theta_t, l_a, l_b, mu, radius, friction_sign, n_force):
    # Moment about the contact pivot B divided by P*pi*R^2, with the normal
    # force expressed through the tip force balance.
    lever_n = l_a * np.cos(th) + l_b * np.cos(theta_t + th)
    lever_f = l_a * np.sin(th) + l_b * np.sin(theta_t + th)
    return n_force(th) * (lever_n + friction_sign * mu * lever_f) + friction_sign * radius


def pat_fl_root(theta_t, l_a, l_b, mu, radius):
    """Moment balance at B with the negative-moment normal force."""
    theta_t, l_a, l_b, mu, radius = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (theta_t, l_a, l_b, mu, radius)])
    n = lambda th: 1.0 / (np.sin(th) + mu * np.cos(th))
    f = lambda th: _moment_b(th, theta_t, l_a, l_b, mu, radius, -1.0, n) * (np.sin(th) + mu * np.cos(th))
    a = np.arctan(mu)
    eps = 1e-12
    return bisect(f, -a + eps, math.pi - a - eps)


def fl_np_root(theta_t, l_a, l_b, mu, radius):
    """Moment balance at B with the positive-moment normal force."""
    theta_t, l_a, l_b, mu, radius = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (theta_t, l_a, l_b, mu, radius)])
    n = lambda th: 1.0 / (np.sin(th) - mu * np.cos(th))
    f = lambda th: _moment_b(th, theta_t, l_a, l_b, mu, radius, 1.0, n) * (np.sin(th) - mu * np.cos(th))
    a = np.arctan(mu)
    eps = 1e-12
    return bisect(f, a + eps, math.pi - eps)


def straight_threshold_root(slenderness, mu):
    """Contact angle where the tip force balance tips from sliding to buckling.

    Balance of the pressure thrust components: the wall-tangent thrust
    overcomes friction plus the bending moment transferred to the tip.
    Solved as tan(θ) = (s - μ)/(μ s + 1) written as a root of
    (s - μ) cos θ - (μ s + 1) sin θ.
    """
    s = np.asarray(slenderness, dtype=float)
    f = lambda th: (s - mu) * np.cos(th) - (mu * s + 1.0) * np.sin(th)
    return bisect(f, np.zeros_like(s) - math.pi / 2 + 1e-12, np.zeros_like(s) + math.pi / 2 - 1e-12)


# -- geometry: brute force -----------------------------------------------------


def winding_number(p, verts) -> int:
    wn = 0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        is_left = (x1 - x0) * (p[1] - y0) - (p[0] - x0) * (y1 - y0)
        if y0 <= p[1]:
            if y1 > p[1] and is_left > 0:
                wn += 1
        elif y1 <= p[1] and is_left < 0:
            wn -= 1
    return wn


def dist_point_segment(p, a, b):
    ax, ay = a
    bx, by = b
    ex, ey = bx - ax, by - ay
    ll = ex * ex + ey * ey
    s = 0.0 if ll == 0 else max(0.0, min(1.0, ((p[0] - ax) * ex + (p[1] - ay) * ey) / ll))
    return math.hypot(p[0] - ax - s * ex, p[1] - ay - s * ey)


def dist_to_boundary(p, verts):
    n = len(verts)
    return min(dist_point_segment(p, verts[i], verts[(i + 1) % n]) for i in range(n))


def naive_line_of_sight(a, b, polygons, samples: int = 4000, margin: float = 1e-7) -> bool:
    """Dense sampling along the open segment with a winding-number test."""
    for k in range(1, samples):
        t = k / samples
        p = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        for verts in polygons:
            if winding_number(p, verts) != 0 and dist_to_boundary(p, verts) > margin:
                return False
    return True


def naive_ray_cast(origin, heading, polygons):
    """Minimum over all closed edges of the forward intersection distance."""
    hx, hy = math.cos(heading), math.sin(heading)
    best = None
    for verts in polygons:
        n = len(verts)
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            ex, ey = bx - ax, by - ay
            den = hx * ey - hy * ex
            if abs(den) < 1e-15:
                continue
            wx, wy = ax - origin[0], ay - origin[1]
            t = (wx * ey - wy * ex) / den
            u = (wx * hy - wy * hx) / den
            if t > 1e-9 and -1e-12 <= u <= 1 + 1e-12 and (best is None or t < best):
                best = t
    return best


# -- simulator: incremental growth without a visibility graph ---------------------


def _seg_params(p, q, verts):
    """Parameters along p->q where it meets the polygon boundary."""
    out = []
    dx, dy = q[0] - p[0], q[1] - p[1]
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        den = dx * ey - dy * ex
        wx, wy = ax - p[0], ay - p[1]
        if abs(den) < 1e-15:
            continue
        t = (wx * ey - wy * ex) / den
        u = (wx * dy - wy * dx) / den
        if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
            out.append(t)
    return out


def segment_free(p, q, polygons, margin: float = 1e-9) -> bool:
    """No point of the segment lies deeper than `margin` inside a polygon."""
    for verts in polygons:
        ts = sorted({0.0, 1.0, *[min(1.0, max(0.0, t)) for t in _seg_params(p, q, verts)]})
        for t0, t1 in zip(ts[:-1], ts[1:]):
            if t1 - t0 < 1e-12:
                continue
            t = 0.5 * (t0 + t1)
            m = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
            if winding_number(m, verts) != 0 and dist_to_boundary(m, verts) > margin:
                return False
    return True


def _signed(ux, uy, vx, vy):
    return math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)


def incremental_straight(polygons, launch, heading, max_length, radius, mu=0.3, ds=1e-3, bounds=(0.0, 0.0, 1.0, 1.0)):
    """Straight vine robot grown in small steps.

    The body is a chain of pivots. Each step first tries straight growth;
    if the tip would enter an obstacle it rotates the distal segment about
    the current pivot so the tip stays on the contacted wall (stuck inside
    the buckling band on a new wall). Obstacles cutting the rotated body
    add the first corner met by the sweep as a new pivot.

    Returns (shape points, termination).
    """
    polys = [list(map(tuple, v)) for v in polygons]
    edges = [(k, i) for k, v in enumerate(polys) for i in range(len(v))]

    def edge_pts(e):
        v = polys[e[0]]
        return v[e[1]], v[(e[1] + 1) % len(v)]

    shape = [tuple(launch)]
    P = tuple(launch)
    sP = 0.0
    tip = tuple(launch)
    th = heading
    L = 0.0
    cur = None
    x0, y0, x1, y1 = bounds
    crit = lambda s: math.atan2(1.0, mu) if radius <= 0 else math.atan((s / radius - mu) / (mu * s / radius + 1))

    def inside_any(m):
        return any(winding_number(m, v) != 0 and dist_to_boundary(m, v) > 1e-9 for v in polys)

    def circle_on_edge(center, r, e):
        a, b = edge_pts(e)
        ex, ey = b[0] - a[0], b[1] - a[1]
        wx, wy = a[0] - center[0], a[1] - center[1]
        A = ex * ex + ey * ey
        B = 2 * (wx * ex + wy * ey)
        C = wx * wx + wy * wy - r * r
        disc = B * B - 4 * A * C
        if disc < 0:
            return []
        s = math.sqrt(disc)
        return [(a[0] + t * ex, a[1] + t * ey) for t in ((-B - s) / (2 * A), (-B + s) / (2 * A)) if -1e-12 <= t <= 1 + 1e-12]

    for _ in range(200000):
        if L >= max_length - 1e-12:
            return shape + [tip], "length-exhausted"
        step = min(ds, max_length - L)
        Lnew = L + step
        dx, dy = math.cos(th), math.sin(th)
        cand = (P[0] + (Lnew - sP) * dx, P[1] + (Lnew - sP) * dy)
        # contact edge along tip -> cand
        best_t, hit = math.inf, None
        for e in edges:
            a, b = edge_pts(e)
            ts = _seg_params(tip, cand, [a, b])
            for t in ts:
                if 1e-9 < t < best_t:
                    w = 0.5 * (t + 1.0)
                    m = (tip[0] + w * (cand[0] - tip[0]), tip[1] + w * (cand[1] - tip[1]))
                    # only count crossings that lead inward
                    if inside_any(m):
                        best_t, hit = t, e
        mid = ((tip[0] + cand[0]) / 2, (tip[1] + cand[1]) / 2)
        if hit is None and inside_any(mid):
            touching = [e for e in edges if dist_point_segment(tip, *edge_pts(e)) < 1e-9]

            def lean(e):
                a, b = edge_pts(e)
                far = a if math.dist(a, tip) > math.dist(b, tip) else b
                return abs(_signed(dx, dy, far[0] - tip[0], far[1] - tip[1]))

            hit = min(touching, key=lean) if touching else None
        if hit is None:
            if not (x0 - 1e-12 <= cand[0] <= x1 + 1e-12 and y0 - 1e-12 <= cand[1] <= y1 + 1e-12):
                t = min(
                    ((x1 - tip[0]) / dx if dx > 1e-15 else math.inf),
                    ((x0 - tip[0]) / dx if dx < -1e-15 else math.inf),
                    ((y1 - tip[1]) / dy if dy > 1e-15 else math.inf),
                    ((y0 - tip[1]) / dy if dy < -1e-15 else math.inf),
                )
                tip = (tip[0] + t * dx, tip[1] + t * dy)
                return shape + [tip], "free-end"
            tip, L, cur = cand, Lnew, None
            continue
        a, b = edge_pts(hit)
        ex, ey = b[0] - a[0], b[1] - a[1]
        toward = b if dx * ex + dy * ey > 0 else a
        x = tip if best_t == math.inf else (tip[0] + best_t * (cand[0] - tip[0]), tip[1] + best_t * (cand[1] - tip[1]))
        sigma = 1.0 if dx * (toward[1] - x[1]) - dy * (toward[0] - x[0]) > 0 else -1.0
        if hit != cur:
            sx, sy = (ex, ey) if toward is b else (-ex, -ey)
            phi = abs(_signed(dx, dy, sx, sy))
            if phi > crit(math.dist(x, P)):
                return shape + [x], "stuck"
        # rotate about the pivot keeping the tip on this wall
        while True:
            r = Lnew - sP
            options = []
            for q in circle_on_edge(P, r, hit):
                ang = sigma * _signed(tip[0] - P[0], tip[1] - P[1], q[0] - P[0], q[1] - P[1])
                if -1e-12 <= ang < math.pi / 2:
                    options.append((ang, q))
            if options:
                q = min(options)[1]
                nL = Lnew
            else:
                q = toward
                nL = sP + math.dist(P, toward)
            if segment_free(P, q, polys):
                break
            # first corner met by the sweep from P->tip to P->q
            best = None
            ux, uy = tip[0] - P[0], tip[1] - P[1]
            qa = sigma * _signed(ux, uy, q[0] - P[0], q[1] - P[1])
            for k, verts in enumerate(polys):
                n = len(verts)
                for i, v in enumerate(verts):
                    if math.dist(v, P) < 1e-9:
                        continue
                    ang = sigma * _signed(ux, uy, v[0] - P[0], v[1] - P[1])
                    if not (-1e-9 <= ang <= qa + 1e-9):
                        continue
                    if math.dist(v, P) > max(math.dist(tip, P), math.dist(q, P)) + 1e-9:
                        continue
                    blocks = any(
                        sigma * ((v[0] - P[0]) * (w[1] - v[1]) - (v[1] - P[1]) * (w[0] - v[0])) > 1e-12
                        for w in (verts[(i + 1) % n], verts[(i - 1) % n])
                    )
                    if blocks and (best is None or ang < best[0]):
                        best = (ang, v)
            if best is None:
                return shape + [tip], "stuck"
            v = best[1]
            shape.append(v)
            sP += math.dist(P, v)
            P = v
        if not (x0 - 1e-12 <= q[0] <= x1 + 1e-12 and y0 - 1e-12 <= q[1] <= y1 + 1e-12):
            # left the world while sliding: stop where the wall path crosses the bounds
            lo, hi = 0.0, 1.0
            for _ in range(60):
                m = 0.5 * (lo + hi)
                p = (tip[0] + m * (q[0] - tip[0]), tip[1] + m * (q[1] - tip[1]))
                if x0 <= p[0] <= x1 and y0 <= p[1] <= y1:
                    lo = m
                else:
                    hi = m
            return shape + [(tip[0] + lo * (q[0] - tip[0]), tip[1] + lo * (q[1] - tip[1]))], "free-end"
        tip, L, cur = q, nL, hit
        th = math.atan2(tip[1] - P[1], tip[0] - P[0])
    raise RuntimeError("oracle did not terminate")


# -- mapping: cell coverage by clipping and by dense sampling -----------------


def _clip_half(poly, inside, cut):
    out = []
    for i in range(len(poly)):
        p, q = poly[i], poly[(i + 1) % len(poly)]
        if inside(q):
            if not inside(p):
                out.append(cut(p, q))
            out.append(q)
        elif inside(p):
            out.append(cut(p, q))
    return out


def clipped_area(poly, x0, y0, x1, y1) -> float:
    """Area of polygon `poly` inside the box, by Sutherland-Hodgman clipping."""

    def at_x(x):
        return lambda p, q: (x, p[1] + (q[1] - p[1]) * (x - p[0]) / (q[0] - p[0]))

    def at_y(y):
        return lambda p, q: (p[0] + (q[0] - p[0]) * (y - p[1]) / (q[1] - p[1]), y)

    pts = [tuple(map(float, p)) for p in poly]
    for inside, cut in (
        (lambda p: p[0] >= x0, at_x(x0)),
        (lambda p: p[0] <= x1, at_x(x1)),
        (lambda p: p[1] >= y0, at_y(y0)),
        (lambda p: p[1] <= y1, at_y(y1)),
    ):
        pts = _clip_half(pts, inside, cut)
        if not pts:
            return 0.0
    a = 0.0
    for i in range(len(pts)):
        (xa, ya), (xb, yb) = pts[i], pts[(i + 1) % len(pts)]
        a += xa * yb - xb * ya
    return abs(a) / 2


def clip_coverage(tri, n, size=1.0):
    """(n, n) grid [row=y, col=x] of the triangle's area in each cell."""
    h = size / n
    out = np.zeros((n, n))
    for r in range(n):
        for c in range(n):
            out[r, c] = clipped_area(tri, c * h, r * h, (c + 1) * h, (r + 1) * h)
    return out


def supersampled_coverage(tri, n, k=10, size=1.0):
    """(n, n) count of the k x k subcell centres of each cell that fall inside the triangle."""
    m = n * k
    c = (np.arange(m) + 0.5) * size / m
    X, Y = np.meshgrid(c, c)
    (ax, ay), (bx, by), (cx, cy) = tri
    d1 = (bx - ax) * (Y - ay) - (by - ay) * (X - ax)
    d2 = (cx - bx) * (Y - by) - (cy - by) * (X - bx)
    d3 = (ax - cx) * (Y - cy) - (ay - cy) * (X - cx)
    inside = ((d1 >= 0) & (d2 >= 0) & (d3 >= 0)) | ((d1 <= 0) & (d2 <= 0) & (d3 <= 0))
    return inside.reshape(n, k, n, k).sum(axis=(1, 3))
