"""Small numerical helpers shared by the potential and level-set modules."""

import numpy as np
from scipy.optimize import minimize_scalar


def grid_maximize(f, lo, hi, n_grid=4096, n_refine=3, xatol=1e-13):
    """Global max of a smooth 1D function on [lo, hi].

    ``f`` must accept numpy arrays.  A dense grid locates the best cells,
    each of which is then polished with a bounded Brent search.
    Returns ``(x_max, f_max)``.
    """
    xs = np.linspace(lo, hi, n_grid + 1)
    ys = f(xs)
    h = xs[1] - xs[0]
    best_x = xs[int(np.argmax(ys))]
    best_y = float(np.max(ys))
    for i in np.argsort(ys)[::-1][:n_refine]:
        a = max(lo, xs[i] - h)
        b = min(hi, xs[i] + h)
        res = minimize_scalar(lambda t: -float(f(np.array([t]))[0]), bounds=(a, b),
                              method="bounded", options={"xatol": xatol})
        if -res.fun > best_y:
            best_x, best_y = float(res.x), float(-res.fun)
    return best_x, best_y


def sublevel_length(margin, lo, hi, lipschitz, resolution=4096, max_depth=48, min_width=1e-15):
    """Lebesgue measure of ``{x in [lo, hi] : margin(x) >= 0}``.

    ``margin`` is vectorized and Lipschitz with constant ``lipschitz``.  Cells
    of the initial grid whose endpoint values cannot rule out a sign change are
    bisected, at most ``max_depth`` times; a cell is settled once
    ``|m(lo)| + |m(hi)| > lipschitz * width`` with equal signs.  Remaining
    sign-change cells contribute the linearly interpolated part.
    """
    if hi <= lo:
        return 0.0
    xs = np.linspace(lo, hi, resolution + 1)
    ms = margin(xs)
    a, b = xs[:-1], xs[1:]
    ma, mb = ms[:-1], ms[1:]
    total = 0.0
    for _ in range(max_depth + 1):
        width = b - a
        same = (ma >= 0) == (mb >= 0)
        settled = same & ((np.abs(ma) + np.abs(mb)) > lipschitz * width)
        total += float(np.sum(width[settled & (ma >= 0)]))
        keep = ~settled
        a, b, ma, mb = a[keep], b[keep], ma[keep], mb[keep]
        if a.size == 0:
            return total
        if np.all(b - a <= min_width) or a.size > 2_000_000:
            break
        mid = 0.5 * (a + b)
        mm = margin(mid)
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
        ma, mb = np.concatenate([ma, mm]), np.concatenate([mm, mb])
    # unresolved cells at the depth limit
    width = b - a
    both = (ma >= 0) & (mb >= 0)
    total += float(np.sum(width[both]))
    cross = (ma >= 0) != (mb >= 0)
    if np.any(cross):
        wa, wb = ma[cross], mb[cross]
        frac = np.where(wa >= 0, wa / (wa - wb), wb / (wb - wa))
        total += float(np.sum(width[cross] * frac))
    return total
