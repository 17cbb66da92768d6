"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``STIP_DISABLE_NUMBA=1`` to force the numpy implementations (useful for
debugging or when numba is unavailable). Both paths are always importable as
``*_numpy`` / ``*_numba`` so they can be compared directly.
"""

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrapper(f):
            return f

        return wrapper


USE_NUMBA = HAVE_NUMBA and os.environ.get("STIP_DISABLE_NUMBA", "0").lower() not in (
    "1",
    "true",
    "yes",
)


# ---------------------------------------------------------------------------
# squared exponential kernel matrix
# ---------------------------------------------------------------------------


def se_kernel_numpy(a, b, signal_var, length_scale):
    d2 = (
        (a[:, 0, None] - b[None, :, 0]) ** 2
        + (a[:, 1, None] - b[None, :, 1]) ** 2
    )
    return signal_var * np.exp(-0.5 * d2 / (length_scale * length_scale))


@njit(cache=True)
def se_kernel_numba(a, b, signal_var, length_scale):
    na = a.shape[0]
    nb = b.shape[0]
    out = np.empty((na, nb))
    c = -0.5 / (length_scale * length_scale)
    for i in range(na):
        for j in range(nb):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            out[i, j] = signal_var * math.exp(c * (dx * dx + dy * dy))
    return out


# ---------------------------------------------------------------------------
# variance reduction of a batch of points
# ---------------------------------------------------------------------------


def variance_reduction_numpy(points, train_x, chol, signal_var, length_scale, noise_var):
    """Trace(prior) - Trace(post) for hypothetically observing ``points``.

    ``chol`` is the lower Cholesky factor of the training covariance (may be
    0x0). The posterior after adding the points is obtained by the rank-m
    update ``P - P (P + noise I)^-1 P`` of the current posterior ``P``.
    Returns nan if the update cannot be factorized.
    """
    m = points.shape[0]
    prior = se_kernel_numpy(points, points, signal_var, length_scale)
    if train_x.shape[0] > 0:
        kxs = se_kernel_numpy(train_x, points, signal_var, length_scale)
        v = np.linalg.solve(chol, kxs)
        prior = prior - v.T @ v
    prior = 0.5 * (prior + prior.T)
    s = prior + noise_var * np.eye(m)
    return _trace_quad_numpy(prior, s)


def _trace_quad_numpy(p, s):
    # trace(P S^-1 P) with escalating jitter on S
    jitter = 0.0
    scale = max(float(np.max(np.diag(s))), 1e-300)
    for _ in range(60):
        try:
            l = np.linalg.cholesky(s + jitter * np.eye(s.shape[0]))
            break
        except np.linalg.LinAlgError:
            jitter = 1e-12 * scale if jitter == 0.0 else jitter * 2.0
    else:
        return math.nan
    w = np.linalg.solve(l, p)
    return float(np.sum(w * w))


@njit(cache=True)
def _chol_inplace(a):
    # returns False if not positive definite
    n = a.shape[0]
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= a[j, k] * a[j, k]
        if s <= 0.0 or not np.isfinite(s):
            return False
        d = math.sqrt(s)
        a[j, j] = d
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= a[i, k] * a[j, k]
            a[i, j] = t / d
        for i in range(j):
            a[i, j] = 0.0
    return True


@njit(cache=True)
def _forward_sub(l, b):
    n = l.shape[0]
    m = b.shape[1]
    out = np.empty((n, m))
    for c in range(m):
        for i in range(n):
            t = b[i, c]
            for k in range(i):
                t -= l[i, k] * out[k, c]
            out[i, c] = t / l[i, i]
    return out


@njit(cache=True)
def variance_reduction_numba(points, train_x, chol, signal_var, length_scale, noise_var):
    m = points.shape[0]
    prior = se_kernel_numba(points, points, signal_var, length_scale)
    if train_x.shape[0] > 0:
        kxs = se_kernel_numba(train_x, points, signal_var, length_scale)
        v = _forward_sub(chol, kxs)
        n = v.shape[0]
        for i in range(m):
            for j in range(m):
                t = 0.0
                for k in range(n):
                    t += v[k, i] * v[k, j]
                prior[i, j] -= t
    for i in range(m):
        for j in range(i + 1, m):
            avg = 0.5 * (prior[i, j] + prior[j, i])
            prior[i, j] = avg
            prior[j, i] = avg
    scale = 1e-300
    for i in range(m):
        if prior[i, i] + noise_var > scale:
            scale = prior[i, i] + noise_var
    jitter = 0.0
    l = np.empty((m, m))
    ok = False
    for _ in range(60):
        for i in range(m):
            for j in range(m):
                l[i, j] = prior[i, j]
            l[i, i] += noise_var + jitter
        if _chol_inplace(l):
            ok = True
            break
        jitter = 1e-12 * scale if jitter == 0.0 else jitter * 2.0
    if not ok:
        return np.nan
    w = _forward_sub(l, prior)
    total = 0.0
    for i in range(m):
        for j in range(m):
            total += w[i, j] * w[i, j]
    return total


# ---------------------------------------------------------------------------
# bilinear sampling of a grid at arbitrary points
# ---------------------------------------------------------------------------


def bilinear_numpy(values, x0, y0, dx, dy, pts):
    """Sample a (ny, nx) grid whose cell (0, 0) center is at (x0, y0).

    Points outside the hull of cell centers are clamped to the edge cells.
    """
    ny, nx = values.shape
    fx = np.clip((pts[:, 0] - x0) / dx, 0.0, nx - 1.0)
    fy = np.clip((pts[:, 1] - y0) / dy, 0.0, ny - 1.0)
    ix = np.minimum(np.floor(fx).astype(np.int64), nx - 2) if nx > 1 else np.zeros(len(fx), np.int64)
    iy = np.minimum(np.floor(fy).astype(np.int64), ny - 2) if ny > 1 else np.zeros(len(fy), np.int64)
    tx = fx - ix
    ty = fy - iy
    ix1 = np.minimum(ix + 1, nx - 1)
    iy1 = np.minimum(iy + 1, ny - 1)
    v00 = values[iy, ix]
    v01 = values[iy, ix1]
    v10 = values[iy1, ix]
    v11 = values[iy1, ix1]
    return (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)


@njit(cache=True)
def bilinear_numba(values, x0, y0, dx, dy, pts):
    ny, nx = values.shape
    n = pts.shape[0]
    out = np.empty(n)
    for p in range(n):
        fx = min(max((pts[p, 0] - x0) / dx, 0.0), nx - 1.0)
        fy = min(max((pts[p, 1] - y0) / dy, 0.0), ny - 1.0)
        ix = min(int(math.floor(fx)), max(nx - 2, 0))
        iy = min(int(math.floor(fy)), max(ny - 2, 0))
        tx = fx - ix
        ty = fy - iy
        ix1 = min(ix + 1, nx - 1)
        iy1 = min(iy + 1, ny - 1)
        a = (1 - tx) * values[iy, ix] + tx * values[iy, ix1]
        b = (1 - tx) * values[iy1, ix] + tx * values[iy1, ix1]
        out[p] = (1 - ty) * a + ty * b
    return out


def bilinear_mean_numpy(values, x0, y0, dx, dy, pts, bounds, fill):
    """Mean of bilinear samples; points outside ``bounds`` contribute ``fill``."""
    v = bilinear_numpy(values, x0, y0, dx, dy, pts)
    inside = (pts[:, 0] >= bounds[0]) & (pts[:, 0] <= bounds[1]) & (pts[:, 1] >= bounds[2]) & (pts[:, 1] <= bounds[3])
    return float(np.mean(np.where(inside, v, fill)))


@njit(cache=True)
def bilinear_mean_numba(values, x0, y0, dx, dy, pts, bounds, fill):
    v = bilinear_numba(values, x0, y0, dx, dy, pts)
    total = 0.0
    n = pts.shape[0]
    for p in range(n):
        x = pts[p, 0]
        y = pts[p, 1]
        if x < bounds[0] or x > bounds[1] or y < bounds[2] or y > bounds[3]:
            total += fill
        else:
            total += v[p]
    return total / n


# ---------------------------------------------------------------------------
# median-threshold advection
# ---------------------------------------------------------------------------


def advect_numpy(values, shift_x, shift_y, dx, dy):
    """Displace above-median cells by (shift_x, shift_y) meters.

    Deposits snap to the nearest cell, collide by maximum, vacated cells are
    back-filled with the median and deposits leaving the grid are dropped.
    """
    ny, nx = values.shape
    med = float(np.median(values))
    out = values.copy()
    iy, ix = np.nonzero(values > med)
    if iy.size == 0:
        return out
    # nearest cell to (source center + shift); half-way ties round away from zero
    ox = ix + _round_half_away(shift_x / dx)
    oy = iy + _round_half_away(shift_y / dy)
    keep = (ox >= 0) & (ox < nx) & (oy >= 0) & (oy < ny)
    deposit = np.full(values.shape, -np.inf)
    np.maximum.at(deposit, (oy[keep], ox[keep]), values[iy, ix][keep])
    out[iy, ix] = med
    hit = deposit > -np.inf
    out[hit] = deposit[hit]
    return out


def _round_half_away(v):
    return int(math.floor(abs(v) + 0.5) * (1 if v >= 0 else -1))


@njit(cache=True)
def _advect_core(values, med, sx, sy):
    ny, nx = values.shape
    out = values.copy()
    deposit = np.full((ny, nx), -np.inf)
    for iy in range(ny):
        for ix in range(nx):
            v = values[iy, ix]
            if v > med:
                out[iy, ix] = med
                ox = ix + sx
                oy = iy + sy
                if 0 <= ox < nx and 0 <= oy < ny:
                    if v > deposit[oy, ox]:
                        deposit[oy, ox] = v
    for iy in range(ny):
        for ix in range(nx):
            if deposit[iy, ix] > -np.inf:
                out[iy, ix] = deposit[iy, ix]
    return out


def advect_numba(values, shift_x, shift_y, dx, dy):
    med = float(np.median(values))
    return _advect_core(
        values, med, _round_half_away(shift_x / dx), _round_half_away(shift_y / dy)
    )


# ---------------------------------------------------------------------------
# rigidly placing the primitive-path template and checking the workspace
# ---------------------------------------------------------------------------


def place_paths_numpy(x, y, h, local_samples, local_ends, bounds):
    c, s = math.cos(h), math.sin(h)
    two_pi = 2.0 * math.pi
    ls = local_samples
    samples = np.empty_like(ls)
    samples[..., 0] = x + c * ls[..., 0] - s * ls[..., 1]
    samples[..., 1] = y + s * ls[..., 0] + c * ls[..., 1]
    samples[..., 2] = np.mod(ls[..., 2] + h, two_pi)
    le = local_ends
    ends = np.empty_like(le)
    ends[:, 0] = x + c * le[:, 0] - s * le[:, 1]
    ends[:, 1] = y + s * le[:, 0] + c * le[:, 1]
    ends[:, 2] = np.mod(le[:, 2] + h, two_pi)
    x0, x1, y0, y1 = bounds
    inside = lambda a: (a[..., 0] >= x0) & (a[..., 0] <= x1) & (a[..., 1] >= y0) & (a[..., 1] <= y1)
    mask = np.all(inside(samples), axis=1) & inside(ends)
    return samples, ends, mask


@njit(cache=True)
def place_paths_numba(x, y, h, local_samples, local_ends, bounds):
    c = math.cos(h)
    s = math.sin(h)
    two_pi = 2.0 * math.pi
    k, m, _ = local_samples.shape
    samples = np.empty_like(local_samples)
    ends = np.empty_like(local_ends)
    mask = np.ones(k, dtype=np.bool_)
    x0, x1, y0, y1 = bounds[0], bounds[1], bounds[2], bounds[3]
    for i in range(k):
        for j in range(m + 1):
            if j < m:
                lx = local_samples[i, j, 0]
                ly = local_samples[i, j, 1]
                lh = local_samples[i, j, 2]
            else:
                lx = local_ends[i, 0]
                ly = local_ends[i, 1]
                lh = local_ends[i, 2]
            wx = x + c * lx - s * ly
            wy = y + s * lx + c * ly
            wh = (lh + h) % two_pi
            if j < m:
                samples[i, j, 0] = wx
                samples[i, j, 1] = wy
                samples[i, j, 2] = wh
            else:
                ends[i, 0] = wx
                ends[i, 1] = wy
                ends[i, 2] = wh
            if wx < x0 or wx > x1 or wy < y0 or wy > y1:
                mask[i] = False
    return samples, ends, mask


# ---------------------------------------------------------------------------
# log marginal likelihood (used inside the hyperparameter search)
# ---------------------------------------------------------------------------


def lml_numpy(x, ys, signal_var, length_scale, noise_var):
    """Log marginal likelihood with the escalating-jitter policy; nan on failure."""
    n = x.shape[0]
    k = se_kernel_numpy(x, x, signal_var, length_scale)
    k[np.diag_indices(n)] += noise_var
    jitter = 0.0
    while True:
        try:
            l = np.linalg.cholesky(k + jitter * np.eye(n))
            break
        except np.linalg.LinAlgError:
            jitter = 1e-12 * signal_var if jitter == 0.0 else 2.0 * jitter
            if jitter > 1e-6 * signal_var * (1 + 1e-9):
                return np.nan
    a = np.linalg.solve(l, ys)
    return float(-0.5 * a @ a - np.sum(np.log(np.diag(l))) - 0.5 * n * math.log(2.0 * math.pi))


@njit(cache=True)
def lml_numba(x, ys, signal_var, length_scale, noise_var):
    n = x.shape[0]
    k = se_kernel_numba(x, x, signal_var, length_scale)
    l = np.empty((n, n))
    jitter = 0.0
    while True:
        for i in range(n):
            for j in range(n):
                l[i, j] = k[i, j]
            l[i, i] += noise_var + jitter
        if _chol_inplace(l):
            break
        jitter = 1e-12 * signal_var if jitter == 0.0 else 2.0 * jitter
        if jitter > 1e-6 * signal_var * (1 + 1e-9):
            return np.nan
    quad = 0.0
    logdet = 0.0
    a = np.empty(n)
    for i in range(n):
        t = ys[i]
        for kk in range(i):
            t -= l[i, kk] * a[kk]
        a[i] = t / l[i, i]
        quad += a[i] * a[i]
        logdet += math.log(l[i, i])
    return -0.5 * quad - logdet - 0.5 * n * math.log(2.0 * math.pi)


if USE_NUMBA:
    se_kernel = se_kernel_numba
    variance_reduction = variance_reduction_numba
    bilinear = bilinear_numba
    bilinear_mean = bilinear_mean_numba
    advect = advect_numba
    place_paths = place_paths_numba
    lml = lml_numba
else:
    se_kernel = se_kernel_numpy
    variance_reduction = variance_reduction_numpy
    bilinear = bilinear_numpy
    bilinear_mean = bilinear_mean_numpy
    advect = advect_numpy
    place_paths = place_paths_numpy
    lml = lml_numpy
