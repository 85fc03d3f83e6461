"""One-dimensional and radial ODE facilities for the sublinear power laws.

The plane integrator for -u'' = |u|^{q-2} u is classical RK4 away from the
zero set of u.  Near a simple zero the right-hand side is only Hoelder
continuous and plain RK4 loses its order, so steps inside a layer around each
crossing are propagated with a high-order odd power series centred at the
crossing (u(tau) = sum_k a_k sgn(tau) |tau|^{k q + 1}); the coefficients obey
a Miller-type recurrence.  Radial integrations (damping term (N-1) u'/r)
refine and align substeps inside the layer instead.
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OdeTrajectory",
    "ZeroEvent",
    "PmeField",
    "counterexample_profile",
    "counterexample_slope",
    "conserved_energy",
    "integrate_plane",
    "integrate_radial",
    "zero_audit",
    "pme_residual_grid",
    "pme_separated_residual",
]


class IntegrationError(RuntimeError):
    """Integration blew up; carries the last radius that was still finite."""

    def __init__(self, message, last_good):
        super().__init__(f"{message} (last good abscissa {last_good:.6g})")
        self.last_good = last_good


# --------------------------------------------------------------------------
# closed-form non-uniqueness profile


def counterexample_profile(q, t0, t):
    """Glued solution of u'' = |u|^{q-2} u vanishing for t <= t0.

    Returns (u, u'').  u(t) = (2q/(2-q)^2)^{1/(q-2)} (t-t0)^{2/(2-q)} past t0
    and 0 before; both branches satisfy the equation exactly.
    """
    if not 1.0 < q < 2.0:
        raise ValueError("q must lie strictly inside (1, 2)")
    t = np.asarray(t, dtype=float)
    alpha = 2.0 / (2.0 - q)
    K = (2.0 * q / (2.0 - q) ** 2) ** (1.0 / (q - 2.0))
    dt = np.maximum(t - t0, 0.0)
    u = K * dt ** alpha
    upp = K * alpha * (alpha - 1.0) * dt ** (alpha - 2.0)
    upp = np.where(dt > 0.0, upp, 0.0)
    return u, upp


def counterexample_slope(q, t0, t):
    """First derivative of the glued profile."""
    if not 1.0 < q < 2.0:
        raise ValueError("q must lie strictly inside (1, 2)")
    t = np.asarray(t, dtype=float)
    alpha = 2.0 / (2.0 - q)
    K = (2.0 * q / (2.0 - q) ** 2) ** (1.0 / (q - 2.0))
    dt = np.maximum(t - t0, 0.0)
    return K * alpha * dt ** (alpha - 1.0)


# --------------------------------------------------------------------------
# trajectories


@dataclass
class OdeTrajectory:
    """Sampled (u, u') on a uniform grid, with the run's metadata."""

    t: np.ndarray
    u: np.ndarray
    du: np.ndarray
    q: float
    dim: int
    initial: tuple
    h: float
    crossings: list = field(default_factory=list)  # located (t*, u'(t*)) pairs

    def hermite(self, s):
        """Cubic Hermite dense output for u and u' at abscissae s."""
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.searchsorted(self.t, s) - 1, 0, len(self.t) - 2)
        t0 = self.t[idx]
        x = (s - t0) / self.h
        u0, u1 = self.u[idx], self.u[idx + 1]
        m0, m1 = self.du[idx] * self.h, self.du[idx + 1] * self.h
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        uu = h00 * u0 + h10 * m0 + h01 * u1 + h11 * m1
        d00 = 6 * x * (x - 1)
        d10 = (1 - x) * (1 - 3 * x)
        d01 = -d00
        d11 = x * (3 * x - 2)
        dd = (d00 * u0 + d10 * m0 + d01 * u1 + d11 * m1) / self.h
        return uu, dd


def conserved_energy(traj):
    """E_i = u'_i^2/2 + |u_i|^q / q along the trajectory."""
    return 0.5 * traj.du ** 2 + np.abs(traj.u) ** traj.q / traj.q


# --------------------------------------------------------------------------
# power series at a simple zero (plane case, no damping)


def _series_coeffs(w, q, K=14):
    """Coefficients a_k of u = sum a_k sgn(tau)|tau|^{kq+1}; w = u'(0) > 0."""
    a = np.empty(K + 1)
    a[0] = w
    alpha = q - 1.0
    for k in range(1, K + 1):
        beta = a[1:k] / a[0]
        C = np.empty(k)
        C[0] = 1.0
        for m in range(1, k):
            acc = 0.0
            for j in range(1, m + 1):
                acc += (j * alpha - (m - j)) * beta[j - 1] * C[m - j]
            C[m] = acc / m
        a[k] = -(a[0] ** alpha) * C[k - 1] / ((k * q + 1.0) * (k * q))
    return a


def _series_eval(tau, a, q):
    at = abs(tau)
    sig = at ** q
    u = a[-1]
    v = a[-1] * ((len(a) - 1) * q + 1.0)
    for k in range(len(a) - 2, -1, -1):
        u = u * sig + a[k]
        v = v * sig + a[k] * (k * q + 1.0)
    return math.copysign(at, tau) * u, v


def _series_reach(w, q, ratio=0.08):
    return (ratio * q * (q + 1.0) * abs(w) ** (2.0 - q)) ** (1.0 / q)


def _locate_crossing(u0, v0, q):
    """Newton solve for (tau, w): the series state at tau matches (u0, v0)."""
    sgn = 1.0 if v0 > 0 else -1.0
    uu, vv = sgn * u0, sgn * v0
    tau, w = uu / vv, vv
    a = _series_coeffs(w, q)
    for _ in range(30):
        u, v = _series_eval(tau, a, q)
        r1, r2 = u - uu, v - vv
        j21 = -(abs(u) ** (q - 2.0) * u if u != 0.0 else 0.0)
        det = v - tau * j21
        dtau = (r1 - r2 * tau) / det
        dw = (v * r2 - j21 * r1) / det
        tau -= dtau
        w -= dw
        a = _series_coeffs(w, q)
        if abs(dtau) <= 1e-15 * max(1e-30, abs(tau)) and abs(dw) <= 1e-15 * abs(w):
            break
    return tau, w, sgn, a


# --------------------------------------------------------------------------
# steppers


def _f_power(u, q):
    if u == 0.0:
        return 0.0
    if q == 1.0:
        return math.copysign(1.0, u)
    return abs(u) ** (q - 2.0) * u


def _rk4(u, v, h, q, r=None, dim=1):
    def acc(uu, vv, rr):
        a = -_f_power(uu, q)
        if dim > 1:
            a -= (dim - 1) * vv / rr
        return a

    if r is None:
        r = 1.0  # unused for dim == 1
    k1v = acc(u, v, r)
    k1u = v
    k2v = acc(u + 0.5 * h * k1u, v + 0.5 * h * k1v, r + 0.5 * h)
    k2u = v + 0.5 * h * k1v
    k3v = acc(u + 0.5 * h * k2u, v + 0.5 * h * k2v, r + 0.5 * h)
    k3u = v + 0.5 * h * k2v
    k4v = acc(u + h * k3u, v + h * k3v, r + h)
    k4u = v + h * k3v
    return (u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u),
            v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v))


def integrate_plane(q, u0, du0, h, t_max, t_start=0.0):
    """Integrate -u'' = |u|^{q-2} u from (u0, du0) on [t_start, t_max].

    Fixed uniform output grid of step h.  For q in (1, 2) a series layer
    handles every simple zero; for q = 1 the flow is piecewise quadratic and
    is propagated exactly with event-aligned pieces.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    n = int(round((t_max - t_start) / h))
    t = t_start + h * np.arange(n + 1)
    u = np.empty(n + 1)
    du = np.empty(n + 1)
    u[0], du[0] = u0, du0
    crossings = []

    if q == 1.0:
        uu, vv = float(u0), float(du0)
        for i in range(n):
            uu, vv = _advance_sign_exact(uu, vv, h, crossings, t[i])
            u[i + 1], du[i + 1] = uu, vv
        return OdeTrajectory(t, u, du, q, 1, (u0, du0), h, crossings)

    uu, vv = float(u0), float(du0)
    layer = None  # (t_star, w, sgn, coeffs, reach)
    for i in range(n):
        ti, tnext = t[i], t[i + 1]
        if layer is not None:
            t_star, w, sgn, coeffs, reach = layer
            if abs(tnext - t_star) <= reach:
                us, vs = _series_eval(tnext - t_star, coeffs, q)
                uu, vv = sgn * us, sgn * vs
                u[i + 1], du[i + 1] = uu, vv
                continue
            layer = None
        # enter the series layer while the zero is within ~3/4 of the series
        # reach: plain RK4 steps this close already feel the |u|^{q-5} blowup
        # of the truncation term
        if vv != 0.0:
            w_est = math.sqrt(2.0 * (0.5 * vv * vv + abs(uu) ** q / q))
            reach_est = _series_reach(w_est, q)
            trigger = abs(uu) < 0.75 * reach_est * abs(vv) \
                and abs(uu) < 0.5 * _amplitude(uu, vv, q)
        else:
            trigger = False
        un, vn = _rk4(uu, vv, h, q)
        if trigger or uu * un < 0.0:
            tau, w, sgn, coeffs = _locate_crossing(uu, vv, q)
            t_star = ti - tau
            reach = max(_series_reach(w, q), 3.0 * h)
            if t_start - 1e-12 <= t_star <= t_max + 1e-12:
                crossings.append((t_star, sgn * w))
            layer = (t_star, w, sgn, coeffs, reach)
            us, vs = _series_eval(tnext - t_star, coeffs, q)
            uu, vv = sgn * us, sgn * vs
        else:
            uu, vv = un, vn
        if not (math.isfinite(uu) and math.isfinite(vv)):
            raise IntegrationError("plane integration produced non-finite values", ti)
        u[i + 1], du[i + 1] = uu, vv
    return OdeTrajectory(t, u, du, q, 1, (u0, du0), h, crossings)


def _amplitude(u, v, q):
    # amplitude scale from the conserved energy
    E = 0.5 * v * v + abs(u) ** q / q
    return (q * E) ** (1.0 / q) if E > 0 else 1.0


def _advance_sign_exact(u, v, h, crossings, t_now):
    """Advance the q = 1 plane flow by h exactly (piecewise quadratic)."""
    remaining = h
    elapsed = 0.0
    while remaining > 1e-300:
        s = math.copysign(1.0, u) if u != 0.0 else math.copysign(1.0, v) if v != 0.0 else 0.0
        # u(tau) = u + v tau - s tau^2 / 2
        tau_cross = None
        if s != 0.0:
            disc = v * v + 2.0 * s * u
            if disc >= 0.0:
                root = math.sqrt(disc)
                for cand in ((v - root) / s, (v + root) / s):
                    if 1e-300 < cand <= remaining and (tau_cross is None or cand < tau_cross):
                        tau_cross = cand
        step = remaining if tau_cross is None else tau_cross
        u = u + v * step - 0.5 * s * step * step
        v = v - s * step
        elapsed += step
        remaining -= step
        if tau_cross is not None:
            u = 0.0
            crossings.append((t_now + elapsed, v))
    return u, v


def integrate_radial(dim, q, a, r_max, h, series_span=10):
    """Shoot u'' + (dim-1)/r u' = -|u|^{q-2} u from u(0) = a, u'(0) = 0.

    The removable singularity at r = 0 is bridged with the two-term series
    u = a - |a|^{q-2} a r^2 / (2 dim) on [0, series_span * h]; afterwards RK4
    with substep refinement and event alignment inside the crossing layers.
    """
    if a == 0.0:
        raise ValueError("initial amplitude must be nonzero")
    if h <= 0 or r_max <= 0:
        raise ValueError("need positive step and radius")
    if not 1.0 <= q < 2.0:
        raise ValueError("q must lie in [1, 2)")
    if dim == 1:
        # no damping term: the plane integrator applies from r = 0 directly
        return integrate_plane(q, a, 0.0, h, r_max)
    n = int(round(r_max / h))
    r = h * np.arange(n + 1)
    u = np.empty(n + 1)
    du = np.empty(n + 1)
    # three-term even series: the r^4 term keeps the startup equation
    # residual at O(r^4), matching the integrator's order
    c2 = _f_power(a, q) / (2.0 * dim)
    fp = (q - 1.0) * abs(a) ** (q - 2.0) if q > 1.0 else 0.0
    c4 = fp * c2 / (4.0 * (dim + 2.0))
    k0 = min(max(series_span, 1), n)
    rs = r[: k0 + 1]
    u[: k0 + 1] = a - c2 * rs ** 2 + c4 * rs ** 4
    du[: k0 + 1] = -2.0 * c2 * rs + 4.0 * c4 * rs ** 3

    crossings = []
    uu, vv = u[k0], du[k0]
    for i in range(k0, n):
        ri = r[i]
        near = vv != 0.0 and abs(uu) < abs(vv) * 3.0 * h
        if not near:
            un, vn = _rk4(uu, vv, h, q, r=ri, dim=dim)
            if uu * un >= 0.0:
                uu, vv = un, vn
                if not (math.isfinite(uu) and math.isfinite(vv)):
                    raise IntegrationError("radial integration blew up", ri)
                u[i + 1], du[i + 1] = uu, vv
                continue
        uu, vv = _refined_crossing_step(uu, vv, ri, h, q, dim, crossings)
        if not (math.isfinite(uu) and math.isfinite(vv)):
            raise IntegrationError("radial integration blew up", ri)
        u[i + 1], du[i + 1] = uu, vv
    return OdeTrajectory(r, u, du, q, dim, (a, 0.0), h, crossings)


def _refined_crossing_step(u, v, r0, h, q, dim, crossings, n_sub=32):
    """One step of size h with refined, crossing-aligned substeps."""
    dt = h / n_sub
    rr, uu, vv = r0, u, v
    for _ in range(n_sub):
        un, vn = _rk4(uu, vv, dt, q, r=rr, dim=dim)
        if uu * un < 0.0 or (un == 0.0 and uu != 0.0):
            # bisect the substep length to land on the zero
            lo, hi = 0.0, dt
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                um, vm = _rk4(uu, vv, mid, q, r=rr, dim=dim)
                if uu * um < 0.0:
                    hi = mid
                else:
                    lo = mid
                    if um == 0.0:
                        break
            ustar, vstar = _rk4(uu, vv, lo, q, r=rr, dim=dim)
            crossings.append((rr + lo, vstar))
            rem = dt - lo
            un, vn = _rk4(0.0, vstar, rem, q, r=rr + lo, dim=dim)
        uu, vv = un, vn
        rr += dt
    return uu, vv


# --------------------------------------------------------------------------
# zero audit


@dataclass
class ZeroEvent:
    location: float
    slope: float
    degenerate: bool


def zero_audit(traj, threshold=None):
    """Locate the zeros of a trajectory and rate each as simple or degenerate.

    Sign changes are refined by bisection on the cubic Hermite dense output;
    a zero is degenerate when |u'| falls below the threshold (default
    1e-6 sqrt(2 E_0), an energy-aware scale).  Plateau edges (the field is
    flat zero on one side) are reported as degenerate zeros.
    """
    u, du, t = traj.u, traj.du, traj.t
    if threshold is None:
        E0 = 0.5 * du[0] ** 2 + abs(u[0]) ** traj.q / traj.q
        threshold = 1e-6 * math.sqrt(2.0 * E0) if E0 > 0 else 1e-12
    scale = float(np.max(np.abs(u)))
    if scale == 0.0:
        return []
    ztol = 1e-12 * scale
    is_zero = np.abs(u) <= ztol
    events = []
    n = len(u)
    i = 0
    while i < n - 1:
        if not is_zero[i] and not is_zero[i + 1] and u[i] * u[i + 1] < 0.0:
            loc = _bisect_hermite(traj, t[i], t[i + 1])
            _, slope = traj.hermite(loc)
            events.append(ZeroEvent(float(loc), abs(float(slope)),
                                    abs(slope) < threshold))
            i += 1
            continue
        if is_zero[i]:
            j = i
            while j < n and is_zero[j]:
                j += 1
            left_val = u[i - 1] if i > 0 else None
            right_val = u[j] if j < n else None
            if j - i == 1 and left_val is not None and right_val is not None \
                    and left_val * right_val < 0.0:
                loc = _bisect_hermite(traj, t[i - 1], t[j])
                _, slope = traj.hermite(loc)
                events.append(ZeroEvent(float(loc), abs(float(slope)),
                                        abs(slope) < threshold))
            else:
                # plateau or touching zero: report the interior-facing edges
                if left_val is not None:
                    events.append(ZeroEvent(float(t[i]), abs(float(du[i])),
                                            abs(du[i]) < threshold))
                if right_val is not None and j - 1 != i:
                    events.append(ZeroEvent(float(t[j - 1]), abs(float(du[j - 1])),
                                            abs(du[j - 1]) < threshold))
                elif right_val is not None and left_val is None:
                    events.append(ZeroEvent(float(t[j - 1]), abs(float(du[j - 1])),
                                            abs(du[j - 1]) < threshold))
            i = j
            continue
        i += 1
    return events


def _bisect_hermite(traj, lo, hi):
    ulo, _ = traj.hermite(lo)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        um, _ = traj.hermite(mid)
        if ulo * um <= 0.0:
            hi = mid
        else:
            lo = mid
            ulo = um
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# porous-medium separated solution


@dataclass
class PmeField:
    """Separated-variables solution of w_t = Laplace(|w|^{m-1} w).

    Built on a radial base profile u solving -Laplace(u) = |u|^{q-2} u, via
    w(x, t) = ((2-q)/(q-1) (t-t0))^{-(q-1)/(2-q)} |u(x)|^{q-2} u(x).
    """

    base: OdeTrajectory
    t0: float = 0.0

    @property
    def q(self):
        return self.base.q

    @property
    def m(self):
        return 1.0 / (self.q - 1.0)

    def time_factor(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= self.t0):
            raise ValueError("time samples must exceed t0")
        beta = (self.q - 1.0) / (2.0 - self.q)
        return ((2.0 - self.q) / (self.q - 1.0) * (t - self.t0)) ** (-beta)

    def time_factor_dt(self, t):
        t = np.asarray(t, dtype=float)
        beta = (self.q - 1.0) / (2.0 - self.q)
        return -beta * self.time_factor(t) / (t - self.t0)

    def w(self, r_indices, t):
        """Values w on the (t, r) sample grid, shape (n_t, n_r)."""
        g = _signed_power(self.base.u[np.atleast_1d(r_indices)], self.q - 1.0)
        c = np.atleast_1d(self.time_factor(t))
        return np.multiply.outer(c, g)


def _signed_power(u, p):
    return np.sign(u) * np.abs(u) ** p


def pme_residual_grid(field, r_indices=None, t_values=None, n_t=64):
    """Space-time residual w_t - Laplace(|w|^{m-1} w), shape (n_t, n_r).

    The spatial Laplacian comes from five-point differences of the sampled
    base profile; the time factor is differentiated in closed form.
    Returns (r_indices, t_values, residual).
    """
    from .quadrature import deriv_uniform

    base = field.base
    if t_values is None:
        t_values = field.t0 + 1.0 + np.linspace(0.0, 1.0, n_t)
    t_values = np.asarray(t_values, dtype=float)
    if np.any(t_values <= field.t0):
        raise ValueError("time samples must exceed t0")
    n = len(base.u)
    if r_indices is None:
        r_indices = np.arange(max(4, n // 16), n - 4)
    r_indices = np.asarray(r_indices, dtype=int)
    if np.any(r_indices < 2) or np.any(r_indices > n - 3):
        raise ValueError("radial samples must stay clear of the grid edges")

    up = deriv_uniform(base.u, base.h)
    upp = deriv_uniform(up, base.h)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = upp + (base.dim - 1) * up / np.where(base.t > 0, base.t, np.inf)
    g = _signed_power(base.u[r_indices], field.q - 1.0)
    c = field.time_factor(t_values)
    cdot = field.time_factor_dt(t_values)
    wt = cdot[:, None] * g[None, :]
    lap_w = (c ** field.m)[:, None] * lap[r_indices][None, :]
    return r_indices, t_values, wt - lap_w


def pme_separated_residual(field, r_indices=None, t_values=None, n_t=64):
    """Max space-time residual |w_t - Laplace(|w|^{m-1} w)| on the grid."""
    _, _, res = pme_residual_grid(field, r_indices, t_values, n_t)
    return float(np.max(np.abs(res)))
