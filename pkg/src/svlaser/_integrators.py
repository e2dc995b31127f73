"""Adaptive Dormand-Prince 4(5) steppers.

Two implementations with identical semantics:

* :func:`integrate_adaptive` - generic numpy version for arbitrary complex
  arrays (state vectors or density matrices) and a python right-hand side.
* :func:`integrate_harmonic` - compiled version for Schroedinger equations
  with H(t) = sum_j exp(i w_j t) M_j, the M_j stored as one concatenated COO
  list.  Exploiting that sparsity is what makes resolving the fast drive
  phases of the full Lambda model affordable (millions of capped steps).

Both honor ``max_step`` exactly and report accepted/rejected step counts; a
``fixed_step`` disables error control for bit-reproducible runs.
"""

from __future__ import annotations

import numpy as np

from .errors import StiffnessError

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco if not (args and callable(args[0])) else args[0]


# Dormand-Prince tableau
_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# error weights: 5th-order minus embedded 4th-order solution
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_SAFETY, _FAC_MIN, _FAC_MAX = 0.9, 0.2, 5.0


def _err_norm(err, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def integrate_adaptive(f, y0, t0, t_samples, rtol=1e-8, atol=1e-10,
                       max_step=np.inf, min_step=0.0, first_step=None,
                       fixed_step=None, post_step=None):
    """Integrate dy/dt = f(t, y) and return y at each requested sample time.

    ``post_step(y) -> (y, metric)`` runs on every accepted step (used to
    re-symmetrize density matrices); the largest metric is reported in stats.
    Raises :class:`StiffnessError` on step-size underflow.
    """
    t_samples = np.asarray(t_samples, dtype=float)
    y = np.array(y0, dtype=complex)
    t = float(t0)
    span = float(t_samples[-1] - t0)
    if span < 0:
        raise ValueError("samples must lie at or after t0")
    out = np.empty((t_samples.size,) + y.shape, dtype=complex)

    if fixed_step is not None:
        h_att = float(min(fixed_step, max_step))
    else:
        h_att = float(first_step) if first_step else min(max_step, span / 100.0 or 1.0)
        h_att = min(h_att, max_step)
    n_acc = n_rej = 0
    post_metric = 0.0
    tiny = max(abs(span), 1.0) * 1e-14

    k1 = f(t, y)
    for i, tt in enumerate(t_samples):
        while t < tt - tiny:
            h = min(h_att, tt - t)
            if fixed_step is None and (h < min_step or h < tiny * 1e-2):
                raise StiffnessError(
                    f"step size underflow at t={t:.6g} (h={h:.3e}); the model is "
                    "stiffer than the configured min_step/tolerances allow")
            k2 = f(t + _C2 * h, y + h * (_A21 * k1))
            k3 = f(t + _C3 * h, y + h * (_A31 * k1 + _A32 * k2))
            k4 = f(t + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
            k5 = f(t + _C5 * h, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
            k6 = f(t + h, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5))
            y5 = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            k7 = f(t + h, y5)
            if fixed_step is not None:
                t += h
                y, k1 = y5, k7
                n_acc += 1
                if post_step is not None:
                    y, m = post_step(y)
                    post_metric = max(post_metric, m / h)
                continue
            err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
            enorm = _err_norm(err, y, y5, rtol, atol)
            if enorm <= 1.0:
                t += h
                y, k1 = y5, k7
                n_acc += 1
                if post_step is not None:
                    y, m = post_step(y)
                    post_metric = max(post_metric, m / h)
                fac = _FAC_MAX if enorm == 0.0 else min(_FAC_MAX, _SAFETY * enorm ** -0.2)
            else:
                n_rej += 1
                fac = max(_FAC_MIN, _SAFETY * enorm ** -0.2)
            h_att = min(max_step, h * max(_FAC_MIN, fac))
        out[i] = y
    stats = {"n_accepted": n_acc, "n_rejected": n_rej, "last_step": h_att,
             "post_step_metric_rate": post_metric}
    return out, stats


# ---------------------------------------------------------------------------
# compiled harmonic-Hamiltonian path
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rhs_coo(rows, cols, vals, blk, phases, y, out):  # pragma: no cover - jitted
    out[:] = 0.0
    for p in range(rows.shape[0]):
        out[rows[p]] += phases[blk[p]] * vals[p] * y[cols[p]]
    for i in range(out.shape[0]):
        out[i] *= -1j


@njit(cache=True)
def _phases(omegas, t, ph):  # pragma: no cover - jitted
    for b in range(omegas.shape[0]):
        ph[b] = np.exp(1j * omegas[b] * t)


@njit(cache=True)
def _dp45_harmonic(rows, cols, vals, blk, omegas, y0, t0, ts, rtol, atol,
                   max_step, min_step, h_init, fixed_h):  # pragma: no cover - jitted
    D = y0.shape[0]
    ns = ts.shape[0]
    nb = omegas.shape[0]
    out = np.empty((ns, D), np.complex128)
    y = y0.copy()
    k1 = np.empty(D, np.complex128)
    k2 = np.empty(D, np.complex128)
    k3 = np.empty(D, np.complex128)
    k4 = np.empty(D, np.complex128)
    k5 = np.empty(D, np.complex128)
    k6 = np.empty(D, np.complex128)
    k7 = np.empty(D, np.complex128)
    yt = np.empty(D, np.complex128)
    ph = np.empty(nb, np.complex128)

    t = t0
    span = ts[ns - 1] - t0
    tiny = max(abs(span), 1.0) * 1e-14
    fixed = fixed_h > 0.0
    h_att = fixed_h if fixed else (h_init if h_init > 0.0 else span / 100.0)
    if h_att > max_step:
        h_att = max_step
    n_acc = 0
    n_rej = 0

    _phases(omegas, t, ph)
    _rhs_coo(rows, cols, vals, blk, ph, y, k1)

    for i in range(ns):
        tt = ts[i]
        while t < tt - tiny:
            h = h_att
            if tt - t < h:
                h = tt - t
            if (not fixed) and (h < min_step or h < tiny * 1e-2):
                return out, n_acc, n_rej, h_att, 1  # step underflow

            for j in range(D):
                yt[j] = y[j] + h * (_A21 * k1[j])
            _phases(omegas, t + _C2 * h, ph)
            _rhs_coo(rows, cols, vals, blk, ph, yt, k2)

            for j in range(D):
                yt[j] = y[j] + h * (_A31 * k1[j] + _A32 * k2[j])
            _phases(omegas, t + _C3 * h, ph)
            _rhs_coo(rows, cols, vals, blk, ph, yt, k3)

            for j in range(D):
                yt[j] = y[j] + h * (_A41 * k1[j] + _A42 * k2[j] + _A43 * k3[j])
            _phases(omegas, t + _C4 * h, ph)
            _rhs_coo(rows, cols, vals, blk, ph, yt, k4)

            for j in range(D):
                yt[j] = y[j] + h * (_A51 * k1[j] + _A52 * k2[j] + _A53 * k3[j] + _A54 * k4[j])
            _phases(omegas, t + _C5 * h, ph)
            _rhs_coo(rows, cols, vals, blk, ph, yt, k5)

            for j in range(D):
                yt[j] = y[j] + h * (_A61 * k1[j] + _A62 * k2[j] + _A63 * k3[j]
                                    + _A64 * k4[j] + _A65 * k5[j])
            _phases(omegas, t + h, ph)
            _rhs_coo(rows, cols, vals, blk, ph, yt, k6)

            for j in range(D):
                yt[j] = y[j] + h * (_B1 * k1[j] + _B3 * k3[j] + _B4 * k4[j]
                                    + _B5 * k5[j] + _B6 * k6[j])
            _rhs_coo(rows, cols, vals, blk, ph, yt, k7)  # same t + h phases

            if fixed:
                t += h
                for j in range(D):
                    y[j] = yt[j]
                    k1[j] = k7[j]
                n_acc += 1
                continue

            acc = 0.0
            for j in range(D):
                e = h * (_E1 * k1[j] + _E3 * k3[j] + _E4 * k4[j]
                         + _E5 * k5[j] + _E6 * k6[j] + _E7 * k7[j])
                ya = abs(y[j])
                yb = abs(yt[j])
                sc = atol + rtol * (ya if ya > yb else yb)
                q = abs(e) / sc
                acc += q * q
            enorm = np.sqrt(acc / D)

            if enorm <= 1.0:
                t += h
                for j in range(D):
                    y[j] = yt[j]
                    k1[j] = k7[j]
                n_acc += 1
                fac = _FAC_MAX if enorm == 0.0 else min(_FAC_MAX, _SAFETY * enorm ** -0.2)
            else:
                n_rej += 1
                fac = max(_FAC_MIN, _SAFETY * enorm ** -0.2)
            h_att = min(max_step, h * max(_FAC_MIN, fac))
        for j in range(D):
            out[i, j] = y[j]
    return out, n_acc, n_rej, h_att, 0


def terms_to_coo(terms):
    """Flatten [(omega, dense matrix), ...] into one concatenated COO listing."""
    omegas, rows, cols, vals, blk = [], [], [], [], []
    for b, (w, m) in enumerate(terms):
        m = np.asarray(m, dtype=complex)
        r, c = np.nonzero(m)
        omegas.append(w)
        rows.append(r)
        cols.append(c)
        vals.append(m[r, c])
        blk.append(np.full(r.size, b, dtype=np.int64))
    return (np.concatenate(rows).astype(np.int64), np.concatenate(cols).astype(np.int64),
            np.concatenate(vals).astype(complex), np.concatenate(blk),
            np.asarray(omegas, dtype=float))


def integrate_harmonic(terms, y0, t0, t_samples, rtol=1e-8, atol=1e-10,
                       max_step=np.inf, min_step=0.0, first_step=None,
                       fixed_step=None):
    """Schroedinger integration for H(t) = sum_j exp(i w_j t) M_j.

    Uses the compiled kernel when numba is importable; otherwise falls back to
    the generic numpy stepper (same results, much slower).
    """
    rows, cols, vals, blk, omegas = terms_to_coo(terms)
    ts = np.asarray(t_samples, dtype=float)
    y0 = np.asarray(y0, dtype=complex)
    if HAVE_NUMBA:
        out, n_acc, n_rej, last_h, status = _dp45_harmonic(
            rows, cols, vals, blk, omegas, y0, float(t0), ts,
            float(rtol), float(atol), float(max_step), float(min_step),
            float(first_step or 0.0), float(fixed_step or 0.0))
        if status == 1:
            raise StiffnessError(
                "step size underflow in harmonic integrator; the drive "
                "frequencies are stiffer than min_step/tolerances allow")
        return out, {"n_accepted": int(n_acc), "n_rejected": int(n_rej),
                     "last_step": float(last_h), "post_step_metric_rate": 0.0}

    dense = [(w, np.asarray(m, dtype=complex)) for w, m in terms]

    def f(t, y):
        acc = np.zeros_like(y)
        for w, m in dense:
            acc += np.exp(1j * w * t) * (m @ y)
        return -1j * acc

    return integrate_adaptive(f, y0, t0, ts, rtol=rtol, atol=atol,
                              max_step=max_step, min_step=min_step,
                              first_step=first_step, fixed_step=fixed_step)
