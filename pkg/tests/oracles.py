"""Independent closed-form oracles and frozen reference values.

Nothing here imports the package under test.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


# tangent-chord angle on the unit circle -----------------------------------

def chord_endpoint_param(p, alpha):
    """Boundary parameter reached by the straight shot from ``p`` at interior angle ``alpha``."""
    return (p + 2.0 * alpha) % (2.0 * math.pi)


def chord_length(alpha):
    return 2.0 * math.sin(alpha)


def chord_points(p, alpha, n=401):
    q = p + 2.0 * alpha
    a = np.array([math.cos(p), math.sin(p)])
    b = np.array([math.cos(q), math.sin(q)])
    s = np.linspace(0.0, 1.0, n)[:, None]
    pts = a + s * (b - a)
    pts[-1] = b
    return pts


def flat_capillary_value(theta, capillary_side=True):
    """L^theta of the flat chord at contact angle theta.

    The capillary side is the one meeting the boundary at angle theta from
    inside the domain; its wetted arc is ``2pi - 2 theta``.
    """
    arc = 2.0 * math.pi - 2.0 * theta if capillary_side else 2.0 * theta
    return 2.0 * math.sin(theta) + math.cos(theta) * arc


def line_family_sup(theta):
    """max over alpha of 2 sin(alpha) + 2 alpha cos(theta)."""
    a = math.pi - theta
    return 2.0 * math.sin(a) + 2.0 * a * math.cos(theta)


# Robin spectrum of the flat capillary chord --------------------------------

def robin_spectrum_flat(theta, n_modes=3):
    """Lowest eigenvalues of -f'' on [0, L], f'(0) = -s f(0), f'(L) = s f(L),
    with ``L = 2 sin theta`` and ``s = 1/sin theta``."""
    L = 2.0 * math.sin(theta)
    s = 1.0 / math.sin(theta)
    mu = brentq(lambda m: m * math.tanh(0.5 * m * L) - s, 1e-12, 100.0)
    vals = [-mu * mu, 0.0]
    k = 1
    while len(vals) < n_modes:
        lo, hi = k * math.pi / L + 1e-12, (k + 1) * math.pi / L - 1e-12
        if k % 2 == 1:
            nu = brentq(lambda n: n * math.sin(0.5 * n * L) + s * math.cos(0.5 * n * L), lo, hi)
        else:
            nu = brentq(lambda n: n * math.cos(0.5 * n * L) - s * math.sin(0.5 * n * L), lo, hi)
        vals.append(nu * nu)
        k += 1
    return sorted(vals)


# frozen from robin_spectrum_flat (brentq, xtol 2e-12)
FROZEN_ROBIN = {
    math.pi / 6: (-5.756915359562565, 0.0, 31.32385784495193),
    math.pi / 4: (-2.878457679781281, 0.0, 15.66192892247596),
    math.pi / 3: (-1.9189717865208542, 0.0, 10.441285948317306),
}


def jacobi_shooting_eigenvalues(s_nodes, K_nodes, sig1, sig2, lam_lo, lam_hi, n_scan=400):
    """Eigenvalues of -f'' - K f = lam f with Robin ends by shooting.

    ``f(0) = 1, f'(0) = -sig1``; eigenvalues are roots of
    ``f'(L) - sig2 f(L)`` in ``lam``.
    """
    L = s_nodes[-1]

    def mismatch(lam):
        def rhs(s, y):
            K = np.interp(s, s_nodes, K_nodes)
            return [y[1], -(K + lam) * y[0]]

        sol = solve_ivp(rhs, (0.0, L), [1.0, -sig1], rtol=1e-11, atol=1e-12)
        f, df = sol.y[:, -1]
        return df - sig2 * f

    grid = np.linspace(lam_lo, lam_hi, n_scan)
    vals = [mismatch(l) for l in grid]
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(mismatch, grid[i], grid[i + 1], xtol=1e-12))
    return roots


# cone development ---------------------------------------------------------

def cone_constants(k):
    c = k / math.sqrt(4.0 * math.pi**2 - k**2)
    ell = math.sqrt(1.0 + c * c)
    return {
        "c": c,
        "ell": ell,
        "kappa": 1.0 / ell,
        "turning": 2.0 * math.pi * c / ell,
        "lasso_length": 2.0 * ell * math.sin(0.5 * k),
    }


# frozen for k = pi/2
FROZEN_CONE_HALF_PI = {
    "c": 0.2581988897471611,
    "kappa": 0.9682458365518543,
    "lasso_length": 1.4605934866804429,
}


def cone_chord_points(k, t1, t2, n=2001):
    """Chart points of the cone geodesic joining boundary angles ``t1 < t2``.

    The cone part develops by ``W = ell * w**beta`` (``beta = k / 2pi``), so
    the geodesic is the straight segment between the developed endpoints.
    """
    beta = k / (2.0 * math.pi)
    ell = cone_constants(k)["ell"]
    A = ell * np.exp(1j * beta * t1)
    B = ell * np.exp(1j * beta * t2)
    W = A + np.linspace(0.0, 1.0, n) * (B - A)
    arg = np.unwrap(np.angle(W))
    w = np.abs(W / ell) ** (1.0 / beta) * np.exp(1j * arg / beta)
    return np.column_stack([w.real, w.imag])
