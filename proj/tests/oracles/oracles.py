"""Reference values for the unit tests, computed with numpy/scipy only.

Run: python3 tests/oracles/oracles.py
The printed numbers are frozen in tests/test_*.cpp.
"""
import hashlib
import json
import math
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

ROOT = Path(__file__).resolve().parents[2]
MODEL = json.loads((ROOT / "data/models/device21.json").read_text())
TWO_PI = 2 * math.pi


def flux_map():
    em = MODEL["emitter"]
    wmax, wmin, ec = em["omega_max_GHz"], em["omega_min_GHz"], em["E_C_MHz"] * 1e-3
    d = ((wmin + ec) / (wmax + ec)) ** 2
    f = lambda phi: (wmax + ec) * (math.cos(math.pi * phi) ** 2 + d**2 * math.sin(math.pi * phi) ** 2) ** 0.25 - ec
    return d, f


def chain(n, wr, j, jnnn):
    h = np.diag(np.full(n, wr))
    for s in range(n - 1):
        h[s, s + 1] = h[s + 1, s] = j
    for s in range(n - 2):
        h[s, s + 2] = h[s + 2, s] = jnnn
    return h


def tb_chain():
    tb = MODEL["tight_binding"]
    return chain(tb["n_sites"], tb["omega_r_GHz"], tb["J_MHz"] * 1e-3, tb["J_nnn_MHz"] * 1e-3)


def port_rates():
    tb = MODEL["tight_binding"]
    vals, vecs = np.linalg.eigh(tb_chain())
    mid = len(vals) // 2
    end2 = vecs[0, :] ** 2 + vecs[-1, :] ** 2
    kport = tb["kappa_r_MHz"] / end2[mid]
    return vals, kport, kport * end2


def effective_h(wq):
    eff = MODEL["effective"]
    w, g = eff["mode_freqs_GHz"], [x * 1e-3 for x in eff["g_MHz"]]
    n = len(w)
    h = np.zeros((n + 1, n + 1))
    h[0, 0] = wq
    for k in range(n):
        h[k + 1, k + 1] = w[k]
        h[0, k + 1] = h[k + 1, 0] = g[k]
    return h


def ramp_population(wi, wf, tau):
    """Emitter population after a linear flux ramp Φ(ωi) -> Φ(ωf) over tau ns, then back."""
    _, f = flux_map()
    phi_i = brentq(lambda p: f(p) - wi, 0, 0.5)
    phi_f = brentq(lambda p: f(p) - wf, 0, 0.5)

    def phi(t):
        if t <= tau:
            return phi_i + (phi_f - phi_i) * t / tau
        return phi_f + (phi_i - phi_f) * (t - tau) / tau

    def rhs(t, y):
        # rotating at 5.5 GHz; y holds real and imaginary parts
        h = effective_h(f(phi(t))) - 5.5 * np.eye(10)
        psi = y[:10] + 1j * y[10:]
        d = -1j * TWO_PI * (h @ psi)
        return np.concatenate([d.real, d.imag])

    y0 = np.zeros(20)
    y0[0] = 1.0
    y = y0
    for a, b in ((0, tau), (tau, 2 * tau)):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=1e-11, atol=1e-12)
        y = sol.y[:, -1]
    return y[0] ** 2 + y[10] ** 2


def r(x):
    return repr(float(x))


def main():
    d, f = flux_map()
    print("flux_map d =", r(d))
    print("flux_map f(0.25) GHz =", r(f(0.25)))
    print("flux_for 3.8 GHz =", r(brentq(lambda p: f(p) - 3.8, 0, 0.5, xtol=1e-15)))
    print("flux_for 5.2 GHz =", r(brentq(lambda p: f(p) - 5.2, 0, 0.5, xtol=1e-15)))

    vals = np.linalg.eigvalsh(tb_chain())
    print("tb band edges GHz =", r(vals[0]), r(vals[-1]))

    _, kport, kappas = port_rates()
    print("port rate MHz =", r(kport))
    print("kappa_1..5 MHz =", [r(x) for x in kappas[:5]])
    print("kappa_1/kappa_5 =", r(kappas[0] / kappas[4]))
    print("sin^2 ratio =", r(math.sin(math.pi / 22) ** 2 / math.sin(5 * math.pi / 22) ** 2))

    ev = np.linalg.eigvalsh(effective_h(f(0.5)))
    print("effective eigenvalues at flux 0.5 GHz =", [r(x) for x in ev])
    ev = np.linalg.eigvalsh(effective_h(5.06))
    print("effective eigenvalues at 5.06 GHz =", [r(x) for x in ev])

    print("p_lz(0.1) =", r(math.exp(-TWO_PI * 0.1)))
    g, de = TWO_PI * 20.67e-3, TWO_PI * (5.2 - 3.8)
    gamma = -math.log(0.05) / TWO_PI
    print("adiabatic time ns =", r(gamma * de / g**2))

    for tau in (10.0, 50.0):
        print(f"ramp population tau={tau} =", r(ramp_population(3.8, 5.2, tau)))

    x = np.array([0.3, -1.2, 2.5, 0.7, -0.1, 1.9, 0.0, -2.2])
    print("rdft |X| =", [r(v) for v in np.abs(np.fft.rfft(x))])
    print("sha256(abc) =", hashlib.sha256(b"abc").hexdigest())


if __name__ == "__main__":
    main()
