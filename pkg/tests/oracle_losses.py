"""Arbitrary-precision reference values for the loss and efficiency fixtures.

Run as a script to regenerate ``fixtures/golden_losses.json``. Independent of
the package: every expression is evaluated directly in mpmath at 50 digits,
where the closed forms carry no cancellation trouble.
"""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50

C0 = mp.mpf(299792458)


def q_ext(p):
    p = mp.mpf(p)
    return 2 - (4 / p) * mp.sin(p) + (4 / p**2) * (1 - mp.cos(p))


def q_abs(b):
    b = mp.mpf(b)
    return 1 + (2 / b) * mp.exp(-b) + (2 / b**2) * (mp.exp(-b) - 1)


def rayleigh(psi, n_re, n_im):
    m = mp.mpc(mp.mpf(n_re), -mp.mpf(n_im))
    z = (m**2 - 1) / (m**2 + 2)
    return mp.mpf(8) / 3 * mp.mpf(psi) ** 4 * mp.re(z) ** 2


def spreading_db(f, d, n_re, D):
    lam = C0 / (mp.mpf(f) * mp.mpf(n_re))
    return 20 * mp.log10(4 * mp.pi * mp.mpf(d) / lam) - 10 * mp.log10(D)


def mu_abs(f, n_re, n_im):
    return 4 * mp.pi * mp.mpf(n_im) * mp.mpf(f) * mp.mpf(n_re) / C0


P_POINTS = ["1e-4", "1e-3", "0.01", "0.3", "0.999", "1.0", "1.5", "3.141592653589793", "10", "100"]
B_POINTS = ["1e-5", "1e-3", "0.1", "0.5", "1.0", "2.0", "7.5", "50"]
RAYLEIGH = [("0.01", "1.1", "0.0"), ("0.2", "1.05", "0.02"), ("0.5", "0.9", "0.3"), ("0.9", "1.6", "0.4")]
SPREAD = [("1e11", "5e-3", "2.5", "1"), ("1e12", "5e-3", "1.6", "1"), ("3e11", "1e-3", "2.0", "4")]
ABS = [("1e11", "3.138", "2.298"), ("1e12", "1.5734", "0.4086")]


def build():
    s = lambda x: float(x)  # noqa: E731
    return {
        "q_ext": {p: s(q_ext(p)) for p in P_POINTS},
        "q_abs": {b: s(q_abs(b)) for b in B_POINTS},
        "rayleigh": [{"psi": a, "n_real": b, "n_imag": c, "q": s(rayleigh(a, b, c))} for a, b, c in RAYLEIGH],
        "spreading_db": [
            {"f": f, "d": d, "n_real": n, "D": D, "db": s(spreading_db(f, d, n, D))} for f, d, n, D in SPREAD
        ],
        "mu_abs": [{"f": f, "n_real": a, "n_imag": b, "mu": s(mu_abs(f, a, b))} for f, a, b in ABS],
    }


if __name__ == "__main__":
    out = Path(__file__).parent / "fixtures" / "golden_losses.json"
    out.write_text(json.dumps(build(), indent=1, sort_keys=True) + "\n")
    print(f"wrote {out}")
