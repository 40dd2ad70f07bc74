"""Reference values of the CPMG-n filter function by exact piecewise integration.

Each constant-sign piece [a, b) of the switching function contributes
(e^{-iwa} - e^{-iwb}) / (iw), evaluated with 60 significant digits so that points next to
high-order zeros of G are still exact to well below 1e-9 relative.

Usage: python3 filter_reference.py > filter_reference.csv
"""

import random

import mpmath as mp

mp.mp.dps = 60
POINTS_PER_N = 1000


def filter_value(n, t_phi, omega):
    t = mp.mpf(t_phi)
    w = mp.mpf(omega)
    bounds = [mp.mpf(0)] + [t * (2 * k - 1) / (2 * n) for k in range(1, n + 1)] + [t]
    g = mp.mpc(0)
    for i in range(len(bounds) - 1):
        sign = 1 if i % 2 == 0 else -1
        a, b = bounds[i], bounds[i + 1]
        g += sign * (mp.expj(-w * a) - mp.expj(-w * b)) / (1j * w)
    return abs(g), mp.arg(g)


def main():
    rng = random.Random(20240611)
    print("n,t_phi_s,omega_rad_s,magnitude_s,phase_rad")
    for n in range(1, 9):
        for _ in range(POINTS_PER_N):
            t_phi = rng.uniform(1e-6, 1e-3)
            omega = rng.uniform(1e-3, 8 * mp.pi * n) / t_phi
            omega = float(omega)
            mag, phase = filter_value(n, t_phi, omega)
            print(f"{n},{t_phi!r},{omega!r},{mp.nstr(mag, 25)},{mp.nstr(phase, 25)}")


if __name__ == "__main__":
    main()
