#!/usr/bin/env python3
"""Independent closed-form evaluations used to freeze expected values in the C++ tests.

Everything here is written directly from the model formulas with mpmath at
50 digits; nothing imports or mirrors the C++ code paths.
"""
from mpmath import mp, mpf, log, sqrt, log10

mp.dps = 50


def mmse(beta, tau, rho):
    return tau * rho * beta**2 / (tau * rho * beta + 1)


def main():
    n0 = mpf(10) ** (mpf(-122) / 10)
    print("N0_W", n0)

    # pathloss at 100 m
    print("pathloss_0.1km", mpf("-140.6") - 10 * mpf("3.67") * log10(mpf("0.1")))

    # MMSE spot value
    rho_p = mpf("0.2") / n0
    print("mmse_beta1e-10_tau30", mmse(mpf("1e-10"), 30, rho_p))

    # Downlink SINR, single UE: M=50, K=1, rho_d*sig=10, eta=0.5, beta-sig=0.1*sig
    rho_d, sig = mpf(1e3), mpf("1e-2")
    beta = sig * mpf("1.1")
    print("sinr_dl_single", (50 - 1) * rho_d * sig * mpf("0.5") / (rho_d * (beta - sig) * mpf("0.5") + 1))

    # Two-UE uplink instance
    M, K = 8, 2
    rho_u = mpf(100)
    betas = [mpf("0.5"), mpf("0.2")]
    sigs = [mpf("0.4"), mpf("0.1")]
    zetas = [mpf("0.7"), mpf("0.3")]
    interf = rho_u * sum((b - s) * z for b, s, z in zip(betas, sigs, zetas)) + 1
    for k in range(2):
        print(f"sinr_ul_two_ue[{k}]", (M - K) * rho_u * sigs[k] * zetas[k] / interf)

    # Compute time/energy with the stated scenario constants
    L, D, c, f, alpha = 50, mpf("5e6"), 20, mpf("4e9"), mpf("5e-30")
    print("t_C", L * D * c / f)
    print("E_C", L * alpha / 2 * c * D * f**2)

    # Downlink concave lower bound at v = 0 for a two-UE instance
    # (same instance as the surrogate test fixture)
    M, K = 10, 2
    rho_d = mpf(50)
    betas = [mpf("0.8"), mpf("0.3")]
    sigs = [mpf("0.6"), mpf("0.25")]
    vpt = [mpf("0.6"), mpf("0.5")]
    B, tc, tp = mpf("1e6"), 200, 20
    C = (tc - tp) / mpf(tc) * B / log(2)
    for k in range(2):
        A = sqrt((M - K) * rho_d) * sqrt(sigs[k])
        w = rho_d * (betas[k] - sigs[k])
        ups_i = A * vpt[k]
        pi_i = w * sum(x**2 for x in vpt) + 1
        g = ups_i**2 / pi_i
        ups, pi = 0, 1  # v = 0
        val = C * (log(1 + g) - g + 2 * ups_i * ups / pi_i - g * (ups**2 + pi) / (ups_i**2 + pi_i))
        print(f"rate_dl_lb_v0[{k}]", val)
    # Uplink bound at u = 0, same geometry with rho_u, tau_up = 20
    rho_u = mpf(20)
    upt = [mpf("0.9"), mpf("0.4")]
    for k in range(2):
        A = sqrt((M - K) * rho_u) * sqrt(sigs[k])
        xi_i = rho_u * sum((b - s) * x**2 for b, s, x in zip(betas, sigs, upt)) + 1
        psi_i = A * upt[k]
        g = psi_i**2 / xi_i
        val = C * (log(1 + g) - g - g * (0 + 1) / (psi_i**2 + xi_i))
        print(f"rate_ul_lb_u0[{k}]", val)

    # Bilinear convex upper bounds, spot values
    def h1(v, r, w, ri, wi):
        return mpf("0.25") * (4 * v**2 + (r - w) ** 2 - 2 * (ri + wi) * (r + w) + (ri + wi) ** 2)

    def h3(q, r, qi, ri, s):
        return mpf("0.25") * ((q + r) ** 2 - 2 * (qi - ri) * (q - r) + (qi - ri) ** 2 - 4 * s)

    print("h1_spot", h1(mpf("0.3"), mpf("1.5"), mpf("0.2"), mpf("1.2"), mpf("0.1")))
    print("h1_r_eq_w", h1(mpf("0.3"), mpf("0.7"), mpf("0.7"), mpf("1.2"), mpf("0.1")))
    print("h2_spot", h1(mpf("0.9"), mpf("0.8"), mpf("1.1"), mpf("1.0"), mpf("0.9")))
    print("h3_spot", h3(mpf("0.6"), mpf("1.3"), mpf("0.5"), mpf("1.1"), mpf("0.7")))
    print("h4_spot", h3(mpf("1.2"), mpf("0.9"), mpf("1.0"), mpf("0.8"), mpf("1.5")))


if __name__ == "__main__":
    main()
