"""Recompute the derived reference values frozen in the test-suite.

Run ``python3 tests/oracle_pins.py`` to regenerate them; it prints the
numbers that are copied into the tests.  Only ``oracle`` is used, never the
package under test.
"""

import mpmath as mp

import oracle as o

LOSSES_2A = (0, 5, 10, 15, 20)
FIXED_2A = {
    "squeezed-heterodyne": ("squeezed", "heterodyne"),
    "squeezed-homodyne": ("squeezed", "homodyne"),
    "coherent-homodyne": ("coherent", "homodyne"),
    "coherent-heterodyne": ("coherent", "heterodyne"),
}


def eps_max(k_of, hi=mp.mpf(4)):
    if k_of(mp.mpf(0)) <= 0:
        return mp.mpf(0)
    return o.bisect(k_of, mp.mpf(0), hi, tol=mp.mpf("1e-10"))


def fixed_eps_max(prep, meas, loss, V):
    T = o.transmittance(loss)
    return eps_max(lambda e: o.keyrate(prep, meas, "RR", V, T, o.chi_line(T, e))[2])


def optimal_eps_max(loss, V, upper=50):
    T = o.transmittance(loss)
    return eps_max(lambda e: o.optimal_rr(V, T, o.chi_line(T, e), upper, grid=201)[1])


def main():
    print("G(0.5) =", mp.nstr(o.g_entropy(0.5), 20))
    for d in (0, 1):
        print(f"holevo(40, 0.5, 1.5, chi_D={d}) =", mp.nstr(o.keyrate("squeezed", "homodyne", "RR", 40, 0.5, 1.5, d)[1], 20))

    def diff(loss):
        T = o.transmittance(loss)
        chi = o.chi_line(T, 0.5)
        return o.closed_rr(40, T, chi, 1)[2] - o.closed_rr(40, T, chi, 0)[2]
    print("crossing (eps=0.5, V=40) dB =", mp.nstr(o.bisect(diff, mp.mpf(0), mp.mpf(25)), 15))

    for V in (1e5, 2e5):
        def k_dr(loss, V=V):
            T = o.transmittance(loss)
            return o.keyrate("coherent", "homodyne", "DR", V, T, o.chi_line(T, 0))[2]
        print(f"DR coherent-homodyne zero, V={V:g}:", mp.nstr(o.bisect(k_dr, mp.mpf(0), mp.mpf(30)), 15))

    print("eps_max squeezed-homodyne 5 dB V=1e5 =", mp.nstr(fixed_eps_max("squeezed", "homodyne", 5, 1e5), 15))
    print("eps_max squeezed-homodyne 10 dB V=2e5 =", mp.nstr(fixed_eps_max("squeezed", "homodyne", 10, 2e5), 15))

    print("chi_D optimum at eps=0.5, V=40:")
    for loss in range(0, 9):
        T = o.transmittance(loss)
        x, k = o.optimal_rr(40, T, o.chi_line(T, 0.5), grid=1001)
        print(f"  {loss:2d} dB: chi_D_opt = {mp.nstr(x, 10)}, K_opt = {mp.nstr(k, 15)}")

    print("Fig. 2a eps_max at V=2e5:")
    for loss in LOSSES_2A:
        row = {name: fixed_eps_max(p, m, loss, 2e5) for name, (p, m) in FIXED_2A.items()}
        row["optimal"] = optimal_eps_max(loss, 2e5)
        print(f"  {loss}:", {k: mp.nstr(v, 12) for k, v in row.items()})


if __name__ == "__main__":
    main()
