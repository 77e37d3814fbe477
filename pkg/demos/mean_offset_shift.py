"""How a nonzero chemical-potential offset moves the pattern onset.

The conserved variant of the bistable equation keeps the same double-well
nonlinearity but pins the flat states to roots of

    phi^3 - phi = mu0 * eps^2.

At mu0 = 0 the roots are exactly (-1, 0, +1) and the model is the plain
Allen-Cahn problem, crossings included, bit for bit.  For small mu0 the
middle root slides off zero by roughly -mu0*eps^2 and every crossing of
the middle branch shifts by O(mu0^2) -- the linearization around the
middle root feels the offset only through 3*phi_mid^2, which is quadratic
in mu0.

The script prints the root structure, confirms the mu0 = 0 equivalence,
sweeps mu0 over a few values, and checks the measured shifts against the
exact-kernel crossing values.
"""

import numpy as np

from phase_bifurcate import (
    GridSpec,
    ModelParams,
    ch_bifurcation,
    ch_trivial_roots,
    default_settings,
    detect_bifurcations_on_trivial,
    model_by_kind,
)

N_CELLS = 100
EPSILON = 0.3
MU0_SWEEP = [0.0, 0.02, 0.05, 0.1]


def detect(mu0):
    grid = GridSpec(N_CELLS)
    model = model_by_kind("ch", grid)
    params = ModelParams(epsilon=0.5, mu0=mu0)
    settings = default_settings("ch", param_min=0.3, param_max=0.7)

    def middle_flat(eps):
        roots = ch_trivial_roots(ModelParams(epsilon=eps, mu0=mu0))
        return np.full(grid.n_nodes, roots.values[roots.middle_index])

    return detect_bifurcations_on_trivial(model, params, settings, middle_flat)


def main():
    # -- the flat states ------------------------------------------------------
    print(f"flat states phi^3 - phi = mu0*eps^2 at eps = {EPSILON}:\n")
    print("    mu0      lowest        middle        highest       middle ~ -mu0*eps^2")
    for mu0 in MU0_SWEEP:
        roots = ch_trivial_roots(ModelParams(epsilon=EPSILON, mu0=mu0))
        lo, mid, hi = sorted(roots.values)
        print(f"    {mu0:<5}   {lo:+.8f}   {mid:+.8f}   {hi:+.8f}   {-mu0 * EPSILON**2:+.6f}")
    print()

    # -- mu0 = 0 is the non-conserved model, exactly -------------------------
    ch0 = detect(0.0)
    grid = GridSpec(N_CELLS)
    ac_model = model_by_kind("ac", grid)
    ac_settings = default_settings("ac", param_min=0.3, param_max=0.7)
    ac0 = detect_bifurcations_on_trivial(
        ac_model, ModelParams(epsilon=0.5), ac_settings,
        lambda eps: np.zeros(grid.n_nodes))
    same = (len(ch0) == len(ac0)
            and all(a.param == b.param and np.array_equal(a.null_mode, b.null_mode)
                    for a, b in zip(ch0, ac0)))
    print(f"mu0 = 0 detection identical to the non-conserved model: {same}\n")

    # -- the quadratic shift --------------------------------------------------
    sweeps = {mu0: {(b.mode_family, b.mode_index): b.param for b in detect(mu0)}
              for mu0 in MU0_SWEEP}
    base = sweeps[0.0]
    print("detected crossing eps by mu0 (middle branch, window [0.3, 0.7]):\n")
    print("    " + "mode".ljust(12) + "".join(f"mu0={mu0:<11}" for mu0 in MU0_SWEEP))
    for key in sorted(base, key=base.get, reverse=True):
        fam, n = key
        label = f"{fam}[{n}]"
        print("    " + label.ljust(12)
              + "".join(f"{sweeps[mu0][key]:<15.8f}" for mu0 in MU0_SWEEP))
    print()

    print("    shift eps(mu0) - eps(0), and the ratio shift(2x)/shift(x):\n")
    for key in sorted(base, key=base.get, reverse=True):
        fam, n = key
        s_half = sweeps[0.05][key] - base[key]
        s_full = sweeps[0.1][key] - base[key]
        ratio = s_full / s_half if s_half else float("nan")
        exact = ch_bifurcation(n, fam, 0.05).param_value
        print(f"    {fam}[{n}]: shift(0.05) = {s_half:+.3e},  shift(0.10) = {s_full:+.3e},"
              f"  ratio = {ratio:.2f}  (exact kernel at mu0=0.05: {exact:.8f})")
    print()
    print("a ratio of ~4 across the board is the O(mu0^2) signature; the")
    print("absolute shifts stay two orders below the crossing spacing, so")
    print("small offsets relabel nothing")


if __name__ == "__main__":
    main()
