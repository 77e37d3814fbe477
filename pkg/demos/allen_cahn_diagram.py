"""Walk through the Allen-Cahn bifurcation diagram on [-1, 1].

The flat state phi = 0 of

    eps^2 * phi'' + phi - phi^3 = 0,   phi'(+-1) = 0

loses a direction of stability every time 1/eps passes a wavenumber of the
zero-flux Laplacian: k = pi/2 + n*pi (odd, sine-like modes) and k = n*pi
(even, cosine-like modes).  Each crossing spawns a pair of nontrivial
branches related by phi -> -phi.

The script

  1. sweeps the flat branch and detects the crossings from sign changes of
     det(Jacobian), then compares them with the closed forms 1/k;
  2. traces the full diagram on a narrower window and prints the branch
     inventory;
  3. renders a small text plot of sup|phi| against eps.

Everything runs on a deliberately coarse grid so the whole story takes a
few seconds; tighten ``N_CELLS`` to push the detected values toward 1/k.
"""

import math
import time

import numpy as np

from phase_bifurcate import (
    GridSpec,
    ModelParams,
    ac_bifurcations_in_range,
    compute_diagram,
    default_settings,
    detect_bifurcations_on_trivial,
    model_by_kind,
)

N_CELLS = 100
DETECT_WINDOW = (0.05, 0.7)
TRACE_WINDOW = (0.3, 0.7)


def detect_crossings():
    grid = GridSpec(N_CELLS)
    model = model_by_kind("ac", grid)
    params = ModelParams(epsilon=0.5)
    settings = default_settings("ac", param_min=DETECT_WINDOW[0], param_max=DETECT_WINDOW[1])
    flat = lambda eps: np.zeros(grid.n_nodes)
    return detect_bifurcations_on_trivial(model, params, settings, flat)


def text_plot(diagram, width=72, height=22):
    """Scatter sup|phi| over eps for every traced branch, in ASCII."""
    pts = []
    for br in diagram.branches:
        marker = "." if br.origin.kind == "trivial" else "o"
        for p in br.points:
            pts.append((p.param, float(np.max(np.abs(p.state))), marker))
    eps_lo = min(p[0] for p in pts)
    eps_hi = max(p[0] for p in pts)
    sup_hi = max(p[1] for p in pts) or 1.0
    canvas = [[" "] * width for _ in range(height)]
    for eps, sup, marker in pts:
        col = int((eps - eps_lo) / (eps_hi - eps_lo) * (width - 1))
        row = height - 1 - int(sup / sup_hi * (height - 1))
        if canvas[row][col] != "o":  # offshoots win over the flat branch
            canvas[row][col] = marker
    print(f"    sup|phi|  (top = {sup_hi:.3f})")
    for row in canvas:
        print("    |" + "".join(row))
    print("    +" + "-" * width)
    print(f"    eps = {eps_lo:.2f}" + " " * (width - 22) + f"eps = {eps_hi:.2f}")


def main():
    print(f"grid: {N_CELLS} cells on [-1, 1]\n")

    # -- step 1: crossings on the flat branch --------------------------------
    t0 = time.perf_counter()
    detected = detect_crossings()
    dt = time.perf_counter() - t0
    analytic = {(a.mode_family, a.mode_index): a.param_value
                for a in ac_bifurcations_in_range(*DETECT_WINDOW)}
    print(f"detected {len(detected)} crossings of the flat branch on "
          f"eps in [{DETECT_WINDOW[0]}, {DETECT_WINDOW[1]}]  ({dt:.1f}s)\n")
    print("    family   n   detected eps    1/k          rel gap")
    for b in sorted(detected, key=lambda b: -b.param):
        exact = analytic[(b.mode_family, b.mode_index)]
        rel = abs(b.param - exact) / exact
        k = 1.0 / exact
        print(f"    {b.mode_family:<7} {b.mode_index:>2}   {b.param:.8f}    "
              f"{exact:.8f}   {rel:.2e}   (k = {k:.4f} ~ {k / math.pi:.2f} pi)")
    print()

    # -- step 2: the full diagram on a narrower window -----------------------
    grid = GridSpec(N_CELLS)
    model = model_by_kind("ac", grid)
    settings = default_settings("ac", param_min=TRACE_WINDOW[0], param_max=TRACE_WINDOW[1])
    t0 = time.perf_counter()
    diagram = compute_diagram(model, ModelParams(epsilon=0.5), settings)
    dt = time.perf_counter() - t0
    print(f"traced the diagram on [{TRACE_WINDOW[0]}, {TRACE_WINDOW[1]}]: "
          f"{len(diagram.branches)} branches, "
          f"{len(diagram.bifurcations)} bifurcations  ({dt:.1f}s)\n")
    print("    branch         origin                    points   eps range         max sup|phi|")
    for br in diagram.branches:
        sups = [float(np.max(np.abs(p.state))) for p in br.points]
        print(f"    {br.id:<14} {br.origin.describe():<25} {len(br.points):>5}"
              f"    [{br.points[0].param:.3f}, {br.points[-1].param:.3f}]"
              f"    {max(sups):.4f}")
    print()

    # every offshoot has a mirror partner: phi -> -phi maps solutions to
    # solutions, so the switched branches come in exact +- pairs
    offshoots = [br for br in diagram.branches if br.origin.kind == "switched"]
    by_bif = {}
    for br in offshoots:
        by_bif.setdefault(br.origin.label, []).append(br)
    for label, pair in sorted(by_bif.items()):
        a, b = pair
        gap = max(float(np.max(np.abs(pa.state + pb.state)))
                  for pa, pb in zip(a.points, b.points))
        print(f"    {label}: |phi_plus + phi_minus| along the pair = {gap:.1e}")
    print()

    # -- step 3: a text rendering of the diagram -----------------------------
    text_plot(diagram)
    print("\nthe flat branch (.) runs along sup|phi| = 0; each pitchfork")
    print("sheds a pair of mirrored offshoots (o) that steepen as eps drops")


if __name__ == "__main__":
    main()
