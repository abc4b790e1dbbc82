"""Transient of a closed-loop switched-mode power supply.

A PID stage compares the output with a reference, a comparator against a
triangle wave drives the MOSFET gate.  The run prints regulation figures and
solver diagnostics and optionally writes the trajectory.

The integrator uses fixed steps.  Once the converter enters discontinuous
conduction (roughly 0.4 ms in), the switch node floats on picofarad
capacitors and Newton may stall; the demo then reports the failure and
summarises the states reached so far.

Run:  python demos/smps_transient.py [--t-end 2e-4] [--h 1e-7] [--csv out.csv]
"""

import argparse
import time
from importlib import resources

import numpy as np

from mnadec import SolverConfig, assemble, integrate, load_netlist
from mnadec.errors import NewtonDivergence


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-end", type=float, default=2e-4)
    ap.add_argument("--h", type=float, default=1e-7)
    ap.add_argument("--integrator", default="implicit-euler")
    ap.add_argument("--csv")
    args = ap.parse_args()

    circuit = load_netlist(resources.files("mnadec") / "data" / "smps.net")
    system = assemble(circuit)
    p = system.partition
    print(f"{circuit.name}: |x|={p.nx} |y|={p.ny} |z|={p.nz}")
    print("controlled current source types:", system.report.ic_type_of)

    t0 = time.perf_counter()
    try:
        traj = integrate(system, np.zeros(p.nx), 0.0, args.t_end,
                         SolverConfig(h=args.h, integrator=args.integrator))
    except NewtonDivergence as exc:
        print("stopped early:", exc)
        traj = exc.trajectory
    elapsed = time.perf_counter() - t0

    out = "phi[5]"  # output capacitor node
    v = traj.column(out)
    tail = v[len(v) // 2:]
    print(f"{len(traj)} states in {elapsed:.2f} s")
    print(f"{out}: final {v[-1]:.4f} V, second-half mean {tail.mean():.4f} V, "
          f"ripple {tail.max() - tail.min():.4f} V")
    print(f"Newton iterations per step: max {max(traj.newton_iterations)}")
    print(f"max |g| {max(traj.g_norm):.1e}, max MNA residual {max(traj.mna_residual):.1e}")
    if args.csv:
        with open(args.csv, "w") as fh:
            traj.to_csv(fh)
        print("wrote", args.csv)


if __name__ == "__main__":
    main()
