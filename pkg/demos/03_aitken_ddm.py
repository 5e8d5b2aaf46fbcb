# Domain decomposition that diverges, rescued by Aitken extrapolation.
#
# Because the Schwarz error obeys e+ = P e with a fixed P, two iterates and P
# are enough to jump straight to the fixed point, even when |lambda(P)| > 1.
import warnings

import numpy as np

from emtts.circuit import assemble_dae, reference_netlist
from emtts.emt import build_stepped, integrate
from emtts.errors import RankDeficientWarning
from emtts.schwarz import (SchwarzConfig, aitken_accelerate, ddm_integrate, numeric_error_operator,
                           ras_iterate)
from emtts.partition import circuit_partition

dae = assemble_dae(reference_netlist())
sys = build_stepped(dae, 2e-4)
part = circuit_partition(sys.H, dae.names)
b = sys.rhs(dae.x0, 2e-4)

iterates, trace = ras_iterate(sys.H, b, part, np.zeros(sys.n), SchwarzConfig("additive", 9))
print("interface change per iteration (subdomain 1, 2):")
for p, (e1, e2) in enumerate(trace.errors(), start=1):
    print(f"  {p}: {e1:10.3e} {e2:10.3e}")

# P estimated from the interface values alone, no access to the matrices
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RankDeficientWarning)
    op = numeric_error_operator(trace)
print("\nnumeric P eigenvalues:", np.round(op.eigenvalues(), 6))

U = trace.as_array()
u = aitken_accelerate(op, U[:, 0], U[:, 1])
direct = np.linalg.solve(sys.H, b)
print("accelerated interface:", np.round(u, 8))
print("direct interface:     ", np.round(part.trace(direct), 8))

# The same trick, applied at every time step, reproduces the monodomain run
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RankDeficientWarning)
    traj, infos = ddm_integrate(sys, part, 0.0, 0.02, SchwarzConfig("additive"), "numeric")
mono = integrate(sys, 0.0, 0.02)
err = np.max(np.abs(traj.states - mono.states)) / np.max(np.abs(mono.states))
print(f"\n100 steps: max relative deviation from monodomain {err:.2e}")
