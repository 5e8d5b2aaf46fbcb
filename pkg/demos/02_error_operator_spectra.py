# Where does plain Schwarz iteration fail on the RLC loop?
#
# The error of one Schwarz sweep is propagated by a fixed matrix P. Its
# dominant eigenvalue tells us how quickly (or whether) the iteration settles.
import numpy as np

from emtts.circuit import assemble_dae, reference_netlist
from emtts.emt import build_stepped
from emtts.partition import circuit_partition, replicate
from emtts.schwarz import exact_error_operator, spectrum_report
from emtts.ts import HarmonicSet, build_ts

dae = assemble_dae(reference_netlist())


def show(label, H, part, mode):
    rep = spectrum_report(exact_error_operator(H, part, mode))
    lam = rep.dominant
    print(f"{label:32s} overlap={part.overlap}  lambda={lam.real:+10.5f}{lam.imag:+10.5f}i"
          f"  |lambda|={rep.spectral_radius:8.4f}  {rep.verdict}")


for overlap in (0, 1):
    H = build_stepped(dae, 2e-4).H
    show("EMT additive dt=2e-4", H, circuit_partition(H, dae.names, overlap=overlap), "additive")
    for dT in (2e-4, 2e-3):
        ts = build_ts(dae, HarmonicSet((0, 1)), dT)
        base = circuit_partition(ts.H, dae.names, overlap=overlap)
        for k, blk in zip((0, 1), ts.blocks):
            part = replicate(base, blk, 1 if k == 0 else 2)
            show(f"TS k={k} multiplicative dT={dT:g}", blk, part, "multiplicative")
    print()

# Every case above has |lambda| > 1, so none of these iterations converge on
# their own. Growing the overlap does not help here: the coupling is carried
# by currents, and the extra node voltages do not change the dominant mode.
H = build_stepped(dae, 2e-4).H
part = circuit_partition(H, dae.names)
P = exact_error_operator(H, part, "additive").P
print("rank of the EMT error operator:", np.linalg.matrix_rank(P), "of", P.shape[0])
