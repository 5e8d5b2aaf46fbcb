"""Linear circuit co-simulation: EMT and dynamic-phasor models coupled by Schwarz iterations."""
from .circuit import Component, DaeSystem, Netlist, assemble_dae, reference_netlist, series_loop_phasors
from .emt import SteppedSystem, Trajectory, build_stepped, integrate, step
from .errors import (ConfigError, DecoupledPartitionWarning, DisconnectedCircuit, EmptyExternalSet, EmtTsError,
                     InsufficientSamples, NoConvergence, NumericalError, RankDeficientTrace, RankDeficientWarning,
                     SingularH, SingularMatrix, SingularSubdomain, UnitEigenvalue, UnsupportedComponent)
from .hetero import (GatheredEmtSystem, HeteroConfig, HeteroCoupler, emt_to_ts, hetero_run, hetero_schwarz_step,
                     solve_gathered, ts_to_emt)
from .linalg import LUFactor, dft_harmonics, eigenvalues, lu_solve
from .partition import DEFAULT_SPLIT, Partition, circuit_partition, default_circuit_split, partition_by_sets
from .schwarz import (ErrorOperator, SchwarzConfig, SchwarzTrace, aitken_accelerate, ddm_integrate,
                      exact_error_operator, numeric_error_operator, ras_iterate, spectrum_report)
from .ts import HarmonicSet, PhasorState, TsSystem, build_ts, reconstruct, ts_integrate, ts_step

__version__ = "0.1.0"
