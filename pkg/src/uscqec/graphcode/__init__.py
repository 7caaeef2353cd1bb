"""Stabilizer algebra for cluster states and the two target codes."""
from .codes import (
    Distance,
    code_by_name,
    code_distance,
    five_qubit_code,
    logical_operators,
    lu_to_code,
    cluster_code_operators,
    steane_code,
    transport_five_qubit,
)
from .graphs import (
    GraphSpec,
    MeasurementResult,
    build_cluster_statevector,
    cluster_stabilizers,
    five_cycle,
    measure_x,
    steane_graph,
)
from .lc import LCResult, lc_orbit_check, local_complement, measured_state, to_graph_form
from .pauli import PauliString
from .tableau import StabilizerTableau

__all__ = [
    "Distance",
    "GraphSpec",
    "LCResult",
    "MeasurementResult",
    "PauliString",
    "StabilizerTableau",
    "build_cluster_statevector",
    "cluster_stabilizers",
    "code_by_name",
    "code_distance",
    "five_cycle",
    "five_qubit_code",
    "lc_orbit_check",
    "local_complement",
    "logical_operators",
    "lu_to_code",
    "measure_x",
    "measured_state",
    "cluster_code_operators",
    "steane_code",
    "steane_graph",
    "to_graph_form",
    "transport_five_qubit",
]
