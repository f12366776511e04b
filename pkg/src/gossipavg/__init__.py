"""Broadcast gossip averaging toolkit.

Simulates the broadcast gossip protocol (one random node broadcasts per
step) and its collision-prone de-synchronized variant (every node
broadcasts independently with probability p, colliding messages are lost)
on directed graphs, and computes their convergence rate and asymptotic
averaging bias exactly through second-moment analysis.
"""

from gossipavg.graphs import (
    CayleyStructure,
    GeneratingVector,
    Graph,
    build_cayley,
    build_named_graph,
    build_rgg,
    cayley_eigenvalues,
    circulant_eigenvalues,
    graph_of_matrix,
    rgg_default_radius,
    subgraph_of,
)
from gossipavg.seeds import SeedPolicy
from gossipavg.gossip import (
    AlgoParams,
    StepRealization,
    TrajectoryRecord,
    run_trajectory,
    sample_cbga_step,
    sample_bga_step,
)
from gossipavg.meansquare import (
    MsaRecursion,
    SpectralSummary,
    bias,
    complete_closed_forms,
    invariant_vector,
    lyap_apply_exact,
    lyap_apply_mc,
    lyap_omega_closed_form,
    mean_matrix,
    msa_recursion_cayley,
    rate,
    spectral_summary,
)

__version__ = "0.1.0"

__all__ = [
    "AlgoParams",
    "CayleyStructure",
    "GeneratingVector",
    "Graph",
    "MsaRecursion",
    "SeedPolicy",
    "SpectralSummary",
    "StepRealization",
    "TrajectoryRecord",
    "bias",
    "build_cayley",
    "build_named_graph",
    "build_rgg",
    "cayley_eigenvalues",
    "circulant_eigenvalues",
    "complete_closed_forms",
    "graph_of_matrix",
    "invariant_vector",
    "lyap_apply_exact",
    "lyap_apply_mc",
    "lyap_omega_closed_form",
    "mean_matrix",
    "msa_recursion_cayley",
    "rate",
    "rgg_default_radius",
    "run_trajectory",
    "sample_bga_step",
    "sample_cbga_step",
    "spectral_summary",
    "subgraph_of",
]
