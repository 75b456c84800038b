"""degcap: the random multigraph process with a forbidden degree.

Simulation of the capped process, its chronology-free lower bound, the
local-limit tree samplers, the discretized branching-process numerics and a
reproducible experiment harness.
"""

from .analytic import (
    DegreeProfile,
    DegreeSequence,
    compute_degree_profile,
    compute_pi,
    sample_configuration_model,
    sample_loopless_configuration,
    supercritical_interval,
    t_k_transform,
    threshold_lhs,
)
from .graphs import (
    UNBOUNDED,
    ComponentSummary,
    EventStream,
    LabeledMultigraph,
    components,
    sample_event_stream,
)
from .kernel import (
    ExtinctionSolution,
    OffspringKernel,
    estimate_kernel,
    estimate_spectral_radius,
    growth_rate_mc,
    phi_apply,
    solve_extinction,
)
from .localtree import (
    LocalTree,
    SurvivalEstimate,
    estimate_survival,
    expected_propagation_count,
    find_propagation_paths,
    sample_gw_levels,
    sample_tkt,
)
from .process import (
    ProcessState,
    coupled_sandwich,
    phi_transform,
    simulate,
    simulate_discrete,
    z_statistic,
)
from .rng import RngStream, poisson_draw

__version__ = "0.1.0"
