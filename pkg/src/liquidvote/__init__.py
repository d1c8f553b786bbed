"""Expected utilities, equilibria and simulations for voting with delegation or abstention."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Action,
    BehavioralProfile,
    ContinuousUniform,
    DiscreteBinned,
    Electorate,
    ElectionRecord,
    Empirical,
    StrategyProfileLD,
    StrategyProfileMVA,
    System,
    conditional_mean_above,
    parse_distribution,
)
from .analytic import (  # noqa: E402
    eu_a_mva,
    eu_d_ld,
    eu_mv,
    eu_nd_ld,
    eu_v_mva,
    ex_ante_eu_ld,
    ex_ante_eu_mva,
)
from .equilibrium import (  # noqa: E402
    check_boundary_equilibria,
    robustness_sweep,
    solve,
    solve_interior_ld,
    solve_interior_mva,
)
from .engine import draw_election, resolve_delegations, run_election, tally  # noqa: E402
from .montecarlo import (  # noqa: E402
    AccuracyPopulation,
    PopulationBehavior,
    compare_systems,
    select_experts_trailing,
    simulate_batch,
)
from .analysis import (  # noqa: E402
    bootstrap_exp1,
    conditional_differential,
    count_monotonicity_violations,
    frequency_summary,
    generate_synthetic,
    ingest,
    ks_two_sample,
)
