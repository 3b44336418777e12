"""Quality-diversity optimization toolkit for discrete search spaces.

Fills a tessellated archive of descriptor space with diverse, high-fitness
solutions using gradient-informed discrete mutations (entropy-controlled
softmax over single-position flips) alongside random-mutation, projected
gradient-step, and projected CMA baselines, plus desk-scale differentiable
benchmarks and a seed-wise statistical comparison harness.
"""

__version__ = "0.1.0"

from .baselines import (
    CmaEmitterState,
    CmaSampleResult,
    OmgMegaConfig,
    cma_me_emit,
    cma_me_update,
    omg_mega_emit,
    one_point_crossover,
    project_to_discrete,
    random_point_mutation,
)
from .benchmarks import (
    RbmParams,
    RbmProblem,
    SeparableTableProblem,
    bars_and_stripes,
    brute_force_archive,
    make_rbm_problem,
    make_separable_problem,
    rbm_free_energy,
    rbm_train_cd1,
)
from .config import (
    OutputConfig,
    ProblemConfig,
    Provenance,
    ResolvedConfig,
    build_problem,
    parse_config,
)
from .diagnostics import CorrelationReport, correlation_diagnostic
from .errors import (
    ConfigError,
    EmptyArchiveError,
    GenotypeError,
    NumericError,
    QdError,
    SolverError,
)
from .gide import (
    EntropyTarget,
    FlipDistribution,
    GideDiagnostics,
    combine_gradients,
    entropy_of,
    flip_distribution,
    flip_logits,
    gide_emit,
    gide_emit_with_diagnostics,
    sample_flip,
    solve_temperature,
)
from .io import emit_outputs, read_final_metric, write_metrics_csv, write_repertoire_csv
from .problems import (
    Evaluation,
    Genotype,
    GradientBundle,
    Problem,
    ProblemSpec,
    finite_difference_check,
    genotype_from_text,
    genotype_to_text,
    neighbor,
    onehot_encode,
    validate_genotype,
)
from .repertoire import (
    InsertionOutcome,
    Repertoire,
    Tessellation,
    build_cvt,
    build_kmeans_from_data,
)
from .scheduler import (
    METRICS_COLUMNS,
    RunConfig,
    RunMetrics,
    SweepResult,
    derive_run_seed,
    initialize,
    run,
    spawn_streams,
    sweep,
)
from .stats import WilcoxonResult, wilcoxon_signed_rank
