"""qsched: cut-aware batch scheduling for quantum-circuit jobs on
simulated heterogeneous devices."""

from .circuits import (
    CX,
    SINGLE,
    Circuit,
    CircuitProxy,
    Gate,
    compute_depth,
    generate_random_circuit,
    make_proxy,
)
from .cutting import (
    CutOutcome,
    CutPlan,
    InfeasibleCutError,
    apply_cut_to_circuit,
    apply_cut_to_proxy,
    estimate_cut,
    plan_from_partition,
    shot_variant_schedule,
)
from .devices import (
    Machine,
    Platform,
    QueuedEntry,
    SubmissionResult,
    enqueue_schedule,
    form_batch,
    prepopulate,
    submit,
)
from .estimation import (
    CapacityError,
    EstimateModel,
    base_noise,
    extrapolated_noise,
    initial_estimates,
    processing_time,
    scaled_processing_time,
    setup_time,
)
from .evaluation import (
    EvaluationResult,
    Schedule,
    evaluate,
    is_valid,
    schedule_distance,
)
from .rl import Policy, SchedulingEnv, extract_schedule, train
from .schedulers import (
    Candidate,
    InfeasibleJobError,
    InstanceTooLargeError,
    ScatterConfig,
    binpack_schedule,
    exact_schedule,
    predict_machine,
    scatter_search,
)
from .bench import (
    BenchmarkReport,
    BenchmarkScenario,
    builtin_scenario,
    default_config,
    emit_report,
    load_scenario,
    run_benchmark,
)

__version__ = "0.1.0"
