"""Finite-buffer LCFS tracking-queue simulation and analysis.

A sensor samples a standard Wiener process at Poisson (or renewal) instants
and queues the samples in a finite buffer served LCFS without preemption.
When the buffer overflows, a dropping policy picks a victim.  The package
simulates these queues, measures average peak age and trajectory
reconstruction error, and evaluates the matching closed forms for the Markov
case.
"""

from .analytic import (
    AnalyticParams,
    InvariantMeasure,
    cascade_wait,
    doublings_to_exceed_half,
    heavy_traffic_peak_age_iaa,
    invariant_measure,
    lambda_eff,
    peak_age_keep_fresh_mm12,
    peak_age_keep_fresh_mm1b,
    peak_age_keep_old_mm12,
    peak_age_keep_old_mm1b,
    re_keep_fresh_mm12,
    re_keep_fresh_mm1b,
    re_keep_old_mm12,
    re_keep_old_mm1b,
    second_moment_keep_fresh_mm12,
    second_moment_keep_fresh_mm1b,
    second_moment_keep_old_mm12,
    second_moment_keep_old_mm1b,
    steady_probs,
)
from .distributions import (
    ARRIVAL_STREAM,
    PATH_STREAM,
    SERVICE_STREAM,
    DistributionSpec,
    Erlang,
    Exponential,
    LogNormal,
    Pareto,
    RngStream,
    mean_of,
    rate_of,
    sample,
    sample_array,
    variance_of,
)
from .metrics import (
    AgeSummary,
    ReSummary,
    delivered_waits,
    mean_normalized_wait,
    peak_ages,
    reconstruction_error,
    second_moment_intervals,
)
from .policies import (
    DropContext,
    Policy,
    PolicyKind,
    decide_iaa_general,
    decide_iaa_single,
    decide_keep_fresh,
    decide_keep_old,
    inter_arrival_aware,
    keep_fresh,
    keep_old,
    parse_policy,
    threshold_iaa,
)
from .simulation import (
    DeliveryTrace,
    Fate,
    PacketRecord,
    PolicyContractError,
    QueueState,
    SimConfig,
    loss_probability,
    simulate,
)
from .wiener import (
    McError,
    SamplePoint,
    WienerPath,
    generate_path,
    lmmse_reconstruct,
    mc_reconstruction_error,
    mean_integrated_error,
    refine_path,
)

__version__ = "0.1.0"
