"""Security analysis of Gaussian CV-QKD with semitrusted side channels."""

from .analysis import (
    OptimizationResult,
    SweepGrid,
    SweepRecord,
    ThresholdResult,
    find_eps_max,
    find_max_distance,
    find_vn_max,
    key_rate,
    optimize_modulation,
    optimize_monitor_weight,
    run_sweep,
)
from .collective import (
    PurificationConfig,
    build_purification,
    entangling_cloner_holevo,
    holevo_bound,
    key_rate_collective,
)
from .config import (
    Axis,
    ConfigError,
    distance_to_transmittance,
    parse_config,
    transmittance_to_distance,
)
from .countermeasures import (
    DecouplingReport,
    MonitoringWeights,
    decoupling_check,
    monitoring_weights,
    optimal_k,
    weighted_difference_stats,
)
from .gaussian import CovarianceMatrix, GaussianError
from .individual import (
    COLLECTIVE,
    INDIVIDUAL,
    KeyRateReport,
    Unsupported,
    eve_information_individual,
    key_rate_individual,
    mutual_information,
)
from .scenario import (
    ChannelParams,
    CorrelatedModulation,
    DetectorParams,
    Interferometer,
    NotFullyDecouplable,
    Off,
    Optimal,
    PMStatistics,
    ProtocolParams,
    Scenario,
    ScenarioError,
    SideChannelA,
    SideChannelB,
    SingleCoupler,
    Thermal,
    UncorrelatedModulation,
    Vacuum,
    Weighted,
    pm_statistics,
)

__version__ = "0.1.0"
