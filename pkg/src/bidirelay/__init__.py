"""Broadcast-phase beamforming for multi-pair bidirectional MIMO relaying."""

from .core import (EigPair, Scenario, ScenarioParseError, ValidationError, dominant_eigpair,
                   eigh_hermitian, generate_channels, illustration_scenario, read_scenario,
                   scenario_from_json, scenario_to_json, write_scenario)
from .kernels import BACKEND
from .power_duality import (CouplingSystem, DualityReport, InfeasibleError, MinPowerResult,
                            UnservableNodeError, build_coupling, counterexample, duality_check,
                            min_power_downlink, min_power_uplink)
from .precoding import (BeamformerSet, PowerAllocation, dpc_sinr, linear_beamformers,
                        linear_sinr, pair_rates, pair_sum_rate, single_pair_beamformer,
                        sinr_table, successive_dpc_beamformers, weighted_single_pair_rate)
from .rate_region import (RatePoint, RateRegion, convex_hull_2d, random_beam_region,
                          region_contains, region_metrics, sweep_region)
from .sdp_relax import (BisectionResult, PsdSolution, Rank1Result, SdpProblem,
                        bisect_rate_region, build_sdp, rank1_extract, sdp_bisect_region,
                        sdp_solve)

__version__ = "0.1.0"
