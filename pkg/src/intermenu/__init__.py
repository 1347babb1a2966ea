"""Optimal screening menus when a biased intermediary controls buyer
information: solvers, obedience certificates, benchmarks and sweeps."""

from .costs import (CostFunction, PowerCost, TabulatedConvexCost,
                    first_best_quality)
from .distributions import (BiPoolSegment, DiscloseSegment, HazardRateReport,
                            MpcReport, PoolSegment, PosteriorDistribution,
                            Prior, check_hazard_rate, conditional_mean,
                            integral_gap, is_mpc, monotone_pool)
from .errors import (CapReached, CertificateFailed, ConfigError,
                     DegenerateInterval, IntermenuError, LpInfeasible,
                     NoFeasiblePattern, NoInteriorSolution,
                     NonMonotoneQualities, OutOfRegime, PreconditionUnverified,
                     QualityCapWarning, RecursionCollapse, RegularityError)
from .menus import (REGIME_DIRECT, REGIME_INTERMEDIARY, REGIME_MUSSA_ROSEN,
                    DirectSingleItem, Menu, MenuItem, MenuOutcome)
from .outcomes import (MarketStats, RegimeComparison, SweepRow,
                       compare_regimes, market_stats, mussa_rosen_stats,
                       sweep, sweep_csv_text, write_sweep_csv)
from .persuasion import (DualPriceCertificate, ObedienceReport,
                         OracleBestResponse, build_certificate, buyer_choice,
                         check_obedience, indirect_utility,
                         intermediary_value, oracle_best_response,
                         verify_certificate)
from .restricted import solve_restricted_menu
from .solver import (DirectMenuSolution, MussaRosenSolution, TypeRecursion,
                     optimal_item_count, optimal_qualities, posterior_masses,
                     solve_direct_menu, solve_direct_single_item,
                     solve_mussa_rosen, solve_optimal_menu,
                     solve_posterior_types, transfers_from)
from .uniform_quadratic import (uq_item_count, uq_restricted_menu,
                                uq_unrestricted_menu)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
