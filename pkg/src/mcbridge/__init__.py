"""Monte Carlo solvers for Fokker-Planck and Hamilton-Jacobi-Bellman
equations, with bridge solvers built on top of them."""

from .core import (PathEnsemble, PhysicalParams, RandomStream, TimeGrid,
                   increment_block, make_grid, sample_increments)
from .errors import (ConfigError, DegenerateHorizon, DegenerateWeight,
                     DivergedTraining, EmptyEnsemble, HorizonTooShort,
                     IllConditionedFit, McBridgeError, NonFiniteState,
                     NonIntegerSpan, Unsupported, ZeroDivisionOnGrid,
                     ZeroMass)
from .fokker_planck import (DensityQuery, WeightedEstimate, box_smooth,
                            density_overdamped, density_underdamped,
                            normalize, pool_estimates)
from .hjb import (TerminalData, VariationalField, bridge_running_cost,
                  dynkin_value, grad_value_overdamped,
                  grad_value_underdamped, variational_field)
from .network import Adam, DriftNetwork, SGD
from .bridge import (BoundaryPair, HalfBridgeState, LagrangeMultiplier,
                     TrainDiagnostics, TrainPhase, half_bridge_iterate, heat_mc_solve,
                     lambda_update, load_checkpoint, save_checkpoint,
                     stationarity_residual, train)
from .potentials import (DoubleWell, MonomialGrad, NetworkDrift, Potential,
                         QuadraticMatrix, QuarticShift, TabulatedDrift,
                         ZeroPotential)
from .oracles import (OUSpec, equilibrium_quadrature, finite_diff_gradient,
                      gaussian_bridge, histogram_density, ou_density,
                      ou_moments)
from .sde import evolve, simulate

__version__ = "1.0.0"
