"""sunfleet: exact optimizer for solar-electric autonomous mobility-on-demand
fleet operations.

Builds a DAG-based mixed-integer linear program for joint request assignment,
charging, and vehicle-to-grid scheduling, solves it exactly at desk scale with
a built-in branch-and-bound over a bounded-variable simplex, and reports
schedules, grid power profiles, and cost breakdowns.
"""

from .analyze import (ChargeEvent, CostBreakdown, PowerProfile, SampleRun,
                      ValidationReport, Violation, aggregate_samples,
                      cost_breakdown, emit_report, power_profile, validate)
from .chain import check_routing, solve_chain_charging, vehicle_chains
from .errors import (BuildError, InputError, SolveError, SolutionImportError,
                     SunfleetError, ValidationError)
from .instance import (DagInstance, DepotSpec, TravelRequest, available_time,
                       build_dag, load_requests)
from .milp import (Breakdown, Solution, SolverConfig, lp_relaxation, solve,
                   solution_from_dict, solution_to_dict)
from .model import MilpModel, Row, VarDef, build_model
from .mps import export_model, import_solution, write_model
from .network import (PathResult, RoadNetwork, detour_via_station, fastest_path,
                      load_network)
from .oracle import brute_force_oracle
from .scenario import (FareModel, FleetSpec, PriceSeries, Scenario, SolarProfile,
                       average_price, charge_power_for_battery,
                       consumption_for_battery, default_duck_prices,
                       default_solar, fare_for, load_prices, load_solar,
                       sample_scenarios, solar_energy)
from .simplex import LpResult, backend_name, solve_lp

__version__ = "0.1.0"
