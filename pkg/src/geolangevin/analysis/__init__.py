"""Generators, weak-consistency checks, stationary laws and invariant monitors."""
from .generator import (ANALYTIC_KINDS, analytic_generator, cylinder_sv_generator, generator_apply,
                        generator_values, langevin_chart_generator, sphere_sv_generator,
                        stratonovich_generator)
from .monitor import conserved_monitor
from .stationary import (FREE, StationaryDensity, StationaryReport, batch_means_ess, collect_samples,
                         infinitesimal_stationarity, marginal, stationary_density, stationary_law,
                         stationary_test)
from .testfunctions import (TestFunction, constant, coordinate, coordinates_and_squares,
                            from_callable, monomial, squared_coordinate, trig_product)
from .weak import TerminalReport, WeakReport, terminal_expectation, weak_consistency

__all__ = [
    "ANALYTIC_KINDS", "FREE", "StationaryDensity", "StationaryReport", "TerminalReport", "TestFunction", "WeakReport",
    "analytic_generator", "batch_means_ess", "collect_samples", "conserved_monitor", "constant",
    "coordinate", "coordinates_and_squares", "cylinder_sv_generator", "from_callable",
    "generator_apply", "generator_values", "infinitesimal_stationarity", "langevin_chart_generator",
    "marginal", "monomial", "sphere_sv_generator", "squared_coordinate", "stationary_density",
    "stationary_law", "stationary_test", "stratonovich_generator", "terminal_expectation", "trig_product", "weak_consistency",
]
