"""Borel-Laplace summation of transseries solutions of rank-one ODE systems.

Pipeline: ``model`` (prepared systems) -> ``transgen`` (formal hierarchy)
-> ``borel`` (Borel plane continuation, germs, Stokes constants) -> ``sum``
(lateral and averaged Laplace sums, Stokes transitions).  ``oracle`` solves
the Borel-plane convolution equation on a grid as an independent check.
"""
from . import model, series, transgen, borel, oracle, checks
from . import sum as summation
from .model import PreparedSystem, load_spec, scalar_system
from .transgen import generate
from .borel import to_borel, stokes_constant
from .sum import averaged_sum, lateral_sum, laplace_ray, sum_transseries

__version__ = "0.1.0"

__all__ = ["model", "series", "transgen", "borel", "oracle", "checks", "summation",
           "PreparedSystem", "load_spec", "scalar_system", "generate", "to_borel",
           "stokes_constant", "averaged_sum", "lateral_sum", "laplace_ray", "sum_transseries"]
