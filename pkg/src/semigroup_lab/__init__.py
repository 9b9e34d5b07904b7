"""Numerical companion for quantitative analyticity of symmetric diffusion
semigroups on finite reversible Markov chains and vector-valued
Littlewood-Paley-Stein bounds."""

from .errors import (ConvergenceError, DomainError, NumericError, SemigroupLabError,
                     SingularityError, StructuralError)
from .spaces import FiniteMeasureSpace, FunctionField, MixedNormConfig, mixed_norm, operator_norm_lower
from .markov import DiffusionSemigroup, build_chain, semigroup_at, validate_markov

__version__ = "0.1.0"
