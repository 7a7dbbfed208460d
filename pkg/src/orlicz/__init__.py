"""Desk-scale numerics for Orlicz-space inequalities.

The package has five computational layers plus a CLI:

* :mod:`orlicz.young` -- Young functions, conjugation, growth classes and
  the integral balance conditions coupling a pair (A, B).
* :mod:`orlicz.spaces` -- sampled fields, Luxemburg norms, decreasing
  rearrangements and the two Hardy-type averaging operators.
* :mod:`orlicz.bogovskii` -- the divergence-equation solution operator on
  star-shaped domains and its extension to unions of such domains.
* :mod:`orlicz.negnorm` -- two-sided negative-norm estimates for the
  gradient functional via polynomial bubble test families.
* :mod:`orlicz.fem` -- triangulations, a divergence-preserving velocity
  interpolant, discrete inf-sup constants and pressure reconstruction.

Everything is deterministic: no operation touches global RNG state, and
reductions run in a fixed order so repeated runs are bit-identical.
"""

from orlicz.young import (
    YoungFunction,
    power,
    zygmund,
    exponential,
    eyring,
    linear_cap,
    tabulated,
    parse_young,
    young_from_dict,
    check_balance,
    dominates,
)
from orlicz.spaces import (
    SampledField,
    StepFunction,
    modular,
    luxemburg_norm,
    rearrange,
    holder_pairing_check,
    hardy_average,
    hardy_dual,
    rearrangement_bound_rhs,
    poincare_check,
)

__version__ = "0.1.0"

__all__ = [
    "YoungFunction", "power", "zygmund", "exponential", "eyring",
    "linear_cap", "tabulated", "parse_young", "young_from_dict",
    "check_balance", "dominates",
    "SampledField", "StepFunction", "modular", "luxemburg_norm",
    "rearrange", "holder_pairing_check", "hardy_average", "hardy_dual",
    "rearrangement_bound_rhs", "poincare_check",
    "__version__",
]
