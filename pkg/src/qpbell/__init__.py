"""Bell tests with s-parameterized quasiprobability functions.

Submodules: ``kernels`` (closed-form W for the single-photon entangled
state and the two-mode squeezed vacuum), ``fock`` (truncated Fock-space
oracle and binomial loss), ``bell`` (observables, efficiency remapping,
Bell values), ``search`` (optimization, thresholds, scans) and ``cli``.
"""

from qpbell.bell import BellContext, BellValue, MeasurementSettings, bell_value, effective_s
from qpbell.kernels import DomainError, GenericFock, SinglePhotonEntangled, Tmss, w_marginal, w_pair
from qpbell.search import SearchOptions, maximize_bell, min_eta_threshold, min_s_threshold

__all__ = [
    "BellContext", "BellValue", "MeasurementSettings", "bell_value", "effective_s",
    "DomainError", "GenericFock", "SinglePhotonEntangled", "Tmss", "w_marginal", "w_pair",
    "SearchOptions", "maximize_bell", "min_eta_threshold", "min_s_threshold",
]
