from qmclab.bounds.lemmas import *
from qmclab.bounds.petz_continuity import *
from qmclab.bounds.search import *

__all__ = [
    # From lemmas
    "CoreL2",
    "CoreL2Simplified",
    "InfidelitySqrt",
    "GramFidelity",
    "PowersStormer",
    "Schatten4To2",
    "NormRelations",
    "PartialTraceL2",
    "check_core_l2",
    "check_infidelity_sqrt",
    "check_gram_fidelity",
    "check_powers_stormer",
    "check_schatten_4to2",
    "check_norm_relations",
    "check_partial_trace_l2",
    # From petz_continuity
    "PetzFidelity",
    "PetzTrace",
    "PetzL2Dim",
    "HalfMarginal",
    "GeneralPetz",
    "check_petz_fidelity",
    "check_petz_trace",
    "check_petz_l2_dim",
    "check_half_marginal",
    "check_general_petz",
    # From search
    "SearchResult",
    "adversarial_search",
]
