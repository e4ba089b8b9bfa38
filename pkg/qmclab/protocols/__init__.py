from qmclab.protocols.budget import *
from qmclab.protocols.certification import *
from qmclab.protocols.oracle import *
from qmclab.protocols.testing import *
from qmclab.protocols.tomography import *
from qmclab.protocols.transcript import *

__all__ = [
    # From budget
    "SampleBudget",
    "FORMULAS",
    "sample_budget",
    "chain_deltas",
    # From oracle
    "EstimationOracleConfig",
    "OracleEstimate",
    "oracle_estimate",
    "oracle_estimate_detailed",
    # From transcript
    "OracleCall",
    "Guarantee",
    "ProtocolTranscript",
    # From tomography
    "tomo_tripartite",
    "tomo_multipartite",
    # From certification
    "certify",
    # From testing
    "qmc_test",
]
