from qmclab.base import *
from qmclab.bounds import *
from qmclab.campaign import *
from qmclab.channels import *
from qmclab.errors import *
from qmclab.io import *
from qmclab.linalg import *
from qmclab.petz import *
from qmclab.protocols import *
from qmclab.states import *

try:
    from qmclab._version import __version__
except ImportError:
    from importlib.metadata import PackageNotFoundError, version

    try:
        __version__ = version("qmclab")
    except PackageNotFoundError:
        __version__ = "1.0"

__all__ = [
    # From linalg
    "SystemLayout",
    "HermitianSpectrum",
    "kron",
    "kron_all",
    "identity",
    "hermitize",
    "partial_trace",
    "permute_systems",
    "spectrum",
    "psd_spectrum",
    "herm_sqrt",
    "pinv_sqrt",
    "support_projector",
    "schatten_norm",
    "trace_distance",
    "trace_distance_half",
    "check_density_matrix",
    "fidelity",
    "sqrt_overlap",
    "vn_entropy",
    "relative_entropy",
    # From states
    "DensityOperator",
    "validate_density",
    "BlockSpec",
    "random_block_spec",
    "MarkovBlock",
    "MarkovStructure",
    "random_pure",
    "random_density",
    "random_unitary",
    "draw_markov_structure",
    "assemble_qmc",
    "random_qmc",
    "random_markov_chain",
    "product_state",
    "ghz_state",
    "embed_with_max_mixed",
    "perturb_away",
    "perturb_markov_structure",
    # From channels
    "QuantumChannel",
    "StinespringIsometry",
    "channel_apply",
    "channel_adjoint_apply",
    "stinespring",
    "identity_channel",
    "depolarizing_channel",
    "partial_trace_channel",
    "random_channel",
    "extend_channel",
    "compose_channels",
    # From petz
    "PetzReconstruction",
    "PetzMap",
    "petz_reconstruct",
    "petz_reconstruct_detailed",
    "petz_reconstruct_swapped",
    "petz_factor",
    "petz_map_kraus",
    "general_petz",
    "general_petz_channel",
    "ChainReconstruction",
    "chain_reconstruct",
    "chain_reconstruct_detailed",
    "pair_marginals",
    "cmi",
    "cmi_via_relative_entropy",
    "data_processing_gap",
    "petz_distance",
    "markov_diagnostics",
    "far_from_markov",
    # From base
    "BoundReport",
    "BoundCheck",
    "bound_names",
    "get_bound",
    # From bounds
    "check_core_l2",
    "check_infidelity_sqrt",
    "check_gram_fidelity",
    "check_powers_stormer",
    "check_schatten_4to2",
    "check_norm_relations",
    "check_partial_trace_l2",
    "check_petz_fidelity",
    "check_petz_trace",
    "check_petz_l2_dim",
    "check_half_marginal",
    "check_general_petz",
    "SearchResult",
    "adversarial_search",
    # From protocols
    "EstimationOracleConfig",
    "OracleEstimate",
    "oracle_estimate",
    "oracle_estimate_detailed",
    "SampleBudget",
    "sample_budget",
    "chain_deltas",
    "ProtocolTranscript",
    "OracleCall",
    "Guarantee",
    "tomo_tripartite",
    "tomo_multipartite",
    "certify",
    "qmc_test",
    # From io
    "matrix_to_json",
    "matrix_from_json",
    "state_to_json",
    "state_from_json",
    "save_state",
    "load_state",
    "channel_to_json",
    "channel_from_json",
    "content_digest",
    # From campaign
    "CampaignConfig",
    "CampaignSummary",
    "run_campaign",
    # From errors
    "QmclabError",
    "DimensionError",
    "DensityValidationError",
    "NotHermitianError",
    "NotPSDError",
    "TraceError",
    "InvalidExponentError",
    "DegenerateInputError",
    "InfeasibleTargetError",
    "ChannelError",
    "UnknownFormulaError",
    "UnknownBoundError",
    "ConfigError",
    "MatrixFormatError",
    "__version__",
]
