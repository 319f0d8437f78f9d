"""Information-flow analysis of neural-network activations via normalized
Gram-matrix eigenspectra.

The package estimates Renyi alpha-entropy, multivariate joint entropy and
multivariate mutual information directly from mini-batch sample matrices,
and applies them to activation dumps: data-processing-inequality audits,
redundancy/synergy decomposition of feature maps, information-plane
trajectories, permutation-test filter-count selection and bottleneck-style
filter scoring.
"""

from .gram import KernelSpec, GramMatrix, silverman_sigma, gram, label_gram
from .entropy import (
    EntropyConfig,
    EntropyValue,
    MmiValue,
    SaturationResult,
    matrix_entropy,
    joint_entropy,
    mmi,
    cmi,
    saturation_check,
)
from .pid import PairSamplingPolicy, PidReport, tradeoff, nonredundant, layer_pid
from .chains import (
    GramGroup,
    ChainReport,
    IpPoint,
    IpTrajectory,
    dpi_forward,
    dpi_error,
    ip_trajectory,
    snapshot_gram_group,
    load_batch_grams,
)
from .selection import (
    PermutationTestConfig,
    CandidateTrace,
    SelectionResult,
    cmi_permutation_step,
    select_filter_count,
    ib_score,
)
from .tensorio import (
    TensorFormatError,
    ManifestError,
    LayerSnapshot,
    LayerRef,
    BatchEntry,
    EpochEntry,
    RunManifest,
    read_tensor,
    write_tensor,
    load_manifest,
    write_manifest,
    load_batch,
)

__version__ = "0.1.0"
