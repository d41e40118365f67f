"""Population EEG spectral tensors: build, decompose, project, classify."""

__version__ = "0.1.0"

from .errors import (
    ArgumentError,
    ConfigError,
    EegFactorError,
    IngestError,
    NumericalError,
    ParseError,
)
from .tensor import (
    FactorSet,
    Tensor3,
    khatri_rao,
    load_factors,
    load_tensor,
    mttkrp,
    reconstruct,
    refold,
    relative_error,
    save_factors,
    save_tensor,
    unfold,
)
from .edf import ManifestEntry, Recording, read_edf, read_edf_file, read_manifest, select_channels, write_edf
from .preprocess import (
    BANDS,
    FREQ_GRID,
    Epoch,
    EpochSpectrum,
    PibVector,
    bandpass,
    build_tensor,
    epoch_and_reject,
    pib,
    select_awake_epochs,
    welch,
)
from .cpd import CpdOptions, CpdResult, cpd, cpd_als, cpd_gn, factor_match_score
from .rank import RankReport, diffit
from .projection import ProjectionBasis, WeightVector, build_basis, project, project_matrix
from .classify import (
    CohortDataset,
    CVReport,
    GnbModel,
    SvmModel,
    assign_folds,
    auc,
    cross_validate,
    gnb_fit,
    gnb_score,
    svm_fit,
    svm_objective,
    svm_score,
)
from .synth import SynthCohort, SynthSpec, make_cohort, make_recording, make_tensor
