"""gstvqa: full-reference video quality assessment with fused
spatio-temporal features.

Temporal entropic-difference features from a 3-level bior2.2 wavelet
packet decomposition are combined with a spatial quality index (built-in
SSIM / MS-SSIM, or any externally computed model score) into a 15-feature
vector, regressed against subjective opinion scores with a deterministic
epsilon-SVR, and evaluated with the content-disjoint repeated-trials
protocol (SROCC / KROCC / PLCC / RMSE).
"""

from .errors import (
    ArgumentError,
    DataError,
    DegenerateError,
    DimensionError,
    FitError,
    FormatError,
    GstVqaError,
    IoError,
    ShapeError,
)
from .evaluation import (
    DatasetManifest,
    EvalReport,
    ManifestRow,
    krocc,
    plcc_rmse,
    run_trials,
    split_by_content,
    srocc,
)
from .filterbank import FilterBankConfig, SubbandVolume, decompose
from .fusion import (
    GstFeatureVector,
    LabeledSet,
    SvrHyperparams,
    SvrModel,
    assemble,
    default_grid,
    fit,
    grid_search,
    predict,
)
from .ggd import (
    GgdParams,
    PatchStats,
    fit_ggd_kurtosis_match,
    ggd_entropy,
    ggd_kurtosis,
    scaled_entropy,
)
from .spatial import SpatialIndex, import_external_score, msssim_frame, spatial_index, ssim_frame
from .tgreed import (
    DEFAULT_SCALES,
    EntropyField,
    TgreedFeatures,
    build_pseudo_reference,
    compute_tgreed,
    entropy_field,
    tgreed_band,
)
from .video_io import (
    PlanarVideo,
    VideoMeta,
    frame_duplicate_upsample,
    read_video,
    spatial_downsample,
    temporal_subsample,
)

__version__ = "0.1.0"
