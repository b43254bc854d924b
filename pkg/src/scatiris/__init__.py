"""Iris recognition from wavelet scattering and Haralick texture features.

Images go through a two-layer scattering transform (mean and variance of
every map) and block-wise Haralick statistics, are reduced by PCA and are
matched to enrolled templates by minimum Euclidean distance.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config
from .corpus import (
    DatasetManifest,
    ManifestEntry,
    SyntheticSpec,
    generate_synthetic,
    load_image,
    preprocess,
    read_manifest,
    split_dataset,
    write_manifest,
    write_pgm,
)
from .estimators import (
    HaralickTransformer,
    IrisFeatureExtractor,
    MinimumDistanceClassifier,
    PCAReducer,
    ScatteringTransformer,
)
from .features import (
    FeatureVector,
    PcaModel,
    ReducedVector,
    choose_k,
    concat_features,
    fit_pca,
    project,
    retained_variance,
)
from .matcher import EvalReport, Gallery, MatchResult, enroll, evaluate, identify
from .scattering import (
    FilterBank,
    ScatteringConfig,
    ScatteringMaps,
    build_filter_bank,
    pool_scattering,
    scatter,
    scattering_features,
    scattering_path_count,
)
from .texture import block_texture_features, cooccurrence, haralick14, marginals, quantize
