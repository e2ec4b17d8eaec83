"""Reference-guided image upscaling with feature-space texture transfer.

The package splits into small stages: image resampling (image_core),
a forward-only convolutional feature extractor (feature_extractor),
patch matching and swapped-map assembly (feature_swap), the image
synthesis trunk (transfer_net), metrics (losses), dataset utilities
(dataset_tool), and a command line front end (cli). Weights and
feature pyramids travel in the NTTW container format (nttw).
"""

from .dataset_tool import (
    DEFAULT_LEVELS,
    PairRecord,
    SimilarityLevels,
    assign_levels,
    gen_warped_ref,
    match_count,
    pair_directory,
    read_pairs,
    write_pairs,
)
from .errors import (
    AllPatchesDegenerateError,
    BadMagicError,
    ChecksumError,
    ConfigError,
    DegenerateInputError,
    DegenerateWarpError,
    ImageDecodeError,
    ImageIOError,
    ImageWriteError,
    MissingTapError,
    MissingWeightError,
    NttError,
    ReferenceTooSmallError,
    ShapeError,
    TruncatedFileError,
    UnreadableImageError,
    UnsupportedImageError,
    UnsupportedVersionError,
    WeightFormatError,
)
from .feature_extractor import (
    FeatureMap,
    NetworkConfig,
    WeightStore,
    conv2d_forward,
    extract_pyramid,
    load_weights,
    maxpool2,
    random_extractor_weights,
    rectify,
    store_weights,
    vgg19_config,
)
from .feature_swap import (
    CorrespondenceMap,
    PatchGrid,
    SwapConfig,
    SwappedPyramid,
    assemble_swap_map,
    augment_references,
    best_match,
    broadcast_scores,
    concat_grids,
    correlation_maps,
    load_pyramid,
    match_patches,
    project_correspondence,
    sample_patches,
    save_pyramid,
    swap_pipeline,
)
from .image_core import (
    bicubic_resample,
    bilinear_sample,
    check_image,
    degrade_ref,
    load_image,
    new_image,
    quantize,
    rotate_crop,
    save_image,
    to_gray,
)
from .losses import (
    LossWeights,
    TextureLossConfig,
    gram_matrix,
    perceptual_loss,
    psnr,
    rec_loss,
    ssim,
    texture_loss,
    total_objective,
)
from .nttw import read_tensors, write_tensors
from .transfer_net import (
    TransferConfig,
    make_content_base,
    random_generator_weights,
    residual_block_forward,
    subpixel_upscale,
    transfer_forward,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
