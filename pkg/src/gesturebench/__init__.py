"""Data-parallel hand-shape classification engine and benchmark harness.

Pipeline: binary hand masks are normalized by their wrist line, turned
into descriptor bundles (shape contexts, distance-transform histogram,
orientation histogram, Hu moments), matched against a labeled gallery
with one of eight methods and scored by rank / cumulative response
curves, with a timing harness for speedup and efficiency analysis.
"""

from .classify import (CrcReport, Gallery, LabeledBundle, Method,
                       ProbeError, ProbeResult, classify_batch,
                       classify_one, evaluate, score)
from .descriptors import (DescriptorBundle, build_bundle, build_bundles,
                          dt_histogram, hu_moments, orientation_histogram,
                          shape_contexts)
from .geometry import (Contour, DistanceField, SampledContour,
                       distance_transform, extract_contour, resample_contour)
from .kernels import BACKEND
from .masks import (BinaryMask, NormalizationConfig, NormalizedMask,
                    WristAnnotation, load_mask, load_wrist_annotations,
                    normalize, save_mask)
from .matching import (Assignment, CombineWeights, chi_square, combined_cost,
                       hausdorff, hu_distance, hungarian, sc_cost,
                       template_ssd)
from .params import Params
from .synth import GestureSpec, SynthConfig, generate

__version__ = "0.1.0"
