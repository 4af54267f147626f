"""Hand-vein ROI extraction via circular peg fiducials.

Pipeline: exposure normalization -> Canny edge detection -> circular
Hough transform over the two peg fiducials -> diameter-based scale
inference -> adaptive placement and extraction of the canonical 500x500
ROI.  Ships with a deterministic synthetic NIR scene generator (the
verification bed) and dataset manifest tooling.
"""

from .canny import CannyParams, GradientField, canny, hysteresis, non_max_suppression, sobel_gradients
from .enhance import EnhanceParams, enhance, global_hist_eq, local_adaptive_eq
from .hough import Accumulator, CircleHit, HoughParams, accumulate, detect_circles, find_peaks
from .image import gaussian_blur, load_image, normalize_exposure, resample, save_image
from .profiles import IlluminationProfile, default_profiles, load_profile_config
from .roi import PegPair, RoiResult, RoiSpec, compute_roi, extract, extract_roi, infer_scale, select_peg_pair
from .synth import GroundTruth, SceneSpec, VariationRanges, make_corpus, make_database_mimic, random_scene, render_scene

__version__ = "0.1.0"
