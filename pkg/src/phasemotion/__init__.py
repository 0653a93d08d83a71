"""Phase-based (Eulerian) motion analysis and editing on complex steerable pyramids."""

from .apps import (PredictionConfig, TransferConfig, affine_warp, magnify, predict_next,
                   predict_rollout, transfer_to_image, transfer_to_video)
from .config import Config, load_config, parse_config
from .errors import (DataError, DivergenceError, FormatError, PhaseMotionError, SizeError,
                     StructureError, UsageError)
from .loss import (LossWeights, TransferObjective, content_loss, correlation, optimize_transfer,
                   style_loss, temporal_loss, weighted_gram)
from .motion import FlowField, PhaseDelta, estimate_flow, flow_from_phase, phase_delta, wrap_angle
from .pyramid import (FilterBank, Pyramid, PyramidSpec, decompose, make_filter_bank, merge_channels,
                      reconstruct, split_channels)
from .synth import SynthSpec, flow_error, generate, mae, psnr

__version__ = "0.1.0"
