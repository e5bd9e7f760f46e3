"""Invisible image watermarking in the wavelet/spectral domain."""
from .attacks import AttackSpec, apply_attack, strength_to_params
from .codec import capacity_bound, embed, expand_message, make_mask, parse_message, random_message
from .config import RunConfig, load_config
from .decoder import DecodeResult, extract, soft_extract, update_threshold
from .errors import (CapacityError, ConfigError, DivergenceError, ImageIOError, SpecMarkError,
                     UnreadableImageError, UnsupportedImageError)
from .imagecore import Image, clamp, load_image, save_image
from .metrics import PerfCurve, aggregate, bra, mse, psnr, ssim
from .model import SpecMarkModel, load_model, save_model
from .training import TrainConfig, decoder_loss, encoder_loss, total_loss, train

__version__ = "0.1.0"
