"""neuralgen: U-Net patch generators for the moldkit planner.

Trains image-to-image generators on prior/posterior patch datasets
exported by moldkit (DIMG files) and serves predictions back to the
planner through a shared-directory file exchange.  The planner refines
whatever comes back, so the two packages touch only through files.
"""

from .dimgio import read_dimg, write_dimg
from .serve import predict_batch, serve_forever, serve_once
from .train import TrainConfig, load_model, save_model, train, weighted_mae
from .unet import GeneratorSpec, PatchGenerator

__version__ = "0.1.0"
