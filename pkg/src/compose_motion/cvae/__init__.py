from .data import Batch, make_batch
from .gradcheck import grad_check
from .losses import kl_divergence, recon_loss, total_loss
from .model import CVAE, DiagonalGaussian, ModelConfig, count_parameters, reparameterize
from .train import (
    InvalidStateError,
    TrainingDiverged,
    TrainState,
    generate,
    generate_from_label,
    load_checkpoint,
    save_checkpoint,
    smoothed,
    train,
)
