"""Training loop, checkpoints and sampling for the conditional VAE."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import torch

from ..coupling import PseudoComposite, couple_labels
from ..skeleton import ActionLabel, MotionSequence
from ..smooth import DRSettings
from .data import DTYPE, Batch, make_batch, pose_statistics
from .losses import total_loss
from .model import CVAE, ModelConfig, reparameterize

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class InvalidStateError(RuntimeError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, dump_path: Optional[Path] = None):
        super().__init__(message if dump_path is None else f"{message} (batch dumped to {dump_path})")
        self.dump_path = dump_path


@dataclass
class TrainState:
    config: ModelConfig
    model: CVAE
    optimizer: torch.optim.Optimizer
    generator: torch.Generator
    epoch: int = 0
    history: List[Dict[str, float]] = field(default_factory=list)

    def flat_parameters(self) -> np.ndarray:
        return torch.cat([p.detach().flatten() for p in self.model.parameters()]).numpy()


def build_model(cfg: ModelConfig, seed: int) -> CVAE:
    torch.manual_seed(seed)
    return CVAE(cfg).to(DTYPE)


def new_state(cfg: ModelConfig, seed: int) -> TrainState:
    model = build_model(cfg, seed)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    gen = torch.Generator().manual_seed(seed)
    return TrainState(cfg, model, opt, gen)


def smoothed(values: Sequence[float], window: int = 5) -> List[float]:
    """Trailing moving average."""
    out = []
    for k in range(len(values)):
        chunk = values[max(0, k - window + 1):k + 1]
        out.append(float(sum(chunk) / len(chunk)))
    return out


def _dump_batch(batch: Batch, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, joints=batch.joints.numpy(), labels=batch.labels.numpy())


def train(
    composites: Sequence[PseudoComposite],
    config: ModelConfig,
    seed: int,
    *,
    sources: Optional[Mapping[str, MotionSequence]] = None,
    inpainter=None,
    dr: Optional[DRSettings] = None,
    use_energy: bool = True,
    state: Optional[TrainState] = None,
    epochs: Optional[int] = None,
    checkpoint_dir: Optional[Path] = None,
    dump_dir: Optional[Path] = None,
    on_epoch: Optional[Callable[[TrainState], None]] = None,
) -> TrainState:
    """Fit the model with AdamW at a constant learning rate.

    Refinement is active when ``sources``, ``inpainter`` and ``dr`` are all
    given and ``config.w_dr > 0``; it runs every ``config.dr_every``-th step.
    Passing ``state`` resumes training.  A non-finite loss aborts with
    :class:`TrainingDiverged` after saving the batch under ``dump_dir``.
    """
    if not composites:
        raise ValueError("cannot train on an empty dataset")
    data = make_batch(composites, sources if inpainter is not None else None, use_energy=use_energy)
    if data.joints.shape[1] != config.num_frames:
        raise ValueError(f"data has {data.joints.shape[1]} frames, config expects {config.num_frames}")
    if data.labels.shape[1] != config.num_classes:
        raise ValueError(f"data has {data.labels.shape[1]} classes, config expects {config.num_classes}")
    if state is None:
        state = new_state(config, seed)
        state.model.set_normalization(*pose_statistics(data.joints))
    model, opt, gen = state.model, state.optimizer, state.generator
    n = len(data)
    bs = min(config.batch_size, n)
    target_epoch = state.epoch + (config.epochs if epochs is None else epochs)
    step = sum(int(h.get("steps", 0)) for h in state.history)
    model.train()
    while state.epoch < target_epoch:
        order = torch.randperm(n, generator=gen)
        sums = {"recon": 0.0, "kl": 0.0, "dr": 0.0, "total": 0.0}
        dr_steps = 0
        steps = 0
        for start in range(0, n, bs):
            batch = data.select(order[start:start + bs])
            with_dr = step % config.dr_every == 0
            loss, parts = total_loss(batch, model, gen, inpainter=inpainter, dr=dr, with_dr=with_dr)
            if not torch.isfinite(loss):
                dump = None
                if dump_dir is not None:
                    dump = Path(dump_dir) / f"nan-epoch{state.epoch}-step{step}.npz"
                    _dump_batch(batch, dump)
                raise TrainingDiverged(
                    f"non-finite loss at epoch {state.epoch} step {step}: "
                    + ", ".join(f"{k}={float(v.detach())!r}" for k, v in parts.items()),
                    dump,
                )
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            w = len(batch)
            for k in ("recon", "kl", "total"):
                sums[k] += float(parts[k].detach()) * w
            if with_dr and batch.has_sources and config.w_dr > 0 and inpainter is not None:
                sums["dr"] += float(parts["dr"].detach()) * w
                dr_steps += w
            step += 1
            steps += 1
        state.epoch += 1
        record = {k: sums[k] / n for k in ("recon", "kl", "total")}
        record["dr"] = sums["dr"] / dr_steps if dr_steps else 0.0
        record["epoch"] = state.epoch
        record["steps"] = steps
        state.history.append(record)
        log.debug("epoch %d recon=%.6g kl=%.6g dr=%.6g", state.epoch, record["recon"], record["kl"], record["dr"])
        if checkpoint_dir is not None and config.checkpoint_every and state.epoch % config.checkpoint_every == 0:
            save_checkpoint(state, Path(checkpoint_dir) / f"epoch{state.epoch:05d}.npz")
        if on_epoch is not None:
            on_epoch(state)
    model.eval()
    return state


# -- generation --------------------------------------------------------------------


def generate_from_label(
    label_weights: np.ndarray,
    state: TrainState,
    generator: torch.Generator,
    count: int = 1,
    T: Optional[int] = None,
) -> np.ndarray:
    """Decode ``count`` prior samples for one mixed label; returns ``(count, T, N, 3)``."""
    if state.epoch == 0:
        raise InvalidStateError("model has not been trained")
    model = state.model
    model.eval()
    with torch.no_grad():
        w = torch.tensor(np.array(label_weights, dtype=np.float64)).expand(count, -1)
        z = reparameterize(model.prior(w), generator)
        return model.decode(w, z, T).numpy()


def generate(
    x_i: ActionLabel,
    x_j: ActionLabel,
    lam: float,
    state: TrainState,
    generator: torch.Generator,
    T: Optional[int] = None,
) -> MotionSequence:
    label = couple_labels(x_i, x_j, lam)
    joints = generate_from_label(label.weights, state, generator, 1, T)[0]
    return MotionSequence(joints, label, id=f"gen-{x_i.class_id}-{x_j.class_id}")


# -- checkpoints -------------------------------------------------------------------


def save_checkpoint(state: TrainState, path: Union[str, Path]) -> None:
    """Write config, flat parameters, optimizer moments and RNG state to one ``.npz``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "epoch": state.epoch,
        "history": state.history,
    }
    arrays = {f"param/{k}": v.detach().numpy() for k, v in state.model.state_dict().items()}
    opt_state = state.optimizer.state_dict()
    names = [k for k, _ in state.model.named_parameters()]
    for idx, slot in opt_state["state"].items():
        for key, val in slot.items():
            arrays[f"opt/{names[idx]}/{key}"] = val.detach().numpy() if torch.is_tensor(val) else np.asarray(val)
    header["optimizer"] = {"param_groups": opt_state["param_groups"]}
    arrays["rng"] = state.generator.get_state().numpy()
    arrays["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: Union[str, Path]) -> TrainState:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        cfg = ModelConfig.from_dict(header["config"])
        state = new_state(cfg, 0)
        sd = {k[len("param/"):]: torch.from_numpy(data[k].copy()) for k in data.files if k.startswith("param/")}
        state.model.load_state_dict(sd)
        names = [k for k, _ in state.model.named_parameters()]
        opt_state = {"state": {}, "param_groups": header["optimizer"]["param_groups"]}
        for idx, name in enumerate(names):
            prefix = f"opt/{name}/"
            slot = {k[len(prefix):]: torch.from_numpy(data[k].copy()) for k in data.files if k.startswith(prefix)}
            if slot:
                opt_state["state"][idx] = slot
        state.optimizer.load_state_dict(opt_state)
        state.generator.set_state(torch.from_numpy(data["rng"].copy()))
    state.epoch = header["epoch"]
    state.history = header["history"]
    return state
