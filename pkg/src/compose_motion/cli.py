"""Command-line entry point: ``compose-motion <command> [options]``.

Artifacts go to ``<output_dir>/<run-id>/`` where the run id hashes the
config (minus ``output_dir``) and seed.  Commands chain through those files:
``gen-data`` writes sources, ``couple`` reads them, ``train`` reads both.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from importlib.resources import files
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .config import ConfigError, RunConfig

log = logging.getLogger("compose_motion")

DEMO_CONFIG = "demo.json"


class CommandError(RuntimeError):
    pass


def bundled_config(name: str = DEMO_CONFIG) -> Path:
    return Path(str(files("compose_motion") / "configs" / name))


def run_id(cfg: RunConfig) -> str:
    d = cfg.to_dict()
    d.pop("output_dir")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def file_hash(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """A run directory plus its manifest."""

    def __init__(self, cfg: RunConfig, root: Path):
        self.cfg = cfg
        self.id = run_id(cfg)
        self.dir = root / self.id
        self.manifest_path = self.dir / "manifest.json"

    def path(self, name: str) -> Path:
        return self.dir / name

    def manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text())
        return {"run_id": self.id, "seed": self.cfg.seed, "config": self.cfg.to_dict(), "artifacts": {},
                "commands": []}

    def record(self, command: str, outputs: Sequence[str]) -> None:
        m = self.manifest()
        for name in outputs:
            p = self.path(name)
            targets = sorted(q for q in p.rglob("*") if q.is_file()) if p.is_dir() else [p]
            for q in targets:
                m["artifacts"][str(q.relative_to(self.dir))] = file_hash(q)
        if command not in m["commands"]:
            m["commands"].append(command)
        self.manifest_path.write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")

    def done(self, command: str, outputs: Sequence[str]) -> bool:
        m = self.manifest()
        return command in m["commands"] and all(self.path(o).exists() for o in outputs)

    def require(self, name: str, producer: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise CommandError(f"{p} is missing; run `{producer}` first")
        return p


# -- commands ----------------------------------------------------------------------


def _sources(run: Run):
    from .dataset import load_dataset

    return load_dataset(run.require("sources.jsonl", "gen-data"), len(run.cfg.data.kinds))


def _composites(run: Run):
    from .dataset import load_composites

    return load_composites(run.require("composites.jsonl", "couple"))


def cmd_gen_data(run: Run) -> List[str]:
    from .dataset import save_dataset
    from .pipeline import make_sources

    save_dataset(make_sources(run.cfg, run.cfg.seed), run.path("sources.jsonl"), run.cfg.data.kinds)
    return ["sources.jsonl", "labels.json"]


def cmd_couple(run: Run) -> List[str]:
    from .dataset import save_composites
    from .pipeline import make_composites

    comps = make_composites(run.cfg, _sources(run), run.cfg.seed)
    save_composites(comps, run.path("composites.jsonl"))
    run.path("policy.json").write_text(json.dumps(run.cfg.policy().to_dict(), indent=2) + "\n")
    return ["composites.jsonl", "policy.json"]


def cmd_energy(run: Run) -> List[str]:
    from .energy import compute_part_energy

    out = {s.id: compute_part_energy(s).as_dict() for s in _sources(run)}
    text = json.dumps(out, indent=2, sort_keys=True)
    run.path("energy.json").write_text(text + "\n")
    print(text)
    return ["energy.json"]


def cmd_render(run: Run) -> List[str]:
    from .render import contact_sheet, render_sequence, write_pgm

    cam = run.cfg.render.camera()
    out = run.path("render")
    out.mkdir(exist_ok=True)
    seen = set()
    for seq in _sources(run):
        if seq.class_id in seen:
            continue
        seen.add(seq.class_id)
        name = run.cfg.data.kinds[seq.class_id]
        frames = render_sequence(seq, cam, run.cfg.refine.stride)
        (out / name).mkdir(exist_ok=True)
        for k, f in enumerate(frames):
            write_pgm(f.pixels, out / name / f"frame{k * run.cfg.refine.stride:04d}.pgm")
        write_pgm(contact_sheet([f.pixels for f in frames]), out / f"{name}.pgm")
    return ["render"]


def cmd_decouple(run: Run, limit: int = 4) -> List[str]:
    from .decouple import attention_map, decouple_composite, region_average, top_fraction_mask
    from .energy import compute_part_energy
    from .render import contact_sheet, normalize_frontal, render_frame, write_pgm

    cfg = run.cfg
    cam = cfg.render.camera()
    sources = {s.id: s for s in _sources(run)}
    out = run.path("decouple")
    out.mkdir(exist_ok=True)
    kept = {}
    for comp in _composites(run)[:limit]:
        cid = comp.sequence.id
        seq = normalize_frontal(comp.sequence)
        frame = render_frame(seq.joints[seq.num_frames // 2], cam)
        e = [compute_part_energy(sources[sid]).per_joint for sid in comp.source_ids]
        v_i, v_j = decouple_composite(frame, e[0], e[1], cfg.render.rho, cam.patch, cfg.render.eps_pix)
        write_pgm(contact_sheet([frame.pixels, v_i.pixels, v_j.pixels], columns=3), out / f"{cid}.pgm")
        kept[cid] = {}
        for tag, energy, view in (("i", e[0], v_i), ("j", e[1], v_j)):
            att = attention_map(frame.joint_pixels, energy, cam, cfg.render.eps_pix)
            grid = region_average(att, cam.patch)
            # Scaled to the map's peak so the structure is visible in 8 bits.
            write_pgm(att.values / max(att.values.max(), 1e-300), out / f"{cid}_attention_{tag}.pgm")
            cells = np.kron(grid.values, np.ones((cam.patch, cam.patch)))
            write_pgm(cells / max(cells.max(), 1e-300), out / f"{cid}_regions_{tag}.pgm")
            write_pgm(view.pixels, out / f"{cid}_masked_{tag}.pgm")
            assert top_fraction_mask(grid, cfg.render.rho).kept_indices == view.mask.kept_indices
            kept[cid][tag] = view.mask.kept_indices
    (out / "kept_regions.json").write_text(json.dumps(kept, indent=2, sort_keys=True) + "\n")
    return ["decouple"]


def _write_log(history, path: Path) -> None:
    with path.open("w") as fh:
        for rec in history:
            fh.write(json.dumps({k: rec[k] for k in ("epoch", "recon", "kl", "dr", "total")}) + "\n")


def cmd_train(run: Run) -> List[str]:
    from .cvae.train import save_checkpoint
    from .pipeline import fit_model

    state = fit_model(run.cfg, _composites(run), _sources(run), run.cfg.seed,
                      checkpoint_dir=run.path("checkpoints"), dump_dir=run.path("dumps"))
    save_checkpoint(state, run.path("checkpoint.npz"))
    _write_log(state.history, run.path("train_log.jsonl"))
    outputs = ["checkpoint.npz", "train_log.jsonl"]
    if run.path("checkpoints").exists():
        outputs.append("checkpoints")
    return outputs


def _state(run: Run):
    from .cvae.train import load_checkpoint

    return load_checkpoint(run.require("checkpoint.npz", "train"))


def cmd_sample(run: Run) -> List[str]:
    from .pipeline import sample_pairs, stage_torch, test_pairs

    gen = sample_pairs(_state(run), test_pairs(run.cfg), run.cfg.eval.samples_per_pair,
                       stage_torch(run.cfg.seed, "sample"))
    with run.path("samples.jsonl").open("w") as fh:
        for seq, pair in gen:
            rec = {"id": seq.id, "pair": list(pair), "mixed_label": seq.label.weights.tolist(),
                   "joints": seq.joints.tolist()}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return ["samples.jsonl"]


def cmd_refine_eval(run: Run) -> List[str]:
    from .energy import compute_part_energy
    from .cvae.train import generate_from_label
    from .pipeline import build_inpainter, stage_torch
    from .refine import refinement_pass

    cfg = run.cfg
    cam = cfg.render.camera()
    sources = _sources(run)
    by_id = {s.id: s for s in sources}
    inpainter = build_inpainter(cfg, sources, cfg.seed)
    energy = {s.id: compute_part_energy(s) for s in sources}
    comps = _composites(run)
    state = _state(run)
    gen = stage_torch(cfg.seed, "refine-eval")

    def score(seqs):
        losses = []
        for comp, joints in zip(comps, seqs):
            i, j = comp.source_ids
            res = refinement_pass(joints, by_id[i], by_id[j], energy[i], energy[j], cam, cfg.render.rho,
                                  inpainter, cfg.refine.stride, cfg.render.eps_pix)
            losses.append(res.loss)
        losses = np.array(losses)
        return {"count": int(losses.size), "mean": float(losses.mean()), "median": float(np.median(losses)),
                "max": float(losses.max())}

    generated = [generate_from_label(c.mixed_label.weights, state, gen, 1)[0] for c in comps]
    report = {"inpainter": cfg.refine.inpainter, "generated": score(generated),
              "pseudo_targets": score([c.sequence for c in comps])}
    run.path("refine.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return ["refine.json"]


def cmd_evaluate(run: Run) -> List[str]:
    from .pipeline import eval_context, evaluate_state

    report = evaluate_state(run.cfg, _state(run), eval_context(run.cfg, run.cfg.seed), run.cfg.seed)
    run.path("metrics.json").write_text(report.to_json() + "\n")
    return ["metrics.json"]


def cmd_ablate(run: Run) -> List[str]:
    from .evaluation.ablation import run_ablation

    reports = run_ablation(run.cfg)
    blob = {arm: r.to_dict() for arm, r in reports.items()}
    run.path("ablation.json").write_text(json.dumps(blob, indent=2, sort_keys=True) + "\n")
    return ["ablation.json"]


COMMANDS: Dict[str, Callable[[Run], List[str]]] = {
    "gen-data": cmd_gen_data,
    "couple": cmd_couple,
    "energy": cmd_energy,
    "render": cmd_render,
    "decouple": cmd_decouple,
    "train": cmd_train,
    "sample": cmd_sample,
    "refine-eval": cmd_refine_eval,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
}

# Primary outputs, used to decide whether a command can be skipped.
OUTPUTS = {
    "gen-data": ["sources.jsonl"],
    "couple": ["composites.jsonl"],
    "energy": ["energy.json"],
    "render": ["render"],
    "decouple": ["decouple"],
    "train": ["checkpoint.npz", "train_log.jsonl"],
    "sample": ["samples.jsonl"],
    "refine-eval": ["refine.json"],
    "evaluate": ["metrics.json"],
    "ablate": ["ablation.json"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compose-motion", description="Compositional motion synthesis pipeline.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="run config JSON (default: bundled demo config)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", type=Path, help="override output_dir")
    parser.add_argument("--force", action="store_true", help="rerun even if outputs exist")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, value parsed as JSON when possible")
    parser.add_argument("--policy", type=Path, help="pairing policy JSON (sets coupling.pairs)")
    parser.add_argument("--count", type=int, help="number of pseudo-composites (sets coupling.count)")
    parser.add_argument("--dist", help="mixing-rate distribution, e.g. gaussian:0.1 (sets coupling.dist)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _policy_pairs(path: Path) -> list:
    from .coupling import PairingPolicy

    try:
        policy = PairingPolicy.load(path)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError("--policy", f"{path}: {exc}") from None
    # The config spells "every pair" as an empty list.
    return [] if policy.full_class else [list(p) for p in sorted(policy.pairs)]


def _threads() -> int:
    raw = os.environ.get("COMPOSE_MOTION_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("COMPOSE_MOTION_THREADS", f"expected an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("COMPOSE_MOTION_THREADS", "must be at least 1")
    return n


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if args.count is not None:
            overrides.append(f"coupling.count={args.count}")
        if args.dist is not None:
            overrides.append(f"coupling.dist={json.dumps(args.dist)}")
        if args.policy is not None:
            overrides.append(f"coupling.pairs={json.dumps(_policy_pairs(args.policy))}")
        cfg = RunConfig.load(args.config or bundled_config(), overrides)
        if args.out is not None:
            cfg = dataclasses.replace(cfg, output_dir=str(args.out))
        threads = _threads()
    except ConfigError as exc:
        print(json.dumps({"error": "config", "field": exc.path, "message": str(exc)}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "config", "field": "", "message": str(exc)}), file=sys.stderr)
        return 2

    import torch

    torch.set_num_threads(threads)
    run = Run(cfg, Path(cfg.output_dir))
    outputs = OUTPUTS[args.command]
    if run.done(args.command, outputs) and not args.force:
        print(f"{args.command}: up to date in {run.dir} (use --force to rerun)")
        return 0
    run.dir.mkdir(parents=True, exist_ok=True)
    (run.dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    try:
        written = COMMANDS[args.command](run)
        run.record(args.command, written + ["config.json"])
    except Exception as exc:  # reported, not swallowed: exit status carries it
        if args.verbose:
            log.exception("command failed")
        print(json.dumps({"error": "runtime", "module": args.command, "type": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return 1
    print(f"{args.command}: wrote {', '.join(written)} to {run.dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
