"""Training loop for one class pair: two generators and two discriminators
updated with least-squares adversarial and L1 cycle losses."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..imaging import load_image
from ..manifest import DatasetManifest, ImageRecord
from .checkpoint import NET_FILES, TransferCheckpoint, batch_to_tensor, load_history, save_history
from .config import TransferConfig, lr_at
from .losses import adversarial_loss, cycle_loss
from .networks import (
    build_discriminator,
    build_generator,
    init_weights,
    load_parameters_numpy,
    named_parameters_numpy,
)
from .pool import ImagePool

log = logging.getLogger(__name__)

OPT_FILES = {"opt_g": "opt_g.npz", "opt_d_a": "opt_d_a.npz", "opt_d_b": "opt_d_b.npz"}
POOL_FILES = {"pool_a": "pool_a.npz", "pool_b": "pool_b.npz"}


class NonFiniteLossError(RuntimeError):
    pass


class TrainingError(ValueError):
    pass


@dataclass
class TrainState:
    cfg: TransferConfig
    g_ab: torch.nn.Module
    g_ba: torch.nn.Module
    d_a: torch.nn.Module
    d_b: torch.nn.Module
    opt_g: torch.optim.Optimizer
    opt_d_a: torch.optim.Optimizer
    opt_d_b: torch.optim.Optimizer
    pool_a: ImagePool
    pool_b: ImagePool
    data_rng: np.random.Generator
    epoch: int = 0
    history: list[dict] = field(default_factory=list)

    def checkpoint(self) -> TransferCheckpoint:
        return TransferCheckpoint(
            cfg=self.cfg, epoch=self.epoch, g_ab=self.g_ab, g_ba=self.g_ba,
            d_a=self.d_a, d_b=self.d_b, history=self.history,
        )


def init_state(cfg: TransferConfig) -> TrainState:
    torch.manual_seed(cfg.seed)
    g_ab = init_weights(build_generator(cfg.generator))
    g_ba = init_weights(build_generator(cfg.generator))
    d_a = init_weights(build_discriminator(cfg.discriminator))
    d_b = init_weights(build_discriminator(cfg.discriminator))
    opt_g = torch.optim.Adam(
        list(g_ab.parameters()) + list(g_ba.parameters()), lr=cfg.lr, betas=cfg.betas
    )
    opt_d_a = torch.optim.Adam(d_a.parameters(), lr=cfg.lr, betas=cfg.betas)
    opt_d_b = torch.optim.Adam(d_b.parameters(), lr=cfg.lr, betas=cfg.betas)
    return TrainState(
        cfg=cfg, g_ab=g_ab, g_ba=g_ba, d_a=d_a, d_b=d_b,
        opt_g=opt_g, opt_d_a=opt_d_a, opt_d_b=opt_d_b,
        pool_a=ImagePool(cfg.pool_capacity, np.random.default_rng([cfg.seed, 2])),
        pool_b=ImagePool(cfg.pool_capacity, np.random.default_rng([cfg.seed, 3])),
        data_rng=np.random.default_rng([cfg.seed, 1]),
    )


def _require_finite(value: torch.Tensor, name: str) -> float:
    v = float(value.detach())
    if not math.isfinite(v):
        raise NonFiniteLossError(f"{name} is not finite ({v})")
    return v


def train_step(state: TrainState, real_a: torch.Tensor, real_b: torch.Tensor) -> dict[str, float]:
    """One optimization step: generators on adversarial + cycle (+ identity)
    losses, then each discriminator on the mean of its real and pooled-fake
    adversarial terms. Returns every loss term as a finite float."""
    cfg = state.cfg

    state.opt_g.zero_grad()
    fake_b = state.g_ab(real_a)
    rec_a = state.g_ba(fake_b)
    fake_a = state.g_ba(real_b)
    rec_b = state.g_ab(fake_a)

    loss_g_adv_ab = adversarial_loss(state.d_b(fake_b), target_real=True)
    loss_g_adv_ba = adversarial_loss(state.d_a(fake_a), target_real=True)
    loss_cycle_a = cycle_loss(real_a, rec_a)
    loss_cycle_b = cycle_loss(real_b, rec_b)
    loss_g = loss_g_adv_ab + loss_g_adv_ba + cfg.lambda_cycle * (loss_cycle_a + loss_cycle_b)
    record = {
        "loss_G_adv_ab": _require_finite(loss_g_adv_ab, "loss_G_adv_ab"),
        "loss_G_adv_ba": _require_finite(loss_g_adv_ba, "loss_G_adv_ba"),
        "loss_cycle_a": _require_finite(loss_cycle_a, "loss_cycle_a"),
        "loss_cycle_b": _require_finite(loss_cycle_b, "loss_cycle_b"),
    }
    if cfg.lambda_identity > 0:
        loss_idt_a = cycle_loss(real_a, state.g_ba(real_a))
        loss_idt_b = cycle_loss(real_b, state.g_ab(real_b))
        loss_g = loss_g + cfg.lambda_identity * (loss_idt_a + loss_idt_b)
        record["loss_idt_a"] = _require_finite(loss_idt_a, "loss_idt_a")
        record["loss_idt_b"] = _require_finite(loss_idt_b, "loss_idt_b")
    loss_g.backward()
    state.opt_g.step()

    for name, disc, opt, pool, real, fake in (
        ("loss_D_a", state.d_a, state.opt_d_a, state.pool_a, real_a, fake_a),
        ("loss_D_b", state.d_b, state.opt_d_b, state.pool_b, real_b, fake_b),
    ):
        opt.zero_grad()
        pooled = pool.query(fake.detach())
        loss_d = 0.5 * (
            adversarial_loss(disc(real), target_real=True)
            + adversarial_loss(disc(pooled), target_real=False)
        )
        record[name] = _require_finite(loss_d, name)
        loss_d.backward()
        opt.step()

    return record


def _check_pair_records(manifest: DatasetManifest, expected_label, side: str) -> list[ImageRecord]:
    records = [r for r in manifest.records if r.split == "train"]
    bad = {r.class_label for r in records if r.class_label is not expected_label}
    if bad:
        names = ", ".join(sorted(c.name if c else "unlabeled" for c in bad))
        raise TrainingError(
            f"domain {side} manifest contains classes other than {expected_label.name}: {names}"
        )
    if not records:
        raise TrainingError(f"domain {side} has an empty training split")
    return sorted(records, key=lambda r: r.id)


def _epoch_orders(rng: np.random.Generator, n_a: int, n_b: int) -> tuple[np.ndarray, np.ndarray]:
    """Index orders for one epoch: the longer side is permuted, the shorter
    side re-sampled with replacement to the longer side's length."""
    n_max = max(n_a, n_b)
    order_a = rng.permutation(n_a) if n_a == n_max else rng.integers(0, n_a, size=n_max)
    order_b = rng.permutation(n_b) if n_b == n_max else rng.integers(0, n_b, size=n_max)
    return order_a, order_b


def _load_batch(records: list[ImageRecord], indices: np.ndarray, size: int) -> torch.Tensor:
    imgs = np.stack([load_image(records[int(i)].path, size=size) for i in indices])
    return batch_to_tensor(imgs)


def train_pair(
    cfg: TransferConfig,
    manifest_a: DatasetManifest,
    manifest_b: DatasetManifest,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
    stop_after_epoch: int | None = None,
) -> TransferCheckpoint:
    """Train the configured pair's translation model and checkpoint it to
    out_dir. Manifests must be filtered to the pair's classes; the training
    split of each side must be non-empty.

    stop_after_epoch bounds this invocation without changing the config;
    the saved state resumes exactly where it stopped (a resumed run matches
    an uninterrupted one bit for bit)."""
    out_dir = Path(out_dir)
    records_a = _check_pair_records(manifest_a, cfg.pair[0], "a")
    records_b = _check_pair_records(manifest_b, cfg.pair[1], "b")

    if resume_from is not None:
        state = load_train_state(resume_from)
        if state.cfg != cfg:
            raise TrainingError("resume config does not match the checkpoint's config")
    else:
        state = init_state(cfg)

    n_a, n_b = len(records_a), len(records_b)
    n_max = max(n_a, n_b)
    steps_per_epoch = math.ceil(n_max / cfg.batch_size)
    last_epoch = min(cfg.epochs, stop_after_epoch) if stop_after_epoch else cfg.epochs

    for epoch in range(state.epoch + 1, last_epoch + 1):
        lr = lr_at(epoch, cfg)
        for opt in (state.opt_g, state.opt_d_a, state.opt_d_b):
            for group in opt.param_groups:
                group["lr"] = lr

        order_a, order_b = _epoch_orders(state.data_rng, n_a, n_b)
        sums: dict[str, float] = {}
        for step in range(steps_per_epoch):
            lo, hi = step * cfg.batch_size, min((step + 1) * cfg.batch_size, n_max)
            batch_a = _load_batch(records_a, order_a[lo:hi], cfg.image_size)
            batch_b = _load_batch(records_b, order_b[lo:hi], cfg.image_size)
            losses = train_step(state, batch_a, batch_b)
            for k, v in losses.items():
                sums[k] = sums.get(k, 0.0) + v

        row = {k: sums[k] / steps_per_epoch for k in sums}
        row["epoch"] = epoch
        row["lr"] = lr
        state.history.append(row)
        state.epoch = epoch
        log.info(
            "pair %s/%s epoch %d/%d: cycle_a=%.4f cycle_b=%.4f d_a=%.4f d_b=%.4f lr=%.2e",
            cfg.pair[0].name, cfg.pair[1].name, epoch, cfg.epochs,
            row["loss_cycle_a"], row["loss_cycle_b"], row["loss_D_a"], row["loss_D_b"], lr,
        )

        if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0 and epoch < last_epoch:
            save_train_state(state, out_dir)

    save_train_state(state, out_dir)
    return state.checkpoint()


# ---------- resumable persistence ----------


def _optimizer_arrays(opt: torch.optim.Optimizer) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for idx, st in opt.state_dict()["state"].items():
        for key, val in st.items():
            arr = val.detach().cpu().numpy() if isinstance(val, torch.Tensor) else np.asarray(val)
            arrays[f"{idx}.{key}"] = arr
    return arrays


def _load_optimizer_arrays(opt: torch.optim.Optimizer, arrays: dict[str, np.ndarray]) -> None:
    state: dict[int, dict] = {}
    for name, arr in arrays.items():
        idx_s, key = name.split(".", 1)
        state.setdefault(int(idx_s), {})[key] = torch.from_numpy(np.asarray(arr).copy())
    sd = opt.state_dict()
    sd["state"] = state
    opt.load_state_dict(sd)


def save_train_state(state: TrainState, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    extras = {
        "data_rng": state.data_rng.bit_generator.state,
        "pool_rng_a": state.pool_a.rng.bit_generator.state,
        "pool_rng_b": state.pool_b.rng.bit_generator.state,
        "pool_capacity": state.cfg.pool_capacity,
    }
    state.checkpoint().save(out_dir, extras=extras)
    for attr, fname in OPT_FILES.items():
        np.savez(out_dir / fname, **_optimizer_arrays(getattr(state, attr)))
    for attr, fname in POOL_FILES.items():
        pool: ImagePool = getattr(state, attr)
        np.savez(out_dir / fname, *[im.squeeze(0).numpy() for im in pool.images])
    torch_rng = torch.get_rng_state().numpy()
    np.savez(out_dir / "rng.npz", torch_rng=torch_rng)
    return out_dir


def load_train_state(ckpt_dir: str | Path) -> TrainState:
    ckpt_dir = Path(ckpt_dir)
    meta = json.loads((ckpt_dir / "config.json").read_text(encoding="utf-8"))
    cfg = TransferConfig.from_dict(meta["config"])

    nets = {}
    for attr, fname in NET_FILES.items():
        builder = build_generator if attr.startswith("g") else build_discriminator
        spec = cfg.generator if attr.startswith("g") else cfg.discriminator
        net = builder(spec)
        with np.load(ckpt_dir / fname) as data:
            load_parameters_numpy(net, dict(data))
        nets[attr] = net

    opt_g = torch.optim.Adam(
        list(nets["g_ab"].parameters()) + list(nets["g_ba"].parameters()), lr=cfg.lr, betas=cfg.betas
    )
    opt_d_a = torch.optim.Adam(nets["d_a"].parameters(), lr=cfg.lr, betas=cfg.betas)
    opt_d_b = torch.optim.Adam(nets["d_b"].parameters(), lr=cfg.lr, betas=cfg.betas)
    opts = {"opt_g": opt_g, "opt_d_a": opt_d_a, "opt_d_b": opt_d_b}
    for attr, fname in OPT_FILES.items():
        with np.load(ckpt_dir / fname) as data:
            _load_optimizer_arrays(opts[attr], dict(data))

    pools = {}
    for attr, fname in POOL_FILES.items():
        pool = ImagePool(capacity=meta["pool_capacity"])
        with np.load(ckpt_dir / fname) as data:
            pool.images = [torch.from_numpy(data[k]).unsqueeze(0) for k in sorted(data.files, key=lambda s: int(s.split("_")[1]))]
        pool.rng.bit_generator.state = meta[f"pool_rng_{attr[-1]}"]
        pools[attr] = pool

    data_rng = np.random.default_rng()
    data_rng.bit_generator.state = meta["data_rng"]

    with np.load(ckpt_dir / "rng.npz") as data:
        torch.set_rng_state(torch.from_numpy(data["torch_rng"]))

    history = load_history(ckpt_dir / "history.csv")
    return TrainState(
        cfg=cfg, epoch=meta["epoch"], history=history, data_rng=data_rng,
        **nets, **opts, **pools,
    )
