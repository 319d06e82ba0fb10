"""Fully connected GAN and 1-D DCGAN builders, training loop and sampling."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

from .neural import (AdamState, BatchNorm1d, Conv1d, ConvTranspose1d, Dense, Flatten,
                     LeakyReLU, Network, ReLU, Reshape, Sigmoid, Tanh, adam_step, bce_loss,
                     init_params, read_network, save_network)
from .spectra import Grade, LabeledDataset, format_float

LATENT_DIM = 100
HIDDEN = 1024
LEAKY_SLOPE = 0.2
DCGAN_CHANNELS = (32, 16, 8, 4, 1)


class Variant(enum.Enum):
    FULLY_CONNECTED = "gan"
    DEEP = "dcgan"


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, d_loss, g_loss):
        super().__init__(f"non-finite loss at epoch {epoch} (d={d_loss}, g={g_loss})")
        self.epoch = epoch


@dataclass
class GanPair:
    generator: Network
    discriminator: Network
    latent_dim: int
    variant: Variant
    gen_adam: AdamState = None
    disc_adam: AdamState = None
    grade: Grade | None = None
    scale: float = 1.0
    offset: float = 0.0
    seed: int = 0

    def __post_init__(self):
        dim = self.generator.output_shape
        if self.discriminator.input_shape != dim:
            raise ValueError(f"generator emits {dim}, discriminator takes "
                             f"{self.discriminator.input_shape}")
        self.reset_optimizers()

    @property
    def dim(self) -> int:
        return int(np.prod(self.generator.output_shape))

    def reset_optimizers(self, lr=2e-4, beta1=0.5, beta2=0.999):
        self.gen_adam = AdamState([p for p, _ in self.generator.parameters()], lr, beta1, beta2)
        self.disc_adam = AdamState([p for p, _ in self.discriminator.parameters()], lr, beta1, beta2)


def _initialized(gan, seed):
    g_seed, d_seed = np.random.SeedSequence(seed).generate_state(2)
    init_params(gan.generator, int(g_seed))
    init_params(gan.discriminator, int(d_seed))
    gan.seed = seed
    return gan


def build_gan(dim: int = 1024, latent_dim: int = LATENT_DIM, hidden: int = HIDDEN,
              seed: int = 0) -> GanPair:
    if dim < 8:
        raise ValueError("dim must be >= 8")
    gen = Network([Dense(latent_dim, hidden), ReLU(), Dense(hidden, dim), Tanh()], (latent_dim,))
    disc = Network([Dense(dim, hidden), LeakyReLU(LEAKY_SLOPE), Dense(hidden, 1), Sigmoid()], (dim,))
    return _initialized(GanPair(gen, disc, latent_dim, Variant.FULLY_CONNECTED), seed)


def build_dcgan(dim: int = 1024, latent_dim: int = LATENT_DIM, seed: int = 0) -> GanPair:
    """Dense head into 32 channels of length dim/16, then four stride-2 stages."""
    if dim % 16:
        raise ValueError(f"dim={dim} is not divisible by 16")
    start = dim // 16
    ch = DCGAN_CHANNELS
    g_layers = [Dense(latent_dim, ch[0] * start), Reshape(ch[0], start)]
    for i in range(4):
        g_layers.append(ConvTranspose1d(ch[i], ch[i + 1], 4, 2, 1))
        if i < 3:
            g_layers += [BatchNorm1d(ch[i + 1]), LeakyReLU(LEAKY_SLOPE)]
        else:
            g_layers.append(Tanh())
    d_layers = [Reshape(1, dim)]
    rev = ch[::-1]
    for i in range(4):
        d_layers += [Conv1d(rev[i], rev[i + 1], 4, 2, 1), LeakyReLU(LEAKY_SLOPE)]
    d_layers += [Flatten(), Dense(ch[0] * start, 1), Sigmoid()]
    g_layers.append(Reshape(dim))
    gen = Network(g_layers, (latent_dim,))
    disc = Network(d_layers, (dim,))
    return _initialized(GanPair(gen, disc, latent_dim, Variant.DEEP), seed)


def generator_lengths(gan: GanPair) -> list:
    """Spatial length after the head reshape and after every transposed-conv stage."""
    shape, out = gan.generator.input_shape, []
    for layer in gan.generator.layers:
        shape = layer.output_shape(shape)
        if layer.kind in ("reshape", "convt1d") and len(shape) == 2:
            out.append(shape[1])
    return out


def train_step(gan: GanPair, real_batch, rng, epoch=None, train_discriminator=True):
    """One discriminator update then one non-saturating generator update."""
    real_batch = np.asarray(real_batch, dtype=np.float64)
    B = len(real_batch)
    G, D = gan.generator, gan.discriminator

    d_loss = 0.0
    if train_discriminator:
        z = rng.standard_normal((B, gan.latent_dim))
        fake = G.forward(z, training=True)
        D.zero_grad()
        p_real = D.forward(real_batch)
        loss_real, grad = bce_loss(p_real, 1.0)
        D.backward(grad)
        p_fake = D.forward(fake)
        loss_fake, grad = bce_loss(p_fake, 0.0)
        D.backward(grad)
        adam_step([p for p, _ in D.parameters()], [g for _, g in D.parameters()], gan.disc_adam)
        d_loss = loss_real + loss_fake

    z = rng.standard_normal((B, gan.latent_dim))
    G.zero_grad()
    fake = G.forward(z, training=True)
    p = D.forward(fake, training=True)
    g_loss, grad = bce_loss(p, 1.0)
    G.backward(D.backward(grad))
    D.zero_grad()
    adam_step([p for p, _ in G.parameters()], [g for _, g in G.parameters()], gan.gen_adam)

    if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
        raise TrainingDiverged(epoch, d_loss, g_loss)
    return d_loss, g_loss


@dataclass(frozen=True)
class TrainConfig:
    """``batch_size=None`` means every step sees the full class."""

    epochs: int = 2000
    batch_size: int | None = 32
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    snapshot_every: int = 100

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


# Values used in the clinical study; far beyond desk scale.
PAPER_GAN_EPOCHS = 150_000
PAPER_DCGAN_EPOCHS = 250_000


@dataclass
class TrainingReport:
    epochs: list = field(default_factory=list)
    d_losses: list = field(default_factory=list)
    g_losses: list = field(default_factory=list)
    steps: int = 0


def fit_scaling(spectra) -> tuple:
    """Class-wide affine map of the spectra onto [-1, 1] as ``(scale, offset)``."""
    lo, hi = float(np.min(spectra)), float(np.max(spectra))
    if hi == lo:
        raise ValueError("constant training data")
    scale = 2.0 / (hi - lo)
    return scale, -1.0 - lo * scale


def train(gan: GanPair, class_data: LabeledDataset, config: TrainConfig) -> TrainingReport:
    """Train on a single-grade slice; one epoch is one pass over the slice."""
    grades = set(class_data.labels)
    if len(grades) != 1:
        raise ValueError(f"training data must hold exactly one grade, found {len(grades)}")
    n = len(class_data)
    if gan.variant is Variant.DEEP and config.batch_size not in (None, n):
        raise ValueError("the convolutional variant trains on the full class every epoch; "
                         f"batch_size={config.batch_size} is not allowed")
    if class_data.dim != gan.dim:
        raise ValueError(f"data dim {class_data.dim} != model dim {gan.dim}")

    ss = np.random.SeedSequence(config.seed)
    g_seed, d_seed, loop_seed = ss.generate_state(3)
    init_params(gan.generator, int(g_seed))
    init_params(gan.discriminator, int(d_seed))
    gan.reset_optimizers(config.lr, config.beta1, config.beta2)
    gan.grade = next(iter(grades))
    gan.scale, gan.offset = fit_scaling(class_data.spectra)
    gan.seed = config.seed
    data = class_data.spectra * gan.scale + gan.offset
    rng = np.random.default_rng(loop_seed)

    batch = n if config.batch_size is None else min(config.batch_size, n)
    report = TrainingReport()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if batch < n else np.arange(n)
        for start in range(0, n, batch):
            d_loss, g_loss = train_step(gan, data[order[start:start + batch]], rng, epoch)
            report.steps += 1
        if epoch % config.snapshot_every == 0 or epoch == config.epochs:
            report.epochs.append(epoch)
            report.d_losses.append(d_loss)
            report.g_losses.append(g_loss)
    return report


def sample_normalized(gan: GanPair, n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, gan.latent_dim))
    out = gan.generator.forward(z, training=False)
    return out.reshape(n, -1)


def generate(gan: GanPair, n: int, seed: int, scale=None, offset=None, grade=None) -> LabeledDataset:
    """Draw ``n`` spectra and map them back to the training amplitude scale."""
    scale = gan.scale if scale is None else scale
    offset = gan.offset if offset is None else offset
    grade = gan.grade if grade is None else grade
    if grade is None:
        raise ValueError("no grade: train the model first or pass grade=")
    out = (sample_normalized(gan, n, seed) - offset) / scale
    return LabeledDataset(out, [grade] * n, gan.variant.value)


# ---------------------------------------------------------------------------
# snapshots: manifest + one SFNET1 file per network

MANIFEST_MAGIC = "SFGAN1"


def save_gan(gan: GanPair, path) -> None:
    path = os.fspath(path)
    gen_file, disc_file = path + ".generator.sfnet", path + ".discriminator.sfnet"
    save_network(gan.generator, gen_file)
    save_network(gan.discriminator, disc_file)
    lines = [
        MANIFEST_MAGIC,
        f"variant={gan.variant.value}",
        f"grade={gan.grade.token if gan.grade is not None else ''}",
        f"latent_dim={gan.latent_dim}",
        f"seed={gan.seed}",
        f"scale={format_float(gan.scale)}",
        f"offset={format_float(gan.offset)}",
        f"generator={os.path.basename(gen_file)}",
        f"discriminator={os.path.basename(disc_file)}",
    ]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gan(path) -> GanPair:
    path = os.fspath(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MANIFEST_MAGIC:
        raise ValueError(f"{path}: not a {MANIFEST_MAGIC} manifest")
    meta = dict(line.split("=", 1) for line in lines[1:] if line)
    base = os.path.dirname(path)
    gan = GanPair(read_network(os.path.join(base, meta["generator"])),
                  read_network(os.path.join(base, meta["discriminator"])),
                  int(meta["latent_dim"]), Variant(meta["variant"]))
    gan.grade = Grade.parse(meta["grade"]) if meta.get("grade") else None
    gan.seed = int(meta["seed"])
    gan.scale, gan.offset = float(meta["scale"]), float(meta["offset"])
    return gan
