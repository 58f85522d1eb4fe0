"""WBANet assembly: patch embedding, N residual wavelet/aggregation blocks,
average-pool classifier head, Adam training on pseudo-labels, and per-pixel
change-map prediction with a binary checkpoint format."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .bam import BamParams, bam_forward, init_bam_params
from .errors import ConfigError, FormatError
from .preclass import Label, LabelMap, PatchBatch, sample_patches
from .tensor import Adam, Tensor, no_grad
from .wsm import WsmParams, init_wsm_params, wave_attention

# Paper presets: best block count per evaluated dataset.
BLOCK_PRESETS = {"chao_lake": 5, "sulzberger": 2, "yellow_river": 4}

PROVENANCE_PSEUDO = 0
PROVENANCE_NETWORK = 1


@dataclass
class ModelConfig:
    patch_size: int = 8
    embed_dim: int = 32
    n_heads: int = 4
    n_blocks: int = 2
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0
    n_per_class: int = 1000

    def __post_init__(self):
        if self.patch_size % 2:
            raise ConfigError(f"patch_size must be even, got {self.patch_size}")
        if self.embed_dim % 4:
            raise ConfigError(f"embed_dim must be divisible by 4, got {self.embed_dim}")
        if self.embed_dim % self.n_heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by "
                              f"n_heads {self.n_heads}")
        if not 1 <= self.n_blocks <= 8:
            raise ConfigError(f"n_blocks must be in [1, 8], got {self.n_blocks}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "patch_size", "embed_dim", "n_heads", "n_blocks", "lr",
            "epochs", "batch_size", "seed", "n_per_class")}


@dataclass
class WbaBlockParams:
    wsm: WsmParams
    bam: BamParams


@dataclass
class ModelParams:
    w_embed: Tensor
    blocks: list[WbaBlockParams]
    w_head: Tensor
    b_head: Tensor

    def named(self) -> list[tuple[str, Tensor]]:
        out = [("w_embed", self.w_embed)]
        for i, blk in enumerate(self.blocks):
            out += [(f"blocks.{i}.wsm.w_d", blk.wsm.w_d),
                    (f"blocks.{i}.wsm.w_q", blk.wsm.w_q),
                    (f"blocks.{i}.wsm.kv_conv", blk.wsm.kv_conv),
                    (f"blocks.{i}.wsm.w_o", blk.wsm.w_o),
                    (f"blocks.{i}.bam.fc_c1", blk.bam.fc_c1),
                    (f"blocks.{i}.bam.fc_c2", blk.bam.fc_c2),
                    (f"blocks.{i}.bam.fc_s1", blk.bam.fc_s1),
                    (f"blocks.{i}.bam.fc_s2", blk.bam.fc_s2)]
        out += [("w_head", self.w_head), ("b_head", self.b_head)]
        return out

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]


def init_params(cfg: ModelConfig, rng: np.random.Generator | None = None) -> ModelParams:
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    c = cfg.embed_dim
    blocks = [WbaBlockParams(init_wsm_params(c, cfg.n_heads, rng),
                             init_bam_params(c, rng))
              for _ in range(cfg.n_blocks)]
    bound = 1.0 / np.sqrt(2.0)
    w_embed = T.uniform((2, c), -bound, bound, rng, requires_grad=True)
    hb = 1.0 / np.sqrt(c)
    w_head = T.uniform((c, 2), -hb, hb, rng, requires_grad=True)
    b_head = T.zeros((2,), requires_grad=True)
    return ModelParams(w_embed, blocks, w_head, b_head)


def embed(patch: Tensor, w_e: Tensor) -> Tensor:
    """Per-pixel linear lift of the two temporal channels to the embed dim."""
    return T.linear(patch, w_e)


def block_forward(x: Tensor, blk: WbaBlockParams) -> Tensor:
    """Residual wiring: x + attention, then + aggregation gate output."""
    x1 = T.add(x, wave_attention(x, blk.wsm))
    return T.add(x1, bam_forward(x1, blk.bam))


def forward(patches, params: ModelParams) -> Tensor:
    """(n, P, P, 2) patches -> (n, 2) logits."""
    x = patches if isinstance(patches, Tensor) else Tensor(patches)
    x = embed(x, params.w_embed)
    for blk in params.blocks:
        x = block_forward(x, blk)
    pooled = T.reshape(T.global_avg_pool(x), (x.shape[0], x.shape[-1]))
    return T.linear(pooled, params.w_head, params.b_head)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy over two classes; softmax lives inside here."""
    n = logits.shape[0]
    onehot = np.zeros(logits.shape)
    onehot[np.arange(n), np.asarray(labels, dtype=np.int64)] = 1.0
    picked = T.tsum(T.mul(T.log_softmax_rows(logits), Tensor(onehot)))
    return T.scale(picked, -1.0 / n)


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)


def train(i1: np.ndarray, i2: np.ndarray, labels: LabelMap,
          cfg: ModelConfig) -> tuple[ModelParams, TrainHistory]:
    batch = sample_patches(i1, i2, labels, p=cfg.patch_size,
                           n_per_class=cfg.n_per_class, seed=cfg.seed)
    return train_on_batch(batch, cfg)


def train_on_batch(batch: PatchBatch, cfg: ModelConfig) -> tuple[ModelParams, TrainHistory]:
    rng = np.random.default_rng(cfg.seed + 1)
    params = init_params(cfg, np.random.default_rng(cfg.seed))
    opt = Adam(params.tensors(), lr=cfg.lr)
    history = TrainHistory()
    n = batch.patches.shape[0]
    for _epoch in range(cfg.epochs):
        order = rng.permutation(n)
        ep_loss, ep_correct = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits = forward(batch.patches[idx], params)
            loss = cross_entropy(logits, batch.labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            ep_loss += loss.item() * idx.size
            ep_correct += int((logits.data.argmax(axis=1) == batch.labels[idx]).sum())
        history.loss.append(ep_loss / n)
        history.accuracy.append(ep_correct / n)
    return params, history


@dataclass
class ChangeMap:
    values: np.ndarray       # (H, W) binary {0, 1}
    provenance: np.ndarray   # (H, W): PROVENANCE_PSEUDO or PROVENANCE_NETWORK


def predict_map(i1: np.ndarray, i2: np.ndarray, labels: LabelMap,
                params: ModelParams, cfg: ModelConfig,
                infer_batch: int = 256) -> ChangeMap:
    """Confident pseudo-labels pass through; only intermediate pixels are
    resolved by the network, in batches."""
    i1 = np.asarray(i1, dtype=np.float64)
    i2 = np.asarray(i2, dtype=np.float64)
    values = (labels.labels == int(Label.CHANGED)).astype(np.uint8)
    provenance = np.full(values.shape, PROVENANCE_PSEUDO, dtype=np.int8)

    rows, cols = np.nonzero(labels.mask(Label.INTERMEDIATE))
    if rows.size:
        p = cfg.patch_size
        half = p // 2
        pad1 = np.pad(i1, half, mode="reflect")
        pad2 = np.pad(i2, half, mode="reflect")
        with no_grad():
            for start in range(0, rows.size, infer_batch):
                r = rows[start:start + infer_batch]
                c = cols[start:start + infer_batch]
                patches = np.empty((r.size, p, p, 2))
                for j in range(r.size):
                    patches[j, :, :, 0] = pad1[r[j]:r[j] + p, c[j]:c[j] + p]
                    patches[j, :, :, 1] = pad2[r[j]:r[j] + p, c[j]:c[j] + p]
                logits = forward(patches, params)
                values[r, c] = logits.data.argmax(axis=1).astype(np.uint8)
        provenance[rows, cols] = PROVENANCE_NETWORK
    return ChangeMap(values, provenance)


# ---------------------------------------------------------------------------
# checkpoint format: magic "WBAN", version u32, length-prefixed JSON config,
# then per tensor (u32 name length, name, u32 rank, u32 extents, f64 LE data).

_MAGIC = b"WBAN"
_VERSION = 1


def save_checkpoint(path, params: ModelParams, cfg: ModelConfig):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        blob = json.dumps(cfg.to_dict(), sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        named = params.named()
        fh.write(struct.pack("<I", len(named)))
        for name, t in named:
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", t.ndim))
            fh.write(struct.pack(f"<{t.ndim}I", *t.shape))
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelParams, ModelConfig]:
    with open(path, "rb") as fh:
        raw = fh.read()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(raw):
            raise FormatError("truncated checkpoint", offset=pos)
        chunk = raw[pos:pos + n]
        pos += n
        return chunk

    if take(4) != _MAGIC:
        raise FormatError("bad checkpoint magic", offset=0)
    (version,) = struct.unpack("<I", take(4))
    if version != _VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    (cfg_len,) = struct.unpack("<I", take(4))
    cfg = ModelConfig(**json.loads(take(cfg_len).decode("utf-8")))
    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, Tensor] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        n_vals = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(take(8 * n_vals), dtype="<f8").reshape(shape)
        tensors[name] = Tensor(data.copy(), requires_grad=True)

    blocks = []
    for i in range(cfg.n_blocks):
        pre = f"blocks.{i}"
        blocks.append(WbaBlockParams(
            wsm=WsmParams(tensors[f"{pre}.wsm.w_d"], tensors[f"{pre}.wsm.w_q"],
                          tensors[f"{pre}.wsm.kv_conv"], tensors[f"{pre}.wsm.w_o"],
                          n_heads=cfg.n_heads),
            bam=BamParams(tensors[f"{pre}.bam.fc_c1"], tensors[f"{pre}.bam.fc_c2"],
                          tensors[f"{pre}.bam.fc_s1"], tensors[f"{pre}.bam.fc_s2"]),
        ))
    params = ModelParams(tensors["w_embed"], blocks,
                         tensors["w_head"], tensors["b_head"])
    return params, cfg
