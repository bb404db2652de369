"""The classifier architecture and its per-method configurations.

One shared trunk across all methods: three 64-filter 3x3 convolution layers
(ReLU, batch norm, frequency max-pooling 8/8/2 squeezing 512 bins down to 4),
a flatten to a 256-dimensional frame sequence, two tanh-scaled bidirectional
GRUs (64 units per direction), then one or more fully connected branches,
each linear(G) -> linear(C) -> sigmoid emitting per-frame probabilities.

Method configurations fix the branch layout, the hidden width G and whether
the branches live in one network or in separate single-branch networks
(the *SepMod* variants train one model per plane).  Branch class columns
always align with the method's label scheme, so grids, losses and metrics
share one column order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .featex import CHUNK_FRAMES, FeatureStats, N_BINS, N_FEATURES
from .labelspace import LabelScheme, UnknownMethodError, get_scheme
from .neuralnet import (
    Adam,
    BatchNorm2d,
    BiGru,
    Checkpoint,
    Conv2d3x3,
    Linear,
    MaxPoolFreq,
    ReLU,
    Sigmoid,
    bce_loss,
)
from .neuralnet.layers import Workspace

CONV_WIDTHS = (64, 64, 64)
POOL_SCHEDULE = (8, 8, 2)
GRU_HIDDEN = 64
N_GRU_LAYERS = 2


@dataclass(frozen=True)
class HeadSpec:
    """One output branch: name and its column range in the label grid."""

    name: str
    lo: int
    hi: int

    @property
    def size(self) -> int:
        return self.hi - self.lo


@dataclass(frozen=True)
class MethodConfig:
    """Network layout of one classification method."""

    name: str
    scheme: LabelScheme
    hidden: int                    # G, branch hidden width
    heads: tuple[HeadSpec, ...]    # branch layout (of each network if split)
    split_models: bool             # one single-branch network per head

    @property
    def q(self) -> int:
        return len(self.heads)

    @property
    def c(self) -> int:
        return self.heads[0].size

    @property
    def n_classes(self) -> int:
        return self.scheme.n_classes

    @property
    def joint(self) -> bool:
        return self.scheme.joint


def _blocks_as_heads(scheme: LabelScheme) -> tuple[HeadSpec, ...]:
    return tuple(HeadSpec(name, lo, hi) for name, (lo, hi) in scheme.blocks)


def _single_head(scheme: LabelScheme) -> tuple[HeadSpec, ...]:
    return (HeadSpec("out", 0, scheme.n_classes),)


# G, split_models, and whether the network has one head spanning the whole
# grid (multi-task single-branch methods) or one head per scheme block.
_METHOD_TABLE = {
    "UneqOne": (128, False, "blocks"),
    "EqSepMod": (64, True, "blocks"),
    "EqSepBran": (64, False, "blocks"),
    "EqOne": (128, False, "blocks"),
    "UneqSingle": (128, False, "blocks"),
    "UneqMulti": (128, False, "single"),
    "EqSepMod-J": (64, True, "blocks"),
    "EqSepBran-J": (64, False, "blocks"),
    "EqOne-J": (128, False, "single"),
}


def get_method(name: str) -> MethodConfig:
    if name not in _METHOD_TABLE:
        raise UnknownMethodError(
            f"unknown method {name!r}; valid: {', '.join(_METHOD_TABLE)}"
        )
    scheme = get_scheme(name)
    hidden, split, head_kind = _METHOD_TABLE[name]
    heads = _blocks_as_heads(scheme) if head_kind == "blocks" else _single_head(scheme)
    return MethodConfig(name, scheme, hidden, heads, split)


METHOD_NAMES = tuple(_METHOD_TABLE)


class CrnnModel:
    """One network: shared trunk plus one or more output branches."""

    def __init__(self, head_sizes: list[tuple[str, int]], hidden: int,
                 rng: np.random.Generator, dtype=np.float64):
        self.head_sizes = list(head_sizes)
        self.hidden = hidden
        self.dtype = dtype
        self._ws = Workspace()
        self.convs = []
        in_ch = N_FEATURES
        for width, pool in zip(CONV_WIDTHS, POOL_SCHEDULE):
            self.convs.append((Conv2d3x3(in_ch, width, rng, dtype), ReLU(),
                               BatchNorm2d(width, dtype=dtype), MaxPoolFreq(pool)))
            in_ch = width
        bins = N_BINS
        for pool in POOL_SCHEDULE:
            bins //= pool
        self.seq_width = CONV_WIDTHS[-1] * bins
        self.grus = []
        d = self.seq_width
        for _ in range(N_GRU_LAYERS):
            self.grus.append(BiGru(d, GRU_HIDDEN, rng, dtype))
            d = 2 * GRU_HIDDEN
        self.heads = []
        for name, size in self.head_sizes:
            self.heads.append((name, Linear(d, hidden, rng, dtype),
                               Linear(hidden, size, rng, dtype), Sigmoid()))

    # -- structure ---------------------------------------------------------

    def params(self):
        out = []
        for conv, _, bn, _ in self.convs:
            out += conv.params() + bn.params()
        for gru in self.grus:
            out += gru.params()
        for _, lin1, lin2, _ in self.heads:
            out += lin1.params() + lin2.params()
        return out

    def named_arrays(self) -> dict[str, np.ndarray]:
        """All persistent arrays: trainable parameters and norm statistics."""
        out = {}
        for i, (conv, _, bn, _) in enumerate(self.convs):
            out[f"conv{i}.weight"] = conv.weight.data
            out[f"conv{i}.bias"] = conv.bias.data
            out[f"bn{i}.gamma"] = bn.gamma.data
            out[f"bn{i}.beta"] = bn.beta.data
            out[f"bn{i}.running_mean"] = bn.running_mean
            out[f"bn{i}.running_var"] = bn.running_var
        for i, gru in enumerate(self.grus):
            for tag, cell in (("fwd", gru.fwd), ("bwd", gru.bwd)):
                out[f"gru{i}.{tag}.wx"] = cell.wx.data
                out[f"gru{i}.{tag}.wh_zr"] = cell.wh_zr.data
                out[f"gru{i}.{tag}.wh_c"] = cell.wh_c.data
                out[f"gru{i}.{tag}.bias"] = cell.bias.data
        for name, lin1, lin2, _ in self.heads:
            out[f"head.{name}.hidden.weight"] = lin1.weight.data
            out[f"head.{name}.hidden.bias"] = lin1.bias.data
            out[f"head.{name}.out.weight"] = lin2.weight.data
            out[f"head.{name}.out.bias"] = lin2.bias.data
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        own = self.named_arrays()
        missing = set(own) - set(arrays)
        if missing:
            raise KeyError(f"checkpoint lacks arrays: {sorted(missing)}")
        for name, buf in own.items():
            src = np.asarray(arrays[name], dtype=buf.dtype)
            if src.shape != buf.shape:
                raise ValueError(f"{name}: shape {src.shape} != {buf.shape}")
            buf[...] = src

    @property
    def fingerprint(self) -> str:
        heads = ",".join(f"{n}:{s}" for n, s in self.head_sizes)
        spec = (f"crnn-v1|in={N_FEATURES}x{CHUNK_FRAMES}x{N_BINS}"
                f"|conv={','.join(map(str, CONV_WIDTHS))}"
                f"|pool={','.join(map(str, POOL_SCHEDULE))}"
                f"|gru={GRU_HIDDEN}x{N_GRU_LAYERS}|g={self.hidden}|heads={heads}")
        return spec + "|" + hashlib.sha256(spec.encode()).hexdigest()[:12]

    # -- compute -----------------------------------------------------------

    def forward(self, x: np.ndarray, training: bool = False) -> list[np.ndarray]:
        # container layout is (B, 4, T, F); the 2-D layers run channels-last
        b = x.shape[0]
        h = self._ws.get("x", (b, x.shape[2], x.shape[3], x.shape[1]), self.dtype)
        h[...] = np.asarray(x).transpose(0, 2, 3, 1)
        for conv, relu, bn, pool in self.convs:
            h = pool.forward(bn.forward(relu.forward(conv.forward(h, training), training),
                                        training), training)
        b, t, f, c = h.shape
        self._conv_shape = (b, t, f, c)
        seq = h.reshape(b, t, f * c)
        for gru in self.grus:
            seq = gru.forward(seq, training)
        outs = []
        for _, lin1, lin2, sig in self.heads:
            outs.append(sig.forward(lin2.forward(lin1.forward(seq, training), training), training))
        return outs

    def backward(self, grads: list[np.ndarray]) -> None:
        dseq = None
        for (name, lin1, lin2, sig), dy in zip(self.heads, grads):
            d = lin1.backward(lin2.backward(sig.backward(dy)))
            dseq = d if dseq is None else dseq + d
        for gru in reversed(self.grus):
            dseq = gru.backward(dseq)
        b, t, f, c = self._conv_shape
        dh = dseq.reshape(b, t, f, c)
        for conv, relu, bn, pool in reversed(self.convs):
            dh = conv.backward(relu.backward(bn.backward(pool.backward(dh))))


class MethodModel:
    """All networks of one method (one, or one per branch for *SepMod*)."""

    def __init__(self, config: MethodConfig, rng: np.random.Generator, dtype=np.float64):
        self.config = config
        self.dtype = dtype
        if config.split_models:
            self.nets = [CrnnModel([(h.name, h.size)], config.hidden, rng, dtype)
                         for h in config.heads]
            self._net_heads = [[h] for h in config.heads]
        else:
            self.nets = [CrnnModel([(h.name, h.size) for h in config.heads],
                                   config.hidden, rng, dtype)]
            self._net_heads = [list(config.heads)]

    @property
    def fingerprint(self) -> str:
        inner = ";".join(net.fingerprint for net in self.nets)
        return f"{self.config.name}|{inner}"

    def params(self):
        out = []
        for net in self.nets:
            out += net.params()
        return out

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for i, net in enumerate(self.nets):
            for k, v in net.named_arrays().items():
                out[f"net{i}.{k}"] = v
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for i, net in enumerate(self.nets):
            prefix = f"net{i}."
            net.load_arrays({k[len(prefix):]: v for k, v in arrays.items()
                             if k.startswith(prefix)})

    def forward(self, x: np.ndarray, training: bool = False) -> dict[str, np.ndarray]:
        outs = {}
        for net, heads in zip(self.nets, self._net_heads):
            for head, y in zip(heads, net.forward(x, training)):
                outs[head.name] = y
        return outs

    def train_batch(self, x: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
        """One forward/backward pass; returns the summed branch loss."""
        total = 0.0
        for net, heads in zip(self.nets, self._net_heads):
            outs = net.forward(x, training=True)
            grads = []
            for head, y in zip(heads, outs):
                target = labels[:, :, head.lo:head.hi].astype(self.dtype)
                loss, grad = bce_loss(y, target, mask, with_grad=True)
                total += loss
                grads.append(grad)
            net.backward(grads)
        return total

    def eval_loss(self, x: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
        total = 0.0
        for head, y in self.forward(x, training=False).items():
            spec = next(h for h in self.config.heads if h.name == head)
            target = labels[:, :, spec.lo:spec.hi].astype(self.dtype)
            total += bce_loss(y, target, mask)
        return total


@dataclass
class PredictionGrid:
    """Per-branch frame-level sigmoid outputs with binarized companion."""

    probabilities: dict[str, np.ndarray]  # head name -> (frames, C)
    threshold: float = 0.5

    @property
    def binary(self) -> dict[str, np.ndarray]:
        return {k: (v >= self.threshold).astype(np.uint8)
                for k, v in self.probabilities.items()}

    def concatenated(self) -> np.ndarray:
        return np.concatenate(list(self.probabilities.values()), axis=1)


@dataclass
class TrainSettings:
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    dtype: str = "float32"

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass
class FoldData:
    """In-memory training material of one fold split."""

    features: np.ndarray  # (n, 4, 128, 512) raw (unstandardized) float32
    labels: np.ndarray    # (n, 128, C_total) uint8
    valid: np.ndarray     # (n,) valid frame counts

    def masks(self) -> np.ndarray:
        m = np.zeros((len(self.valid), CHUNK_FRAMES), dtype=np.float32)
        for i, v in enumerate(self.valid):
            m[i, :v] = 1.0
        return m


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for lo in range(0, n, batch_size):
        yield order[lo:lo + batch_size]


def train_fold(config: MethodConfig, train: FoldData, val: FoldData | None,
               settings: TrainSettings, epoch_callback=None):
    """Train one method on one fold split.

    Feature statistics come from the training chunks only and are applied to
    both sides.  ``epoch_callback(epoch, model, stats, entry)`` runs after
    each epoch (entry holds the losses) and may return True to stop early.
    Returns (model, stats, history).
    """
    rng = np.random.default_rng(settings.seed)
    dtype = settings.np_dtype
    stats = FeatureStats.compute([train.features], [train.valid])
    x_train = stats.apply(train.features).astype(dtype)
    m_train = train.masks()
    x_val = m_val = None
    if val is not None and len(val.valid):
        x_val = stats.apply(val.features).astype(dtype)
        m_val = val.masks()

    model = MethodModel(config, rng, dtype)
    optimizers = [Adam(net.params(), lr=settings.lr) for net in model.nets]
    history = []
    for epoch in range(settings.epochs):
        epoch_loss = 0.0
        n_batches = 0
        for idx in _batches(len(x_train), settings.batch_size, rng):
            for opt in optimizers:
                opt.zero_grad()
            epoch_loss += model.train_batch(x_train[idx], train.labels[idx], m_train[idx])
            for opt in optimizers:
                opt.step()
            n_batches += 1
        entry = {"epoch": epoch, "train_loss": epoch_loss / max(1, n_batches)}
        if x_val is not None:
            val_loss = 0.0
            n_val = 0
            for lo in range(0, len(x_val), settings.batch_size):
                sl = slice(lo, lo + settings.batch_size)
                val_loss += model.eval_loss(x_val[sl], val.labels[sl], m_val[sl])
                n_val += 1
            entry["val_loss"] = val_loss / max(1, n_val)
        history.append(entry)
        if epoch_callback is not None and epoch_callback(epoch, model, stats, entry):
            break
    return model, stats, history


def model_checkpoint(model: MethodModel, stats: FeatureStats,
                     optimizers=None, extra: dict | None = None) -> Checkpoint:
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in model.named_arrays().items()}
    payload = {
        "method": model.config.name,
        "stats_mean": stats.mean.tolist(),
        "stats_std": stats.std.tolist(),
        "threshold": 0.5,
    }
    if extra:
        payload.update(extra)
    return Checkpoint(model.fingerprint, arrays, payload, None)


def model_from_checkpoint(ckpt: Checkpoint, dtype=np.float32):
    """Rebuild the method model and statistics stored in a checkpoint."""
    config = get_method(ckpt.extra["method"])
    model = MethodModel(config, np.random.default_rng(0), dtype)
    ckpt.require(model.fingerprint)
    model.load_arrays(ckpt.params)
    stats = FeatureStats(np.asarray(ckpt.extra["stats_mean"]),
                         np.asarray(ckpt.extra["stats_std"]))
    return model, stats


def predict(ckpt: Checkpoint, features: np.ndarray, valid: np.ndarray,
            batch_size: int = 16) -> PredictionGrid:
    """Frame-level probabilities of one recording's chunk stack.

    ``features`` is the raw (n_chunks, 4, 128, 512) stack; padded frames are
    dropped so each branch grid has exactly sum(valid) frames.
    """
    model, stats = model_from_checkpoint(ckpt)
    x = stats.apply(features).astype(model.dtype)
    parts: dict[str, list[np.ndarray]] = {h.name: [] for h in model.config.heads}
    for lo in range(0, len(x), batch_size):
        outs = model.forward(x[lo:lo + batch_size], training=False)
        for name, y in outs.items():
            for chunk, v in zip(y, valid[lo:lo + batch_size]):
                parts[name].append(chunk[:int(v)])
    return PredictionGrid({k: np.concatenate(v) if v else np.zeros((0, 1))
                           for k, v in parts.items()})
