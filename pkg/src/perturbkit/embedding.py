"""Frozen joint image/text embedding space and the vector math built on it.

The desk-scale stand-in for a large pretrained dual encoder is a small
convolutional image encoder paired with a token-averaging text encoder,
trained briefly with an image/class-text contrastive objective and then
frozen. Both encoders emit L2-normalized features in a shared space so
cosine similarity is meaningful across modalities.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .artifacts import load_container, save_container
from .errors import ConfigError, ContractViolation, DegenerateInputError

logger = logging.getLogger(__name__)

NORM_TOL = 1e-6

# Shared word list so heuristic prompt templates always tokenize; words not
# covered here or by the dataset class names fall into hashed OOV buckets.
TEMPLATE_WORDS = (
    "a", "an", "the", "of", "in", "on",
    "photo", "picture", "image", "sketch", "painting", "drawing",
    "style", "shape", "pattern", "rendering",
)


def l2_normalize(v: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """Scale a vector (or each row of a batch) to unit Euclidean norm."""
    norms = torch.linalg.vector_norm(v, dim=dim, keepdim=True)
    if not torch.isfinite(v).all():
        raise DegenerateInputError("non-finite entries in vector to normalize")
    if (norms == 0).any():
        raise DegenerateInputError(
            "zero vector cannot be normalized (encoder or data fault)"
        )
    return v / norms


def cosine_sim(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Standard cosine similarity; row-wise when given 2-D batches."""
    na = torch.linalg.vector_norm(a, dim=-1)
    nb = torch.linalg.vector_norm(b, dim=-1)
    if (na == 0).any() or (nb == 0).any():
        raise DegenerateInputError("cosine similarity undefined for zero vectors")
    return (a * b).sum(dim=-1) / (na * nb)


@dataclass(frozen=True)
class FeatureBatch:
    """Dense n x d feature matrix with an explicit normalization flag."""

    vectors: torch.Tensor
    normalized: bool = False

    def __post_init__(self):
        if self.vectors.dim() == 1:
            object.__setattr__(self, "vectors", self.vectors.unsqueeze(0))
        if not torch.isfinite(self.vectors).all():
            raise ContractViolation("FeatureBatch contains NaN/Inf entries")
        if self.normalized:
            norms = torch.linalg.vector_norm(self.vectors, dim=1)
            if not torch.all((norms - 1.0).abs() <= 1e-4):
                raise ContractViolation(
                    "FeatureBatch flagged normalized but rows are not unit norm"
                )

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def as_unit_rows(features, name: str = "features") -> torch.Tensor:
    """Extract a tensor of unit-norm rows, rejecting unnormalized input."""
    t = features.vectors if isinstance(features, FeatureBatch) else features
    if t.dim() == 1:
        t = t.unsqueeze(0)
    norms = torch.linalg.vector_norm(t, dim=1)
    if not torch.all((norms - 1.0).abs() <= 1e-4):
        raise ContractViolation(f"{name} must be L2-normalized (row norm 1 +/- tol)")
    return t


def zero_shot_probs(image_features, class_text_features, logit_temperature: float) -> torch.Tensor:
    """Class probabilities from cosine similarities: softmax(cos / temperature).

    Rows are the image samples, columns the K classes; each row sums to 1.
    """
    if logit_temperature <= 0:
        raise ConfigError(f"logit temperature must be positive, got {logit_temperature}")
    phi = as_unit_rows(image_features, "image features")
    tau = as_unit_rows(class_text_features, "class text features")
    if tau.shape[0] < 2:
        raise ConfigError("zero-shot prediction needs at least 2 classes")
    logits = (phi @ tau.T) / logit_temperature
    return torch.softmax(logits, dim=1)


@dataclass(frozen=True)
class EmbeddingModel:
    """Identity + callables of a frozen joint embedding model.

    ``image_encoder`` maps an image batch to a normalized FeatureBatch;
    ``text_encoder`` maps a sequence of prompt token matrices to the same.
    """

    name: str
    embed_dim: int
    logit_temperature: float
    image_encoder: Callable[[torch.Tensor], FeatureBatch]
    text_encoder: Callable[[Sequence], FeatureBatch]

    @property
    def identity(self) -> str:
        return f"{self.name}/d{self.embed_dim}/temp{self.logit_temperature:.6g}"


class ImageEncoderNet(nn.Module):
    """Small convolutional encoder: 32x32x3 -> embed_dim."""

    def __init__(self, embed_dim: int, in_channels: int = 3):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(in_channels, 32, 3, padding=1),
            nn.BatchNorm2d(32),
            nn.ReLU(inplace=True),
            nn.Conv2d(32, 32, 3, stride=2, padding=1),
            nn.BatchNorm2d(32),
            nn.ReLU(inplace=True),
            nn.Conv2d(32, 64, 3, padding=1),
            nn.BatchNorm2d(64),
            nn.ReLU(inplace=True),
            nn.Conv2d(64, 64, 3, stride=2, padding=1),
            nn.BatchNorm2d(64),
            nn.ReLU(inplace=True),
        )
        self.head = nn.Linear(64, embed_dim)

    def forward(self, x):
        h = self.features(x)
        h = h.mean(dim=(2, 3))
        return self.head(h)


class TextEncoderNet(nn.Module):
    """Token-averaging text encoder over a fixed word vocabulary.

    Prompts are sequences of d-dim token vectors; learnable context vectors
    can be spliced in front of the frozen class-name token rows, so the
    encoder consumes raw token matrices rather than token ids.
    """

    def __init__(self, vocab_words: Sequence[str], embed_dim: int,
                 oov_buckets: int = 8, max_seq_len: int = 32):
        super().__init__()
        self.vocab_words = list(dict.fromkeys(w.lower() for w in vocab_words))
        self.word_index = {w: i for i, w in enumerate(self.vocab_words)}
        self.oov_buckets = oov_buckets
        self.max_seq_len = max_seq_len
        self.token_table = nn.Embedding(len(self.vocab_words) + oov_buckets, embed_dim)
        self.mlp = nn.Sequential(
            nn.Linear(embed_dim, 2 * embed_dim),
            nn.Tanh(),
            nn.Linear(2 * embed_dim, embed_dim),
        )

    @property
    def embed_dim(self) -> int:
        return self.token_table.embedding_dim

    def tokenize(self, text: str) -> list[int]:
        words = [w for w in "".join(
            c if c.isalnum() else " " for c in text.lower()).split() if w]
        if not words:
            raise ConfigError(f"text {text!r} has no tokenizable words")
        ids = []
        for w in words:
            if w in self.word_index:
                ids.append(self.word_index[w])
            else:
                # crc32 keeps OOV bucketing stable across processes
                bucket = zlib.crc32(w.encode()) % self.oov_buckets
                ids.append(len(self.vocab_words) + bucket)
        if len(ids) > self.max_seq_len:
            raise ConfigError(
                f"text {text!r} tokenizes to {len(ids)} tokens, over the "
                f"encoder limit of {self.max_seq_len}"
            )
        return ids

    def token_rows(self, text: str) -> torch.Tensor:
        ids = torch.tensor(self.tokenize(text), dtype=torch.long)
        return self.token_table(ids)

    def encode_sequences(self, sequences: Sequence[torch.Tensor]) -> torch.Tensor:
        """Mean-pool each (L, d) token matrix, then project. Returns (n, d)."""
        pooled = []
        for seq in sequences:
            if seq.dim() != 2 or seq.shape[1] != self.embed_dim:
                raise ConfigError(
                    f"prompt token matrix must be (L, {self.embed_dim}), got {tuple(seq.shape)}"
                )
            if seq.shape[0] > self.max_seq_len:
                raise ConfigError(
                    f"prompt length {seq.shape[0]} exceeds encoder limit {self.max_seq_len}"
                )
            pooled.append(seq.mean(dim=0))
        return self.mlp(torch.stack(pooled))


class JointEmbeddingModel(nn.Module):
    """Trainable (then frozen) pair of encoders sharing one embedding space."""

    def __init__(self, class_names: Sequence[str], embed_dim: int = 64,
                 name: str = "toy-dual-encoder", max_seq_len: int = 32):
        super().__init__()
        words = list(TEMPLATE_WORDS)
        for cname in class_names:
            words.extend(
                w for w in "".join(c if c.isalnum() else " " for c in cname.lower()).split()
            )
        self.name = name
        self.class_names = list(class_names)
        self.image_net = ImageEncoderNet(embed_dim)
        self.text_net = TextEncoderNet(words, embed_dim, max_seq_len=max_seq_len)
        # exp(logit_scale) multiplies cosines; init 1/0.07, capped at 100
        self.logit_scale = nn.Parameter(torch.tensor(2.6593))
        self.frozen = False

    @property
    def embed_dim(self) -> int:
        return self.text_net.embed_dim

    @property
    def logit_temperature(self) -> float:
        return float(1.0 / self.logit_scale.detach().exp().clamp(max=100.0))

    def encode_images(self, images: torch.Tensor) -> FeatureBatch:
        raw = self.image_net(images)
        return FeatureBatch(l2_normalize(raw, dim=1), normalized=True)

    def encode_prompts(self, prompts: Sequence) -> FeatureBatch:
        seqs = [p.token_sequence if hasattr(p, "token_sequence") else p for p in prompts]
        raw = self.text_net.encode_sequences(seqs)
        return FeatureBatch(l2_normalize(raw, dim=1), normalized=True)

    def encode_texts(self, texts: Sequence[str]) -> FeatureBatch:
        return self.encode_prompts([self.text_net.token_rows(t) for t in texts])

    def freeze(self) -> "JointEmbeddingModel":
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)
        self.frozen = True
        return self

    def as_embedding_model(self) -> EmbeddingModel:
        return EmbeddingModel(
            name=self.name,
            embed_dim=self.embed_dim,
            logit_temperature=self.logit_temperature,
            image_encoder=self.encode_images,
            text_encoder=self.encode_prompts,
        )


def train_joint_embedding(images: torch.Tensor, labels: torch.Tensor,
                          class_names: Sequence[str], embed_dim: int = 64,
                          epochs: int = 12, batch_size: int = 64, lr: float = 1e-3,
                          seed: int = 0, template: str = "a photo of a {}",
                          name: str = "toy-dual-encoder") -> JointEmbeddingModel:
    """Brief contrastive pretraining of the toy dual encoder, then freeze.

    Each image is pushed toward the text feature of its class prompt and away
    from the other classes' prompts (softmax over scaled cosines).
    """
    torch.manual_seed(seed)
    model = JointEmbeddingModel(class_names, embed_dim=embed_dim, name=name)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    g = torch.Generator().manual_seed(seed + 1)
    prompts = [template.format(c) for c in class_names]
    n = images.shape[0]
    model.train()
    for _ in range(epochs):
        order = torch.randperm(n, generator=g)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            img_feat = l2_normalize(model.image_net(images[idx]), dim=1)
            txt_feat = l2_normalize(
                model.text_net.encode_sequences(
                    [model.text_net.token_rows(p) for p in prompts]), dim=1)
            scale = model.logit_scale.exp().clamp(max=100.0)
            logits = scale * img_feat @ txt_feat.T
            loss = F.cross_entropy(logits, labels[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
    return model.freeze()


def save_joint_embedding(path, model: JointEmbeddingModel) -> None:
    save_container(path, "joint_embedding", {
        "name": model.name,
        "embed_dim": model.embed_dim,
        "class_names": model.class_names,
        "max_seq_len": model.text_net.max_seq_len,
        "state_dict": model.state_dict(),
    })


def load_joint_embedding(path) -> JointEmbeddingModel:
    c = load_container(path, "joint_embedding")
    model = JointEmbeddingModel(
        c["class_names"], embed_dim=c["embed_dim"], name=c["name"],
        max_seq_len=c["max_seq_len"])
    model.load_state_dict(c["state_dict"])
    return model.freeze()
