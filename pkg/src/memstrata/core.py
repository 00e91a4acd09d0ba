"""Shared primitives: configuration, the text embedding abstraction, cosine.

Everything downstream compares vectors by cosine similarity, so the default
embedder keeps its outputs L2-normalized. It is a deterministic token
feature-hasher, not a neural model; real embedders plug in behind the same
``Embedder`` interface.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from .errors import ConfigError, DimensionMismatch

QUERY_TYPES = ("factual", "constraint", "character")
LAYERS = ("epi", "sem", "logic")

DEFAULT_LAYER_WEIGHTS = {
    "factual": {"epi": 1.0, "sem": 1.0, "logic": 0.6},
    "constraint": {"epi": 1.0, "sem": 1.0, "logic": 1.5},
    "character": {"epi": 1.0, "sem": 1.2, "logic": 1.5},
}

DEFAULT_ACTION_VERBS = (
    "chop", "cut", "mix", "serve", "blanch", "slice", "peel", "pour",
    "wash", "stir", "boil", "fry", "bake", "grab", "place", "open",
    "close", "pick", "put", "add", "wipe", "fold", "assemble", "attach",
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# FNV-1a, 64-bit: stable across platforms and processes, unlike hash().
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def fnv1a64(token: str) -> int:
    h = _FNV_OFFSET
    for b in token.encode("utf-8"):
        h = ((h ^ b) * _FNV_PRIME) & _FNV_MASK
    return h


def embed_default(text: str, d: int) -> np.ndarray:
    """Token feature-hashing embedding.

    Each token adds 1.0 at index fnv1a64(token) mod d; the result is
    L2-normalized. An empty token list yields the zero vector.
    """
    if d < 1:
        raise DimensionMismatch(f"embedding dimension must be >= 1, got {d}")
    v = np.zeros(d, dtype=np.float64)
    for tok in tokenize(text):
        v[fnv1a64(tok) % d] += 1.0
    n = float(np.linalg.norm(v))
    if n > 0.0:
        v /= n
    return v


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; defined as 0 when either vector has zero norm."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"cosine over shapes {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


class Embedder(Protocol):
    """Text -> vector map; must be deterministic for fixed text."""

    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Default deterministic embedder over ``embed_default``."""

    def __init__(self, dim: int):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        return embed_default(text, self.dim)


@dataclass
class Config:
    """Every scalar knob the engine uses, with validated ranges.

    dim             embedding dimension d, fixed for the store's lifetime
    alpha           goal-vs-step blend for logic retrieval scores
    beta_ema        EMA decay for index refinement
    tau_verify      pattern verification score threshold
    delta_gate      min similarity for maintenance updates to apply
    sigma_support   min pattern support fraction for mining
    theta_retrieve  initial retrieval score threshold
    tau_pos/tau_neg semantic reinforce / weaken thresholds
    tau_align       fusion node-alignment similarity threshold
    tau_anchor      entity-anchor clustering threshold
    layer_weights   query-type -> layer -> re-ranking multiplier
    pool_trigger    candidate-pool size that triggers distillation
    max_path_len / max_paths   path enumeration guards
    action_verbs    verb lexicon for action-label extraction
    verifier / goal_namer      plugin selectors ("default" or "external")
    """

    dim: int = 512
    alpha: float = 0.3
    beta_ema: float = 0.9
    tau_verify: float = 0.25
    delta_gate: float = 0.5
    sigma_support: float = 0.3
    theta_retrieve: float = 0.2
    tau_pos: float = 0.85
    tau_neg: float = 0.3
    tau_align: float = 0.8
    tau_anchor: float = 0.75
    layer_weights: dict = field(
        default_factory=lambda: {q: dict(w) for q, w in DEFAULT_LAYER_WEIGHTS.items()}
    )
    pool_trigger: int = 5
    max_path_len: int = 64
    max_paths: int = 10000
    action_verbs: tuple = DEFAULT_ACTION_VERBS
    verifier: str = "default"
    goal_namer: str = "default"

    def validate(self) -> None:
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ConfigError(f"dim must be a positive integer, got {self.dim!r}")
        for name in ("alpha", "beta_ema"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ConfigError(f"{name} must lie in [0,1], got {x!r}")
        if not 0.0 < self.sigma_support <= 1.0:
            raise ConfigError(f"sigma_support must lie in (0,1], got {self.sigma_support!r}")
        for name in ("tau_verify", "delta_gate", "theta_retrieve",
                     "tau_pos", "tau_neg", "tau_align", "tau_anchor"):
            x = getattr(self, name)
            if not np.isfinite(x):
                raise ConfigError(f"{name} must be finite, got {x!r}")
        for name in ("pool_trigger", "max_path_len", "max_paths"):
            x = getattr(self, name)
            if not isinstance(x, int) or x < 1:
                raise ConfigError(f"{name} must be a positive integer, got {x!r}")
        if set(self.layer_weights) != set(QUERY_TYPES):
            raise ConfigError(f"layer_weights must cover exactly {QUERY_TYPES}")
        for qt, per_layer in self.layer_weights.items():
            if set(per_layer) != set(LAYERS):
                raise ConfigError(f"layer_weights[{qt}] must cover exactly {LAYERS}")
            for layer, w in per_layer.items():
                if not (np.isfinite(w) and w >= 0.0):
                    raise ConfigError(f"layer_weights[{qt}][{layer}] must be >= 0, got {w!r}")
        if self.verifier not in ("default", "external"):
            raise ConfigError(f"verifier must be 'default' or 'external', got {self.verifier!r}")
        if self.goal_namer not in ("default", "external"):
            raise ConfigError(f"goal_namer must be 'default' or 'external', got {self.goal_namer!r}")
        if not self.action_verbs or any(not v for v in self.action_verbs):
            raise ConfigError("action_verbs must be a non-empty list of non-empty verbs")

    def copy(self) -> "Config":
        return replace(
            self,
            layer_weights={q: dict(w) for q, w in self.layer_weights.items()},
            action_verbs=tuple(self.action_verbs),
        )

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "alpha": self.alpha,
            "beta_ema": self.beta_ema,
            "tau_verify": self.tau_verify,
            "delta_gate": self.delta_gate,
            "sigma_support": self.sigma_support,
            "theta_retrieve": self.theta_retrieve,
            "tau_pos": self.tau_pos,
            "tau_neg": self.tau_neg,
            "tau_align": self.tau_align,
            "tau_anchor": self.tau_anchor,
            "layer_weights": {q: dict(w) for q, w in self.layer_weights.items()},
            "pool_trigger": self.pool_trigger,
            "max_path_len": self.max_path_len,
            "max_paths": self.max_paths,
            "action_verbs": list(self.action_verbs),
            "verifier": self.verifier,
            "goal_namer": self.goal_namer,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = set(cls().to_dict())
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "action_verbs" in kwargs:
            kwargs["action_verbs"] = tuple(kwargs["action_verbs"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


_INT_KEYS = {"dim", "pool_trigger", "max_path_len", "max_paths"}
_FLOAT_KEYS = {
    "alpha", "beta_ema", "tau_verify", "delta_gate", "sigma_support",
    "theta_retrieve", "tau_pos", "tau_neg", "tau_align", "tau_anchor",
}
_STR_KEYS = {"verifier", "goal_namer"}


def parse_layer_weights(text: str) -> dict:
    """Parse ``factual:epi=1.0,sem=1.0,logic=0.6;constraint:...``."""
    weights = {}
    for block in text.split(";"):
        block = block.strip()
        if not block:
            continue
        qt, sep, rest = block.partition(":")
        qt = qt.strip()
        if not sep or qt not in QUERY_TYPES:
            raise ConfigError(f"bad layer_weights block {block!r}")
        per_layer = {}
        for pair in rest.split(","):
            layer, sep2, val = pair.partition("=")
            layer = layer.strip()
            if not sep2 or layer not in LAYERS:
                raise ConfigError(f"bad layer_weights entry {pair!r}")
            try:
                per_layer[layer] = float(val)
            except ValueError:
                raise ConfigError(f"bad layer_weights value {val!r}") from None
        weights[qt] = per_layer
    return weights


def format_layer_weights(weights: dict) -> str:
    blocks = []
    for qt in QUERY_TYPES:
        pairs = ",".join(f"{layer}={weights[qt][layer]:g}" for layer in LAYERS)
        blocks.append(f"{qt}:{pairs}")
    return ";".join(blocks)


def load_config(path: str) -> Config:
    """Load a flat ``key = value`` config file.

    The first non-comment line must be ``version = 1``. Unknown keys are an
    error; missing keys fall back to defaults.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    data: dict = {}
    saw_version = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        if not saw_version:
            if key != "version":
                raise ConfigError(f"{path}:{lineno}: first key must be 'version'")
            if value != "1":
                raise ConfigError(f"{path}:{lineno}: unsupported config version {value!r}")
            saw_version = True
            continue
        if key in data:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                data[key] = int(value)
            elif key in _FLOAT_KEYS:
                data[key] = float(value)
            elif key in _STR_KEYS:
                data[key] = value
            elif key == "layer_weights":
                data[key] = parse_layer_weights(value)
            elif key == "action_verbs":
                data[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            else:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from None
    if not saw_version:
        raise ConfigError(f"{path}: missing leading 'version = 1' line")
    return Config.from_dict(data)


def dump_config(cfg: Config) -> str:
    """Render a config back to the flat key-value file format."""
    d = cfg.to_dict()
    lines = ["version = 1"]
    for key in sorted(d):
        if key == "layer_weights":
            lines.append(f"layer_weights = {format_layer_weights(d[key])}")
        elif key == "action_verbs":
            lines.append("action_verbs = " + ",".join(d[key]))
        else:
            lines.append(f"{key} = {d[key]}")
    return "\n".join(lines) + "\n"
