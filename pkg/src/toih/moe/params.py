"""Model configuration, parameter container and checkpoint format."""
from dataclasses import asdict, dataclass, fields
import json
import math

import numpy as np

EXPERTS = ("temporal", "action", "object", "spatial")
N_EXPERTS = len(EXPERTS)
N_OPTIONS = 4

CHECKPOINT_FORMAT = "toih-moe-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Sizes of the desk-scale router.

    The full-size system uses d=4096, N=32 patches, K=32 selected patches and
    inserts the expert layer after layer 16 of 35; the defaults here are small
    enough to train on a laptop CPU.
    """

    d: int = 32
    n_patches: int = 32
    k_select: int = 8
    depth: int = 6
    insert_layer: int = None
    expert_hidden: int = 64
    n_query_tokens: int = 4
    seed: int = 42

    def __post_init__(self):
        if self.insert_layer is None:
            object.__setattr__(self, "insert_layer", self.depth // 2)
        for name in ("d", "n_patches", "expert_hidden", "n_query_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 1 <= self.k_select <= self.n_patches:
            raise ValueError("need 1 <= k_select <= n_patches")
        if not 1 <= self.insert_layer < self.depth:
            raise ValueError("need 1 <= insert_layer < depth")

    @property
    def n_tokens(self):
        return 3 * self.k_select + self.n_query_tokens

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def is_frozen(name):
    """The stand-in backbone plays the part of the frozen language model."""
    return name.startswith("backbone.")


def is_bias(name):
    return name.endswith(".b")


class MoEParams:
    """Named float64 arrays. Affine weights are stored (out, in)."""

    def __init__(self, arrays, config):
        self.arrays = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}
        self.config = config

    def __getitem__(self, name):
        return self.arrays[name]

    def __contains__(self, name):
        return name in self.arrays

    def __iter__(self):
        return iter(self.arrays)

    def names(self):
        return list(self.arrays)

    @property
    def trainable(self):
        return [k for k in self.arrays if not is_frozen(k)]

    @property
    def frozen(self):
        return [k for k in self.arrays if is_frozen(k)]

    def copy(self):
        return MoEParams({k: v.copy() for k, v in self.arrays.items()}, self.config)

    def n_parameters(self):
        return int(sum(v.size for v in self.arrays.values()))

    def equal(self, other):
        return self.names() == other.names() and all(
            np.array_equal(self[k], other[k]) for k in self.arrays
        )

    def to_checkpoint(self):
        """Byte-stable JSON text; floats use Python's round-trip repr."""
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "frozen": self.frozen,
            "params": {
                k: {"shape": list(v.shape), "data": [float(x) for x in v.reshape(-1)]}
                for k, v in self.arrays.items()
            },
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_checkpoint(cls, text):
        doc = json.loads(text)
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a router checkpoint")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
        config = ModelConfig.from_dict(doc["config"])
        arrays = {
            k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])
            for k, v in doc["params"].items()
        }
        return cls(dict(sorted(arrays.items())), config)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_checkpoint())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_checkpoint(f.read())


def init_params(config, seed=None):
    """Seeded initialisation.

    The OCR conditioner starts as an exact copy of the visual one, so an input
    with identical streams yields zero difference tokens until training
    separates them.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    d, h = config.d, config.expert_hidden

    def normal(shape, scale):
        return rng.standard_normal(shape) * scale

    p = {"q_vis": normal(d, 1.0 / math.sqrt(d))}
    cond = {name: normal((d, d), 0.5 / math.sqrt(d)) for name in ("w_q", "w_k", "w_v")}
    for modality in ("vis", "ocr"):
        for name, w in cond.items():
            p[f"cond_{modality}.{name}"] = w.copy()
    for layer in range(config.depth):
        p[f"backbone.{layer}.w"] = normal((d, d), 0.5 / math.sqrt(d))
        p[f"backbone.{layer}.b"] = np.zeros(d)
    p["gate.w"] = normal((N_EXPERTS, d), 0.1 / math.sqrt(d))
    p["gate.b"] = np.zeros(N_EXPERTS)
    p["cls.w"] = normal((N_EXPERTS, d), 1.0 / math.sqrt(d))
    p["cls.b"] = np.zeros(N_EXPERTS)
    for e in EXPERTS:
        p[f"experts.{e}.w_gate"] = normal((h, d), 1.0 / math.sqrt(d))
        p[f"experts.{e}.w_up"] = normal((h, d), 1.0 / math.sqrt(d))
        p[f"experts.{e}.w_down"] = normal((d, h), 0.1 / math.sqrt(h))
    p["head.w"] = normal((N_OPTIONS, d), 1.0 / math.sqrt(d))
    p["head.b"] = np.zeros(N_OPTIONS)
    p["pool.q"] = np.zeros(d)
    return MoEParams(dict(sorted(p.items())), config)
