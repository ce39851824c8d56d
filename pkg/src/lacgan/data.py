"""Dataset schema, synthetic corpus, text embeddings and splits.

Records mirror the object-manipulation corpus: a trajector's name expression
(``|``-separated candidates), the sentences describing its scene, and one of
seven labels of which four are trainable classes.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import templates
from .errors import ConfigError, DataError, ValidationError

D_NAME = 200
D_SITUATION = 200
TABLE1_SIZE = 896
# 539 + 67 + 67 four-class samples in the published statistics.
TABLE1_TRAINABLE = 673


class LabelCategory(str, enum.Enum):
    E1 = "E1"
    E2 = "E2"
    N = "N"
    M0 = "M0"
    M1 = "M1"
    M2 = "M2"
    O = "O"  # noqa: E741


TRAINABLE = (LabelCategory.N, LabelCategory.M0, LabelCategory.M1, LabelCategory.M2)
EXCLUDED = (LabelCategory.E1, LabelCategory.E2, LabelCategory.O)
CLASS_INDEX = {label: i for i, label in enumerate(TRAINABLE)}


def label_index(label: LabelCategory) -> int:
    if label not in CLASS_INDEX:
        raise ValidationError(f"label {label.value} is not one of the trainable classes N/M0/M1/M2")
    return CLASS_INDEX[label]


@dataclass(frozen=True)
class RawSample:
    id: str
    synset: str
    name_candidates: tuple[str, ...]
    situation_sentences: tuple[str, ...]
    label: LabelCategory

    def __post_init__(self):
        if not self.name_candidates:
            raise ValidationError(f"sample {self.id}: name_candidates must be nonempty")

    @property
    def name(self) -> str:
        return " | ".join(self.name_candidates)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "synset": self.synset,
            "name": self.name,
            "situation": list(self.situation_sentences),
            "label": self.label.value,
        }


def split_name(name: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in name.split("|") if part.strip())


# ---------------------------------------------------------------------------
# JSONL I/O
# ---------------------------------------------------------------------------


def _field(record: dict, key: str, kind, lineno: int):
    if key not in record:
        raise DataError(f"line {lineno}: missing field {key!r}")
    value = record[key]
    if not isinstance(value, kind):
        raise DataError(f"line {lineno}: field {key!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def sample_from_record(record: dict, lineno: int = 0) -> RawSample:
    if not isinstance(record, dict):
        raise DataError(f"line {lineno}: record must be a JSON object")
    sid = _field(record, "id", str, lineno)
    synset = _field(record, "synset", str, lineno)
    name = _field(record, "name", str, lineno)
    situation = _field(record, "situation", list, lineno)
    label = _field(record, "label", str, lineno)
    if not all(isinstance(s, str) for s in situation):
        raise DataError(f"line {lineno}: field 'situation' must contain only strings")
    candidates = split_name(name)
    if not candidates:
        raise DataError(f"line {lineno}: field 'name' has no candidates")
    try:
        category = LabelCategory(label)
    except ValueError:
        raise DataError(f"line {lineno}: field 'label' has unknown value {label!r}") from None
    return RawSample(sid, synset, candidates, tuple(situation), category)


def save_jsonl(samples: Iterable[RawSample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record(), ensure_ascii=False) + "\n")


def load_jsonl(path) -> list[RawSample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            out.append(sample_from_record(record, lineno))
    return out


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@lru_cache(maxsize=65536)
def _token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=str(seed).encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.integers(0, 2, size=dim).astype(np.float64) * 2.0 - 1.0
    vec.setflags(write=False)
    return vec


def embed_text(text: str, dim: int = D_NAME, seed: int = 0) -> np.ndarray:
    """Hashed bag-of-words document vector.

    Each token maps to a fixed pseudo-random +-1 pattern (unit variance per
    entry); the document is the mean of its token patterns, or zeros when it
    has no tokens.
    """
    tokens = tokenize(text)
    if not tokens:
        return np.zeros(dim)
    return np.mean([_token_vector(t, dim, seed) for t in tokens], axis=0)


def embed_name(name_candidates: Sequence[str], dim: int = D_NAME, seed: int = 0) -> np.ndarray:
    """Average of the candidate embeddings."""
    if len(name_candidates) == 0:
        raise ValidationError("name expression needs at least one candidate")
    return np.mean([embed_text(c, dim, seed) for c in name_candidates], axis=0)


def embed_situation(sentences: Sequence[str], dim: int = D_SITUATION, seed: int = 0) -> np.ndarray:
    return embed_text(" . ".join(sentences), dim, seed)


@dataclass(frozen=True)
class EmbeddedSample:
    id: str
    x_name: np.ndarray
    x_situation: np.ndarray
    y: np.ndarray

    @property
    def x_raw(self) -> np.ndarray:
        return np.concatenate([self.x_name, self.x_situation])


def one_hot(index: int, k: int = len(TRAINABLE)) -> np.ndarray:
    y = np.zeros(k)
    y[index] = 1.0
    return y


def embed_sample(s: RawSample, seed: int = 0) -> EmbeddedSample:
    return EmbeddedSample(
        s.id,
        embed_name(s.name_candidates, D_NAME, seed),
        embed_situation(s.situation_sentences, D_SITUATION, seed),
        one_hot(label_index(s.label)),
    )


def embed_samples(samples: Sequence[RawSample], seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into ``(X, Y)`` with ``X`` of width 400 and one-hot ``Y``."""
    X = np.zeros((len(samples), D_NAME + D_SITUATION))
    Y = np.zeros((len(samples), len(TRAINABLE)))
    for i, s in enumerate(samples):
        e = embed_sample(s, seed)
        X[i] = e.x_raw
        Y[i] = e.y
    return X, Y


# ---------------------------------------------------------------------------
# filtering and splits
# ---------------------------------------------------------------------------


def filter_labels(samples: Iterable[RawSample]) -> list[RawSample]:
    """Keep only the four trainable classes."""
    return [s for s in samples if s.label in CLASS_INDEX]


@dataclass
class DatasetSplit:
    train: list[RawSample]
    validation: list[RawSample]
    test: list[RawSample]
    seed: int

    def __getitem__(self, name: str) -> list[RawSample]:
        if name not in ("train", "validation", "test"):
            raise KeyError(name)
        return getattr(self, name)


def split_sizes(n: int) -> tuple[int, int, int]:
    """80/10/10 with validation and test floored, remainder to train."""
    k = n // 10
    return n - 2 * k, k, k


def split_dataset(samples: Sequence[RawSample], seed: int = 0) -> DatasetSplit:
    """Filter to trainable classes, shuffle with ``seed`` and cut contiguously."""
    kept = filter_labels(samples)
    if len(kept) < 10:
        raise ValidationError(f"need at least 10 trainable samples to split, got {len(kept)}")
    ids = [s.id for s in kept]
    if len(set(ids)) != len(ids):
        raise ValidationError("sample ids must be unique")
    order = np.random.default_rng(seed).permutation(len(kept))
    shuffled = [kept[i] for i in order]
    n_train, n_val, _ = split_sizes(len(kept))
    return DatasetSplit(
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
        seed,
    )


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------


@dataclass
class SyntheticConfig:
    n: int = TABLE1_SIZE
    # Mapping label -> share, or a sequence in N, M0, M1, M2 order.
    class_props: dict[str, float] | Sequence[float] = field(default_factory=lambda: {c.value: 0.25 for c in TRAINABLE})
    seed: int = 0
    # Samples labelled E1/E2/O; the default leaves 673 trainable records out of 896.
    n_excluded: int = TABLE1_SIZE - TABLE1_TRAINABLE
    # Probability that a cue sentence is borrowed from another class.
    confusion: float = 0.15
    scene_sentences: tuple[int, int] = (8, 20)
    cue_sentences: tuple[int, int] = (2, 4)


def _allocate(total: int, props: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment; ties go to the earlier class."""
    raw = [total * p for p in props]
    counts = [int(np.floor(r)) for r in raw]
    rest = total - sum(counts)
    order = sorted(range(len(props)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def _validate(cfg: SyntheticConfig) -> list[float]:
    if cfg.n < 0 or not 0 <= cfg.n_excluded <= cfg.n:
        raise ConfigError(f"need 0 <= n_excluded <= n, got n={cfg.n}, n_excluded={cfg.n_excluded}")
    if isinstance(cfg.class_props, dict):
        unknown = set(cfg.class_props) - {c.value for c in TRAINABLE}
        if unknown:
            raise ConfigError(f"class_props has non-trainable labels {sorted(unknown)}")
        props = [float(cfg.class_props.get(c.value, 0.0)) for c in TRAINABLE]
    else:
        props = [float(p) for p in cfg.class_props]
        if len(props) != len(TRAINABLE):
            raise ConfigError(f"class_props needs {len(TRAINABLE)} entries (N, M0, M1, M2), got {len(props)}")
    if any(p < 0 for p in props) or abs(sum(props) - 1.0) > 1e-9:
        raise ConfigError(f"class proportions must be nonnegative and sum to 1, got {props}")
    if not 0.0 <= cfg.confusion <= 1.0:
        raise ConfigError(f"confusion must lie in [0, 1], got {cfg.confusion}")
    return props


def _fill(template: str, rng: np.random.Generator) -> str:
    slots = re.findall(r"{(\w+)}", template)
    return template.format(**{s: templates.WORDS[s][rng.integers(len(templates.WORDS[s]))] for s in slots})


def _pick(seq, rng):
    return seq[rng.integers(len(seq))]


def _make_sample(idx: int, label: LabelCategory, cfg: SyntheticConfig, rng: np.random.Generator) -> RawSample:
    synset = _pick(templates.SYNSETS, rng)
    pool = templates.ODD_NAMES if label is LabelCategory.N and rng.random() < 0.6 else templates.NAMES
    name = _pick(pool[synset], rng)
    candidates = split_name(name)
    head = candidates[0]

    lo, hi = cfg.scene_sentences
    sentences = [_fill(_pick(templates.SCENE_TEMPLATES, rng), rng) for _ in range(rng.integers(lo, hi + 1))]
    others = [c for c in templates.CUES if c != label.value]
    lo, hi = cfg.cue_sentences
    for _ in range(rng.integers(lo, hi + 1)):
        source = _pick(others, rng) if rng.random() < cfg.confusion else label.value
        cue = _pick(templates.CUES[source], rng).format(name=head)
        sentences.insert(int(rng.integers(len(sentences) + 1)), cue)
    return RawSample(f"syn-{idx:05d}", synset, candidates, tuple(sentences), label)


def generate_synthetic(config: SyntheticConfig | None = None, **overrides) -> list[RawSample]:
    """Generate a labelled corpus deterministically from ``config.seed``."""
    cfg = config or SyntheticConfig()
    if overrides:
        cfg = SyntheticConfig(**{**cfg.__dict__, **overrides})
    props = _validate(cfg)
    counts = _allocate(cfg.n - cfg.n_excluded, props)
    excluded = _allocate(cfg.n_excluded, [1 / 3] * 3)
    labels = [c for c, k in zip(TRAINABLE, counts) for _ in range(k)]
    labels += [c for c, k in zip(EXCLUDED, excluded) for _ in range(k)]
    rng = np.random.default_rng(cfg.seed)
    labels = [labels[i] for i in rng.permutation(len(labels))]
    return [_make_sample(i, label, cfg, rng) for i, label in enumerate(labels)]


def generate_separable(n: int = 200, seed: int = 0, class_words: int = 3, noise_words: int = 40, noise_per_sample: int = 2) -> list[RawSample]:
    """Toy corpus whose classes use disjoint vocabularies plus shared noise.

    Every situation holds class-exclusive tokens, so the embedded classes are
    linearly separable; used as a learnability smoke test.
    """
    if n < 4:
        raise ConfigError(f"need at least 4 samples, got {n}")
    rng = np.random.default_rng(seed)
    vocab = {c: [f"{c.value.lower()}cue{k}" for k in range(class_words)] for c in TRAINABLE}
    noise = [f"filler{k}" for k in range(noise_words)]
    labels = [TRAINABLE[i % len(TRAINABLE)] for i in range(n)]
    labels = [labels[i] for i in rng.permutation(n)]
    out = []
    for i, label in enumerate(labels):
        synset = _pick(templates.SYNSETS, rng)
        cues = [str(w) for w in rng.permutation(vocab[label])]
        filler = [str(w) for w in rng.choice(noise, size=noise_per_sample, replace=False)]
        out.append(RawSample(f"sep-{i:05d}", synset, (synset.split(".")[0].replace("_", " "),), (" ".join(cues), " ".join(filler)), label))
    return out


def corpus_statistics(samples: Sequence[RawSample]) -> dict:
    """Size, distinct situation words and mean situation length in words."""
    vocab: set[str] = set()
    lengths = []
    for s in samples:
        words = tokenize(" ".join(s.situation_sentences))
        vocab.update(words)
        lengths.append(len(words))
    return {
        "size": len(samples),
        "unique_words": len(vocab),
        "avg_words_per_situation": float(np.mean(lengths)) if lengths else 0.0,
    }
