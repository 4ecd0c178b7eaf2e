"""Review-corpus ingestion: tokens, vocabulary, designs, grouped splits.

Works against the aclImdb directory layout (train/{pos,neg} and
test/{pos,neg}, files named `<id>_<rating>.txt`).  That distribution has
no genre labels, so grouped runs take a sidecar TSV mapping review ids to
comma-separated genre names; the mapping key may be a bare id or a
qualified `half/label/id` path when bare ids collide across halves.

The original train/test halves are treated purely as storage: retained
reviews are re-split 50/50 with a seeded permutation, the vocabulary is
built from the training half of that split only (tokens kept when they
appear in at least `min_doc_freq` training reviews), and both halves are
featurized as binary presence indicators over that vocabulary.  Feature
ids follow lexicographic token order, so identical input yields a
bit-identical design.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsl import GroupedDataset
from .errors import ConfigurationError, DataError
from .seeding import generator
from .sparse_core import SparseBinaryDesign

_FILENAME = re.compile(r"^(?P<id>[^_]+)_(?P<rating>\d+)\.txt$")
_BREAK_TAGS = re.compile(r"<br\s*/?>")
_NON_TOKEN = re.compile(r"[^a-z0-9']+")

TOKENIZER_VERSION = "lower-breakstrip-alnum-apostrophe-v1"


@dataclass(frozen=True)
class Review:
    """One review file: bare id, 1..10 rating, raw text, genre tags.

    `source` records which corpus directory the file came from
    (e.g. "train/pos"); it qualifies the id for genre joins and plays no
    role in modeling.
    """

    id: str
    rating: int
    text: str
    genres: frozenset
    source: str = ""

    def __post_init__(self):
        if not 1 <= self.rating <= 10:
            raise DataError(f"review {self.id!r}: rating {self.rating} "
                            f"outside 1..10")


def tokenize(text: str) -> list[str]:
    """Lowercase, drop HTML line-break tags, split on [^a-z0-9']."""
    cleaned = _BREAK_TAGS.sub(" ", text.lower())
    return [t for t in _NON_TOKEN.split(cleaned) if t]


def _load_genre_sidecar(path) -> dict[str, frozenset]:
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(
                    f"{path}: line {line_no} is not 'id<TAB>genres'")
            names = frozenset(g.strip() for g in parts[1].split(",")
                              if g.strip())
            mapping[parts[0]] = names
    return mapping


def ingest(root, genre_path=None) -> list[Review]:
    """One Review per file under train/{pos,neg} and test/{pos,neg}.

    Ratings come from the filename; genres from the sidecar TSV when
    given (reviews with no entry carry an empty genre set).  Files are
    visited in sorted order so the output sequence is deterministic.
    """
    root = Path(root)
    genre_map = _load_genre_sidecar(genre_path) if genre_path else {}
    reviews = []
    for half in ("train", "test"):
        for label in ("pos", "neg"):
            directory = root / half / label
            if not directory.is_dir():
                raise DataError(f"missing corpus directory {directory}")
            for path in sorted(directory.glob("*.txt")):
                m = _FILENAME.match(path.name)
                if m is None:
                    raise DataError(
                        f"{path}: filename must look like '<id>_<rating>.txt'")
                source = f"{half}/{label}"
                rid = m.group("id")
                genres = genre_map.get(f"{source}/{rid}",
                                       genre_map.get(rid, frozenset()))
                reviews.append(Review(
                    id=rid, rating=int(m.group("rating")),
                    text=path.read_text(encoding="utf-8"),
                    genres=genres, source=source))
    return reviews


@dataclass
class Vocabulary:
    """Lexicographically ordered token -> dense feature id map."""

    tokens: list[str]
    doc_freq: np.ndarray
    min_doc_freq: int

    def __post_init__(self):
        self.doc_freq = np.ascontiguousarray(self.doc_freq, dtype=np.int64)
        if len(self.tokens) != self.doc_freq.shape[0]:
            raise DataError("one document frequency per token required")
        self.token_to_id = {t: i for i, t in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def save(self, path) -> None:
        """TSV: feature_id, token, doc_freq (with header)."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("feature_id\ttoken\tdoc_freq\n")
            for i, tok in enumerate(self.tokens):
                fh.write(f"{i}\t{tok}\t{int(self.doc_freq[i])}\n")

    @classmethod
    def load(cls, path, min_doc_freq: int = 5) -> "Vocabulary":
        tokens, freqs = [], []
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if header.rstrip("\n") != "feature_id\ttoken\tdoc_freq":
                raise DataError(f"{path}: unexpected vocabulary header")
            for i, line in enumerate(fh):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3 or int(parts[0]) != i:
                    raise DataError(f"{path}: malformed row {i}")
                tokens.append(parts[1])
                freqs.append(int(parts[2]))
        return cls(tokens, np.asarray(freqs, dtype=np.int64), min_doc_freq)


def build_vocab(reviews, min_doc_freq: int = 5) -> Vocabulary:
    """Tokens appearing in at least `min_doc_freq` distinct reviews.

    Frequency counts each review once per token no matter how often the
    token repeats inside it.
    """
    if min_doc_freq < 1:
        raise ConfigurationError("min_doc_freq must be >= 1")
    df = Counter()
    for r in reviews:
        df.update(set(tokenize(r.text)))
    kept = sorted(t for t, c in df.items() if c >= min_doc_freq)
    freqs = np.asarray([df[t] for t in kept], dtype=np.int64)
    return Vocabulary(kept, freqs, min_doc_freq)


def featurize(reviews, vocab: Vocabulary
              ) -> tuple[SparseBinaryDesign, np.ndarray]:
    """Binary presence design over the vocabulary, ratings as response."""
    rows = []
    y = np.empty(len(reviews))
    for i, r in enumerate(reviews):
        ids = {vocab.token_to_id[t] for t in tokenize(r.text)
               if t in vocab.token_to_id}
        rows.append(np.fromiter(ids, dtype=np.int64, count=len(ids)))
        y[i] = float(r.rating)
    return SparseBinaryDesign.from_rows(rows, vocab.size), y


@dataclass
class CorpusSplit:
    """Featurized 50/50 split plus the vocabulary it was built on."""

    train: GroupedDataset
    test: GroupedDataset
    vocab: Vocabulary
    train_reviews: list
    test_reviews: list


def group_and_split(reviews, genres, seed: int = 0, min_doc_freq: int = 5,
                    priority=None) -> CorpusSplit:
    """Retain reviews tagged with any genre of interest, group, and split.

    Group ids follow the order of `genres` (1-based).  A review tagged
    with several genres of interest goes to the one earliest in
    `priority` (default: the `genres` order itself).  The retained
    reviews are split 50/50 by a seeded permutation (train gets the extra
    row when the count is odd); the vocabulary sees only the training
    half.
    """
    genres = list(genres)
    if not genres:
        raise ConfigurationError("need at least one genre of interest")
    priority = list(priority) if priority is not None else genres
    if set(priority) != set(genres):
        raise ConfigurationError("priority must permute the genre list")
    group_of = {name: g for g, name in enumerate(genres, start=1)}

    retained, groups = [], []
    for r in reviews:
        matches = [name for name in priority if name in r.genres]
        if matches:
            retained.append(r)
            groups.append(group_of[matches[0]])
    groups = np.asarray(groups, dtype=np.int64)
    for name in genres:
        if not np.any(groups == group_of[name]):
            raise ConfigurationError(
                f"no retained reviews for genre {name!r}")

    n = len(retained)
    perm = generator(seed, "corpus-split").permutation(n)
    n_train = (n + 1) // 2
    train_idx, test_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    for name in genres:
        g = group_of[name]
        for half, idx in (("train", train_idx), ("test", test_idx)):
            if not np.any(groups[idx] == g):
                raise ConfigurationError(
                    f"genre {name!r} has no reviews in the {half} half; "
                    f"use a different seed or more data")

    train_reviews = [retained[i] for i in train_idx]
    test_reviews = [retained[i] for i in test_idx]
    vocab = build_vocab(train_reviews, min_doc_freq)
    Xtr, ytr = featurize(train_reviews, vocab)
    Xte, yte = featurize(test_reviews, vocab)
    train = GroupedDataset(Xtr, ytr, groups[train_idx], group_names=genres)
    test = GroupedDataset(Xte, yte, groups[test_idx], group_names=genres)
    return CorpusSplit(train=train, test=test, vocab=vocab,
                       train_reviews=train_reviews, test_reviews=test_reviews)
