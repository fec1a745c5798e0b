"""
Tokenization, placeholder substitution, vocabulary and fixed-length encoding.
"""

import logging
import re
from collections import Counter
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple, Union

import numpy as np

from ..core.exceptions import InvalidLength

logger = logging.getLogger(__name__)

PAD = "[PAD]"
CLS = "[CLS]"
UNK = "[UNK]"
NUM = "[NUM]"
HEX = "[HEX]"
RESERVED_TOKENS = (PAD, CLS, UNK, NUM, HEX)
PAD_ID, CLS_ID, UNK_ID, NUM_ID, HEX_ID = range(len(RESERVED_TOKENS))

# Tokens in order; element 0 is always "[CLS]"
TokenSequence = Tuple[str, ...]

_SPLIT = re.compile(r"[.,:/\s]+")
_HEX_PREFIXED = re.compile(r"0[xX][0-9a-fA-F]+\Z")
_HEX_BARE = re.compile(r"[0-9a-fA-F]{6,}\Z")
_HEX_ALPHA = re.compile(r"[a-fA-F]")
_DIGITS = re.compile(r"[0-9]+\Z")


class EncodedSequence(NamedTuple):
    ids: Tuple[int, ...]
    attention_mask: Tuple[bool, ...]


def substitute_token(token: str) -> str:
    """Replace hexadecimal values with [HEX] and numbers >= 10 with [NUM]."""
    if _HEX_PREFIXED.match(token) or (
        _HEX_BARE.match(token) and _HEX_ALPHA.search(token)
    ):
        return HEX
    # no int(): digit runs may be arbitrarily long
    if _DIGITS.match(token) and len(token.lstrip("0")) >= 2:
        return NUM
    return token


@lru_cache(maxsize=65536)
def tokenize(content: str) -> TokenSequence:
    """Split on ``. , : /`` and whitespace, substitute placeholders, prefix [CLS]."""
    return (CLS,) + tuple(
        substitute_token(fragment) for fragment in _SPLIT.split(content) if fragment
    )


def truncate_pad(tokens: TokenSequence, length: int) -> TokenSequence:
    """Cut or pad to exactly ``length`` tokens; [CLS] counts toward the length."""
    if length < 2:
        raise InvalidLength(f"sequence length must be >= 2, got {length}")
    tokens = tuple(tokens[:length])
    return tokens + (PAD,) * (length - len(tokens))


class Vocabulary:
    """Token to id mapping with fixed reserved ids.

    Corpus tokens follow the reserved ones ordered by descending frequency,
    ties broken lexicographically.
    """

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise ValueError("vocabulary must start with the reserved tokens")
        self._id_to_token: List[str] = list(tokens)
        self._token_to_id: Dict[str, int] = {t: i for i, t in enumerate(tokens)}
        if len(self._token_to_id) != len(self._id_to_token):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._id_to_token == other._id_to_token

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        return self._id_to_token[token_id]

    def decode(self, ids: Iterable[int]) -> TokenSequence:
        return tuple(self._id_to_token[int(i)] for i in ids)

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for token_id, token in enumerate(self._id_to_token):
                handle.write(f"{token}\t{token_id}\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        tokens: List[str] = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                token, token_id = line.rstrip("\n").rsplit("\t", 1)
                if int(token_id) != len(tokens):
                    raise ValueError(f"non-contiguous id {token_id} in {path}")
                tokens.append(token)
        return cls(tokens)


def build_vocabulary(corpus: Iterable[TokenSequence], min_freq: int = 1) -> Vocabulary:
    counts: Counter = Counter()
    n_sequences = 0
    for tokens in corpus:
        counts.update(tokens)
        n_sequences += 1
    if n_sequences == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")

    for token in RESERVED_TOKENS:
        counts.pop(token, None)
    ranked = sorted(
        (t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t)
    )
    vocab = Vocabulary(list(RESERVED_TOKENS) + ranked)
    logger.info(
        f"Built vocabulary of {len(vocab)} tokens from {n_sequences} sequences "
        f"(min_freq={min_freq})"
    )
    return vocab


def encode(tokens: TokenSequence, vocab: Vocabulary, length: int) -> EncodedSequence:
    padded = truncate_pad(tokens, length)
    ids = tuple(vocab.id_of(t) for t in padded)
    return EncodedSequence(ids=ids, attention_mask=tuple(i != PAD_ID for i in ids))


def encode_corpus(
    contents: Iterable[str], vocab: Vocabulary, length: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Encode raw message contents into an ``(n, length)`` id matrix and its mask."""
    if length < 2:
        raise InvalidLength(f"sequence length must be >= 2, got {length}")
    rows: List[List[int]] = []
    for content in contents:
        tokens = tokenize(content)[:length]
        row = [vocab.id_of(t) for t in tokens]
        row.extend([PAD_ID] * (length - len(row)))
        rows.append(row)
    ids = np.asarray(rows, dtype=np.int64).reshape(len(rows), length)
    return ids, ids != PAD_ID
