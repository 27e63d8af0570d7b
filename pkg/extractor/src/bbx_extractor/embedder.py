"""Deterministic sentence embedders.

The default "hashed" model needs no weights on disk: each token maps to a
fixed Gaussian vector seeded from a BLAKE2 digest of the token text, and a
fixed linear recurrence over those vectors stands in for a frozen language
model's hidden-state sequence.  Extraction is therefore bit-reproducible,
works offline, and embeds every sentence independently of its neighbours.

A transformers-backed embedder is provided for real pretrained models; it
imports lazily so the package works without torch/transformers installed.
"""

import hashlib
import re
import warnings
from typing import List

import numpy as np

POOLING_RULES = ("last_token_final_layer", "mean_final_layer")

_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)

# recurrence h_i = DECAY*h_{i-1} + INPUT*x_i; |DECAY| < 1 keeps states bounded
_DECAY = 0.8
_INPUT = 0.6


class ModelLoadError(RuntimeError):
    """A requested embedding model could not be constructed."""


def tokenize(sentence: str) -> List[str]:
    """Split a sentence into word and punctuation tokens."""
    return _TOKEN.findall(sentence)


def _pool(states: np.ndarray, pooling: str) -> np.ndarray:
    if pooling == "last_token_final_layer":
        return states[-1]
    if pooling == "mean_final_layer":
        return states.mean(axis=0)
    raise ValueError(f"unknown pooling rule {pooling!r} (choose from {POOLING_RULES})")


class HashedEmbedder:
    """Hash-seeded token vectors run through a fixed recurrence.

    The per-token vectors depend only on the token text and the salt, so
    the same sentence always embeds to the same vector no matter where it
    appears — the property that makes permuting documents commute with
    extraction.
    """

    def __init__(self, dim: int = 32, salt: str = "hashed-32"):
        if dim < 1:
            raise ValueError("embedding dim must be at least 1")
        self.dim = int(dim)
        self.salt = salt

    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b((self.salt + "\x00" + token).encode("utf-8"),
                                 digest_size=8).digest()
        seed = int.from_bytes(digest, "little")
        return np.random.default_rng(seed).standard_normal(self.dim)

    def hidden_states(self, tokens: List[str]) -> np.ndarray:
        """One recurrence state per token, shape (len(tokens), dim)."""
        states = np.empty((len(tokens), self.dim))
        h = np.zeros(self.dim)
        for i, tok in enumerate(tokens):
            h = _DECAY * h + _INPUT * self._token_vector(tok)
            states[i] = h
        return states

    def embed(self, sentence: str, pooling: str = "last_token_final_layer",
              max_tokens: int = 128) -> np.ndarray:
        tokens = tokenize(sentence)
        if not tokens:
            raise ValueError(f"sentence has no tokens: {sentence!r}")
        if len(tokens) > max_tokens:
            warnings.warn(f"sentence truncated to {max_tokens} tokens "
                          f"({len(tokens)} found): {sentence[:40]!r}")
            tokens = tokens[:max_tokens]
        return _pool(self.hidden_states(tokens), pooling)


class TransformerEmbedder:
    """Final-layer hidden states of a frozen pretrained model.

    Sentences are encoded one at a time with no cross-sentence context.
    """

    def __init__(self, model_name: str, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ModelLoadError(
                f"model load failure: transformers/torch not installed ({exc})")
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name)
            self.model = AutoModel.from_pretrained(model_name).to(device)
        except Exception as exc:
            raise ModelLoadError(
                f"model load failure: could not load {model_name!r} ({exc})")
        self.model.eval()
        self._torch = torch
        self.device = device
        self.dim = int(self.model.config.hidden_size)

    def embed(self, sentence: str, pooling: str = "last_token_final_layer",
              max_tokens: int = 128) -> np.ndarray:
        enc = self.tokenizer(sentence, return_tensors="pt", truncation=True,
                             max_length=max_tokens)
        if enc["input_ids"].shape[1] >= max_tokens:
            warnings.warn(f"sentence truncated to {max_tokens} tokens: "
                          f"{sentence[:40]!r}")
        with self._torch.no_grad():
            out = self.model(**{k: v.to(self.device) for k, v in enc.items()})
        states = out.last_hidden_state[0].double().cpu().numpy()
        return _pool(states, pooling)
