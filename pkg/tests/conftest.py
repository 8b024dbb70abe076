from pathlib import Path

import pytest

from stegotext.harness import load_prompts
from stegotext.lm import train_ngram
from stegotext.vocab import greedy_tokenize, train_bpe

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

# the benchmark configuration the acceptance suite pins
BENCH_VOCAB_SIZE = 1000
BENCH_ORDER = 3


@pytest.fixture(scope="session")
def corpus_bytes() -> bytes:
    return (DATA_DIR / "corpus.txt").read_bytes()


@pytest.fixture(scope="session")
def bench_vocab(corpus_bytes):
    return train_bpe(corpus_bytes, BENCH_VOCAB_SIZE)


@pytest.fixture(scope="session")
def bench_lm(corpus_bytes, bench_vocab):
    tokens = [t.id for t in greedy_tokenize(corpus_bytes, bench_vocab)]
    return train_ngram(tokens, BENCH_ORDER, len(bench_vocab))


@pytest.fixture(scope="session")
def bench_prompts(corpus_bytes):
    return load_prompts(corpus_bytes)
