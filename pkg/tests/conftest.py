import numpy as np
import pytest

from citefuse.corpus import Corpus

from helpers import make_paper


@pytest.fixture
def two_clique_corpus():
    """Two disconnected 5-cliques (a0..a4, b0..b4)."""
    papers = {}
    for prefix in ("a", "b"):
        group = [f"{prefix}{i}" for i in range(5)]
        for pid in group:
            papers[pid] = make_paper(pid, refs=[o for o in group if o != pid])
    return Corpus(papers)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
