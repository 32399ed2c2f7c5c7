import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

from export_helpers import VOCAB, write_corpus


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    """A tiny randomly initialized BERT with the production hidden size."""
    path = tmp_path_factory.mktemp("tiny-bert")
    (path / "vocab.txt").write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(path / "vocab.txt"), do_lower_case=True)
    tokenizer.save_pretrained(path)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=768,
        num_hidden_layers=1,
        num_attention_heads=4,
        intermediate_size=128,
        max_position_embeddings=64,
    )
    torch.manual_seed(0)
    BertModel(config).save_pretrained(path)
    return str(path)


@pytest.fixture
def three_paper_corpus(tmp_path):
    return write_corpus(
        tmp_path / "corpus.jsonl",
        [
            {"id": "p1", "title": "a study of things", "abstract": "about neural networks"},
            {"id": "p2", "title": "paper about graphs", "abstract": "a study of networks"},
            {"id": "p3", "title": "the study", "abstract": "of things and papers"},
        ],
    )
