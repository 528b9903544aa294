import pytest
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import BertNormalizer
from tokenizers.pre_tokenizers import Whitespace
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "ein", "##stein", "was", "born", "in", "ulm", "germany", "the", "of",
    "city", "grew", "around", "a", "position", "for", "2009", "is",
    "defend", "##er", "river", "tower", "claim", "about", "things",
]


def _tokenizer():
    tk = Tokenizer(WordPiece({w: i for i, w in enumerate(VOCAB)},
                             unk_token="[UNK]"))
    tk.normalizer = BertNormalizer(lowercase=True)
    tk.pre_tokenizer = Whitespace()
    tk.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", VOCAB.index("[CLS]")),
                        ("[SEP]", VOCAB.index("[SEP]"))])
    return PreTrainedTokenizerFast(
        tokenizer_object=tk, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]")


@pytest.fixture(scope="session")
def tiny_encoder(tmp_path_factory):
    """A small randomly initialized encoder saved to disk; no downloads."""
    d = tmp_path_factory.mktemp("encoder")
    tokenizer = _tokenizer()
    cfg = BertConfig(vocab_size=len(VOCAB), hidden_size=16,
                     num_hidden_layers=1, num_attention_heads=2,
                     intermediate_size=32, max_position_embeddings=128)
    torch.manual_seed(7)
    model = BertModel(cfg)
    model.eval()
    model.save_pretrained(str(d))
    tokenizer.save_pretrained(str(d))
    return str(d), model, tokenizer
