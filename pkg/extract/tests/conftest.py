from __future__ import annotations

import pytest


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A two-layer causal transformer plus fast word-level tokenizer, saved locally."""
    import torch
    from tokenizers import Tokenizer, models, pre_tokenizers
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    words = (
        "Question Answer : ? . , = + the a is of and to rumor people cycles "
        "friends three five total so answer we get therefore sum it "
        "2 3 4 5 7 9 27 81 243 363 405 x"
    ).split()
    vocab = {"[UNK]": 0, "[PAD]": 1}
    for word in words:
        vocab.setdefault(word, len(vocab))

    tokenizer = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tokenizer.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tokenizer, unk_token="[UNK]", pad_token="[PAD]"
    )

    torch.manual_seed(1234)
    config = GPT2Config(
        vocab_size=len(vocab), n_positions=256, n_embd=32, n_layer=2, n_head=2
    )
    model = GPT2LMHeadModel(config)
    model.eval()

    out = tmp_path_factory.mktemp("tiny-causal-lm")
    model.save_pretrained(out)
    fast.save_pretrained(out)
    return str(out)
