import importlib.util
import pathlib

import numpy as np
import pytest

import halo

torch = pytest.importorskip("torch")
transformers = pytest.importorskip("transformers")

TOOL = pathlib.Path(__file__).resolve().parents[2] / "tools" / "convert_hf_llama.py"


def load_tool():
    spec = importlib.util.spec_from_file_location("convert_hf_llama", TOOL)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


@pytest.mark.parametrize("tied", [False, True])
def test_logits_match_transformers(tmp_path, tied):
    torch.manual_seed(0)
    cfg = transformers.LlamaConfig(
        vocab_size=300, hidden_size=32, intermediate_size=80, num_hidden_layers=2,
        num_attention_heads=4, num_key_value_heads=4, max_position_embeddings=64,
        rms_norm_eps=1e-5, tie_word_embeddings=tied)
    model = transformers.LlamaForCausalLM(cfg).eval()
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("norm.weight"):
                p.add_(0.1 * torch.randn_like(p))
    load_tool().convert_model(model, tmp_path)

    tokens = [int(t) for t in torch.randint(0, 300, (17,))]
    with torch.no_grad():
        expect = model(torch.tensor([tokens])).logits[0].numpy()
    engine = halo.Engine(str(tmp_path), None)
    logits, _ = engine.forward(tokens, logits="all")
    assert logits.shape == expect.shape
    np.testing.assert_allclose(logits, expect, atol=1e-4, rtol=1e-4)


def test_grouped_query_attention_is_rejected(tmp_path):
    cfg = transformers.LlamaConfig(
        vocab_size=32, hidden_size=32, intermediate_size=64, num_hidden_layers=1,
        num_attention_heads=4, num_key_value_heads=2)
    model = transformers.LlamaForCausalLM(cfg)
    with pytest.raises(SystemExit):
        load_tool().convert_model(model, tmp_path)
