#!/usr/bin/env python3
"""Convert a Hugging Face LLaMA checkpoint into a halo model directory.

Writes config.json and weights.halo, and optionally a vocabulary file for
--tokenizer. Grouped-query attention and biased projections are rejected.

The vocabulary export maps SentencePiece pieces to plain text ("▁" becomes
a space, <0xNN> pieces become raw bytes). halo encodes greedily by longest
match, so token boundaries can differ from the original tokenizer.
"""

import argparse
import json
import pathlib
import struct
import sys

import numpy as np

MAGIC = b"HALOTNSR"


def write_bundle(path, tensors, dtype):
    le = "<f2" if dtype == "f16" else "<f4"
    header, offset, blobs = {}, 0, []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=le)
        header[name] = {"dtype": dtype, "shape": list(arr.shape), "offset": offset}
        blob = arr.tobytes()
        blobs.append((offset, blob))
        offset = (offset + len(blob) + 7) & ~7
    text = json.dumps(header, separators=(",", ":")).encode()
    text += b" " * ((8 - len(text) % 8) % 8)
    payload = bytearray(offset)
    for start, blob in blobs:
        payload[start:start + len(blob)] = blob
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(text)))
        f.write(text)
        f.write(payload)


def unpermute(w, n_heads):
    # Hugging Face stores q/k rows in rotate-half order; halo rotates
    # adjacent pairs, which is the original layout.
    out_dim, in_dim = w.shape
    head_dim = out_dim // n_heads
    return (w.reshape(n_heads, 2, head_dim // 2, in_dim)
             .transpose(0, 2, 1, 3)
             .reshape(out_dim, in_dim))


def convert_state(state, cfg):
    n_heads = cfg["num_attention_heads"]
    n_kv = cfg.get("num_key_value_heads") or n_heads
    if n_kv != n_heads:
        raise SystemExit(f"grouped-query attention ({n_kv} kv heads, {n_heads} heads) is not supported")
    if cfg.get("attention_bias") or cfg.get("mlp_bias"):
        raise SystemExit("biased projections are not supported")
    if cfg.get("rope_scaling"):
        raise SystemExit("rope scaling is not supported")
    hidden = cfg["hidden_size"]
    head_dim = cfg.get("head_dim") or hidden // n_heads
    if head_dim * n_heads != hidden:
        raise SystemExit("head_dim * num_attention_heads must equal hidden_size")

    def get(name):
        return np.asarray(state[name], dtype=np.float32)

    out = {
        "tok_embeddings": get("model.embed_tokens.weight"),
        "norm": get("model.norm.weight"),
    }
    if "lm_head.weight" in state:
        out["output"] = get("lm_head.weight")
    else:
        out["output"] = out["tok_embeddings"].copy()
    for i in range(cfg["num_hidden_layers"]):
        p = f"model.layers.{i}."
        q = f"layers.{i}."
        out[q + "attention_norm"] = get(p + "input_layernorm.weight")
        out[q + "attention.wq"] = unpermute(get(p + "self_attn.q_proj.weight"), n_heads)
        out[q + "attention.wk"] = unpermute(get(p + "self_attn.k_proj.weight"), n_heads)
        out[q + "attention.wv"] = get(p + "self_attn.v_proj.weight")
        out[q + "attention.wo"] = get(p + "self_attn.o_proj.weight")
        out[q + "ffn_norm"] = get(p + "post_attention_layernorm.weight")
        out[q + "feed_forward.w1"] = get(p + "mlp.gate_proj.weight")
        out[q + "feed_forward.w3"] = get(p + "mlp.up_proj.weight")
        out[q + "feed_forward.w2"] = get(p + "mlp.down_proj.weight")

    rope_theta = cfg.get("rope_theta")
    if rope_theta is None:
        rope_theta = (cfg.get("rope_parameters") or {}).get("rope_theta", 10000.0)
    config = {
        "n_layers": cfg["num_hidden_layers"],
        "hidden_size": hidden,
        "n_heads": n_heads,
        "head_dim": head_dim,
        "vocab_size": cfg["vocab_size"],
        "ffn_hidden": cfg["intermediate_size"],
        "rope_theta": float(rope_theta),
        "norm_epsilon": float(cfg.get("rms_norm_eps", 1e-6)),
        "max_seq_len": cfg.get("max_position_embeddings", 2048),
    }
    return config, out


def convert_model(model, out_dir, dtype="f32"):
    """Converts an in-memory transformers LlamaForCausalLM."""
    cfg = model.config.to_dict()
    state = {k: v.detach().float().cpu().numpy() for k, v in model.state_dict().items()}
    if getattr(model.config, "tie_word_embeddings", False):
        state.pop("lm_head.weight", None)
    config, tensors = convert_state(state, cfg)
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    write_bundle(out_dir / "weights.halo", tensors, dtype)
    return config


def export_vocab(tokenizer, path):
    entries, seen = [], set()
    for piece, idx in sorted(tokenizer.get_vocab().items(), key=lambda kv: kv[1]):
        if piece.startswith("<0x") and piece.endswith(">") and len(piece) == 6:
            text = bytes([int(piece[3:5], 16)]).decode("latin-1")
        elif piece in tokenizer.all_special_tokens:
            continue
        else:
            text = piece.replace("▁", " ")
        if text in seen or not text:
            continue
        seen.add(text)
        entries.append([text, idx])
    pathlib.Path(path).write_text(json.dumps(entries, ensure_ascii=False) + "\n")
    return len(entries)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("checkpoint", help="local path or hub id of a LLaMA checkpoint")
    ap.add_argument("out", help="output model directory")
    ap.add_argument("--dtype", choices=["f32", "f16"], default="f16")
    ap.add_argument("--vocab", help="also write a vocabulary JSON for --tokenizer")
    args = ap.parse_args(argv)

    from transformers import AutoTokenizer, LlamaForCausalLM

    model = LlamaForCausalLM.from_pretrained(args.checkpoint, torch_dtype="float32")
    config = convert_model(model, args.out, args.dtype)
    print(f"wrote {args.out}: {config['n_layers']} layers, hidden {config['hidden_size']}, "
          f"vocab {config['vocab_size']}", file=sys.stderr)
    if args.vocab:
        n = export_vocab(AutoTokenizer.from_pretrained(args.checkpoint), args.vocab)
        print(f"wrote {args.vocab}: {n} entries", file=sys.stderr)


if __name__ == "__main__":
    main()
