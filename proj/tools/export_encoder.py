#!/usr/bin/env python3
"""Export a Hugging Face BERT checkpoint into the encoder cache layout.

Writes <cache>/<name>/{vocab.txt, encoder.json, weights.bin}. The cache
defaults to $ASTE_ENCODER_CACHE or ~/.cache/aste/encoders.

    python tools/export_encoder.py bert-base-uncased
    python tools/export_encoder.py ./local-bert --name my-bert
"""

import argparse
import json
import os
import struct
import sys
from pathlib import Path

import numpy as np


def cache_dir() -> Path:
    env = os.environ.get("ASTE_ENCODER_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "aste" / "encoders"


def write_tensors(path: Path, tensors: dict) -> None:
    with open(path, "wb") as out:
        out.write(struct.pack("<Q", len(tensors)))
        for name in sorted(tensors):
            m = np.ascontiguousarray(np.atleast_2d(tensors[name]), dtype="<f8")
            encoded = name.encode()
            out.write(struct.pack("<Q", len(encoded)))
            out.write(encoded)
            out.write(struct.pack("<QQ", m.shape[0], m.shape[1]))
            out.write(m.tobytes(order="C"))


def convert(state: dict, layers: int) -> dict:
    def get(key):
        return state[key].detach().cpu().double().numpy()

    def linear(prefix, w_name, b_name, out):
        out[w_name] = get(prefix + ".weight").T
        out[b_name] = get(prefix + ".bias")[None, :]

    def norm(prefix, stem, out):
        out[stem + ".g"] = get(prefix + ".weight")[None, :]
        out[stem + ".b"] = get(prefix + ".bias")[None, :]

    t = {
        "embeddings.word": get("embeddings.word_embeddings.weight"),
        "embeddings.position": get("embeddings.position_embeddings.weight"),
        "embeddings.type": get("embeddings.token_type_embeddings.weight"),
    }
    norm("embeddings.LayerNorm", "embeddings.ln", t)
    for l in range(layers):
        src = f"encoder.layer.{l}."
        dst = f"layer.{l}."
        linear(src + "attention.self.query", dst + "attn.wq", dst + "attn.bq", t)
        linear(src + "attention.self.key", dst + "attn.wk", dst + "attn.bk", t)
        linear(src + "attention.self.value", dst + "attn.wv", dst + "attn.bv", t)
        linear(src + "attention.output.dense", dst + "attn.wo", dst + "attn.bo", t)
        norm(src + "attention.output.LayerNorm", dst + "ln1", t)
        linear(src + "intermediate.dense", dst + "ffn.w1", dst + "ffn.b1", t)
        linear(src + "output.dense", dst + "ffn.w2", dst + "ffn.b2", t)
        norm(src + "output.LayerNorm", dst + "ln2", t)
    return t


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("model", help="Hub id or local directory of a BERT model")
    parser.add_argument("--name", help="Cache entry name (default: model id)")
    parser.add_argument("--cache", type=Path, default=None, help="Cache directory")
    args = parser.parse_args()

    from transformers import AutoTokenizer, BertModel

    model = BertModel.from_pretrained(args.model)
    tokenizer = AutoTokenizer.from_pretrained(args.model)
    cfg = model.config
    if cfg.hidden_act != "gelu":
        print(f"unsupported activation {cfg.hidden_act!r}", file=sys.stderr)
        return 1

    name = args.name or args.model.rstrip("/").split("/")[-1]
    target = (args.cache or cache_dir()) / name
    target.mkdir(parents=True, exist_ok=True)

    vocab = sorted(tokenizer.get_vocab().items(), key=lambda kv: kv[1])
    with open(target / "vocab.txt", "w", encoding="utf-8") as f:
        for token, _ in vocab:
            f.write(token + "\n")
    meta = {
        "hidden": cfg.hidden_size,
        "layers": cfg.num_hidden_layers,
        "heads": cfg.num_attention_heads,
        "ffn": cfg.intermediate_size,
        "max_positions": cfg.max_position_embeddings,
        "type_vocab": cfg.type_vocab_size,
        "ln_eps": cfg.layer_norm_eps,
        "lowercase": bool(getattr(tokenizer, "do_lower_case", True)),
    }
    (target / "encoder.json").write_text(json.dumps(meta, indent=2) + "\n")
    write_tensors(target / "weights.bin", convert(model.state_dict(), cfg.num_hidden_layers))
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
