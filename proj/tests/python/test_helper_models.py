"""Drives the model helper with tiny randomly initialised checkpoints built on
the fly, so every op runs without downloading weights. Values are meaningless;
only shapes, protocol and wiring are checked."""
import json
import os
import sys
from pathlib import Path

import pytest

tf = pytest.importorskip("transformers")
pytest.importorskip("torch")
Image = pytest.importorskip("PIL.Image")

import sgs
from sgs import hf_helper

GOLDEN = Path(os.environ.get("SGS_TEST_DATA", Path(__file__).resolve().parents[1] / "data")) / "golden"
VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "a", "man", "red", "desert", "photo", "of", "person"]
SMALL = dict(hidden_size=16, num_hidden_layers=1, num_attention_heads=2, intermediate_size=32)


@pytest.fixture(scope="module")
def models(tmp_path_factory):
    import torch

    torch.manual_seed(0)
    root = tmp_path_factory.mktemp("tiny")
    (root / "vocab.txt").write_text("\n".join(VOCAB))
    tok = tf.BertTokenizerFast(str(root / "vocab.txt"))
    text_cfg = dict(vocab_size=len(VOCAB), max_position_embeddings=32, **SMALL)
    vision_cfg = dict(image_size=32, patch_size=16, **SMALL)
    size = {"height": 32, "width": 32}

    tf.BertModel(tf.BertConfig(vocab_size=len(VOCAB), **SMALL)).save_pretrained(root / "enc")
    tok.save_pretrained(root / "enc")

    tf.ViTModel(tf.ViTConfig(**vision_cfg)).save_pretrained(root / "vit")
    tf.ViTImageProcessor(size=size).save_pretrained(root / "vit")

    clip_text = dict(text_cfg, bos_token_id=2, eos_token_id=3, pad_token_id=0)
    tf.CLIPModel(tf.CLIPConfig(text_config=clip_text, vision_config=vision_cfg, projection_dim=8)).save_pretrained(
        root / "clip")
    tf.CLIPProcessor(tf.CLIPImageProcessor(size={"shortest_edge": 32}, crop_size=size), tok).save_pretrained(
        root / "clip")

    blip_text = dict(text_cfg, bos_token_id=2, sep_token_id=3, pad_token_id=0)
    tf.BlipForConditionalGeneration(tf.BlipConfig(text_config=blip_text, vision_config=vision_cfg)).save_pretrained(
        root / "blip")
    tf.BlipProcessor(tf.BlipImageProcessor(size=size), tok).save_pretrained(root / "blip")

    Image.new("RGB", (40, 30), (200, 10, 10)).save(root / "img.png")
    return root


def call(req):
    reply = hf_helper.handle(json.dumps(req))
    assert reply["ok"], reply
    return reply


def test_ops(models):
    img = str(models / "img.png")
    assert len(call({"op": "embed", "model": str(models / "enc"), "text": "a man"})["vector"]) == 16
    assert len(call({"op": "vision_embed", "model": str(models / "vit"), "image": img})["vector"]) == 16
    assert len(call({"op": "embed_image", "model": str(models / "clip"), "image": img})["vector"]) == 8
    assert len(call({"op": "embed_text", "model": str(models / "clip"), "text": "a photo of a person"})["vector"]) == 8
    cap = call({"op": "caption", "model": str(models / "blip"), "image": img, "max_tokens": 4})
    assert cap["unit"] == "subword" and 0 < cap["tokens"] <= 4
    ans = call({"op": "answer", "model": str(models / "blip"), "fg": img, "bg": img, "prompt": "a photo of"})
    assert isinstance(ans["text"], str)


def test_missing_model_is_an_error_reply(models):
    reply = hf_helper.handle(json.dumps({"op": "embed", "model": str(models / "nope"), "text": "x"}))
    assert reply["ok"] is False


def test_cli_through_helper(models, tmp_path, monkeypatch):
    monkeypatch.setenv("SGS_PYTHON", sys.executable)
    out = tmp_path / "res.csv"
    code, _, err = sgs.cli_main(["--pairs-csv", str(GOLDEN / "pairs.csv"), "--captioner", str(models / "blip"),
                                 "--encoder", str(models / "enc"), "--max-tokens", "6", "--jobs", "2",
                                 "--out", str(out)])
    assert code == 0, err
    rows = sgs.read_rows(out)
    assert len(rows) == 10
    assert all(0.0 <= r.sts01 <= 1.0 and r.fg_text for r in rows)

    code, _, err = sgs.cli_main(["--mode", "baseline_gap", "--pairs-csv", str(GOLDEN / "pairs.csv"),
                                 "--joint-encoder", str(models / "clip"), "--out", str(tmp_path / "gap.csv")])
    assert code == 0, err
    code, _, err = sgs.cli_main(["--mode", "baseline_distance", "--pairs-csv", str(GOLDEN / "pairs.csv"),
                                 "--vision-encoder", str(models / "vit"), "--out", str(tmp_path / "dist.csv")])
    assert code == 0, err
    labels = [line.split(",")[-1] for line in (tmp_path / "dist.csv").read_text().splitlines()[1:]]
    assert len(labels) == 10
