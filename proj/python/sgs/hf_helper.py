"""Model adapter process for sgs-check.

Reads one JSON request per line on stdin and answers with one JSON line on
stdout: {"ok": true, ...} or {"ok": false, "error": "..."}. Models are loaded
on first use and kept for the life of the process.

Ops:
  caption       image, max_tokens  -> text, tokens, unit
  embed         text               -> vector   (sentence encoder, mean pooled)
  embed_image   image              -> vector   (CLIP-style joint encoder)
  embed_text    text               -> vector
  vision_embed  image              -> vector   (pooled vision backbone features)
  answer        fg, bg, prompt     -> text     (VLM; both crops side by side)
"""

import json
import sys
import traceback

_models = {}


def _torch():
    import torch

    torch.set_grad_enabled(False)
    return torch


def _image(path):
    from PIL import Image

    with Image.open(path) as im:
        return im.convert("RGB")


def _features(out):
    # Older transformers return a tensor, newer ones an output with the
    # projected embedding in pooler_output.
    return out if hasattr(out, "tolist") else out.pooler_output


def _vision2seq(tf):
    for name in ("AutoModelForImageTextToText", "AutoModelForVision2Seq"):
        if hasattr(tf, name):
            return getattr(tf, name)
    raise RuntimeError("this transformers version has no image-to-text auto class")


def _load(kind, model_id):
    key = (kind, model_id)
    if key in _models:
        return _models[key]
    import transformers as tf

    if kind == "caption":
        proc = tf.AutoProcessor.from_pretrained(model_id)
        try:
            model = _vision2seq(tf).from_pretrained(model_id)
        except ValueError:
            model = tf.BlipForConditionalGeneration.from_pretrained(model_id)
    elif kind == "embed":
        proc = tf.AutoTokenizer.from_pretrained(model_id)
        model = tf.AutoModel.from_pretrained(model_id)
    elif kind == "joint":
        proc = tf.AutoProcessor.from_pretrained(model_id)
        model = tf.AutoModel.from_pretrained(model_id)
    elif kind == "vision":
        proc = tf.AutoImageProcessor.from_pretrained(model_id)
        model = tf.AutoModel.from_pretrained(model_id)
    elif kind == "vlm":
        proc = tf.AutoProcessor.from_pretrained(model_id)
        model = _vision2seq(tf).from_pretrained(model_id)
    else:
        raise ValueError("unknown model kind " + kind)
    model.float().eval()
    _models[key] = (proc, model)
    return proc, model


def caption(req):
    _torch()
    proc, model = _load("caption", req["model"])
    inputs = proc(images=_image(req["image"]), return_tensors="pt")
    out = model.generate(**inputs, max_new_tokens=int(req.get("max_tokens", 16)), do_sample=False)
    ids = out[0]
    prompt_len = inputs["input_ids"].shape[1] if "input_ids" in inputs else 0
    new_ids = ids[prompt_len:]
    text = proc.decode(new_ids, skip_special_tokens=True).strip()
    special = set(getattr(proc.tokenizer, "all_special_ids", []))
    tokens = sum(1 for t in new_ids.tolist() if t not in special)
    return {"text": text, "tokens": tokens, "unit": "subword"}


def embed(req):
    torch = _torch()
    tok, model = _load("embed", req["model"])
    batch = tok([req["text"]], padding=True, truncation=True, return_tensors="pt")
    hidden = model(**batch).last_hidden_state
    mask = batch["attention_mask"].unsqueeze(-1).to(hidden.dtype)
    pooled = (hidden * mask).sum(1) / mask.sum(1).clamp(min=1e-9)
    return {"vector": torch.nn.functional.normalize(pooled, dim=-1)[0].tolist()}


def embed_image(req):
    _torch()
    proc, model = _load("joint", req["model"])
    feats = _features(model.get_image_features(**proc(images=_image(req["image"]), return_tensors="pt")))
    return {"vector": feats[0].tolist()}


def embed_text(req):
    _torch()
    proc, model = _load("joint", req["model"])
    feats = _features(model.get_text_features(**proc(text=[req["text"]], return_tensors="pt", padding=True)))
    return {"vector": feats[0].tolist()}


def vision_embed(req):
    _torch()
    proc, model = _load("vision", req["model"])
    out = model(**proc(images=_image(req["image"]), return_tensors="pt"))
    pooled = getattr(out, "pooler_output", None)
    if pooled is None:
        pooled = out.last_hidden_state[:, 0]
    return {"vector": pooled[0].tolist()}


def answer(req):
    _torch()
    from PIL import Image

    proc, model = _load("vlm", req["model"])
    fg, bg = _image(req["fg"]), _image(req["bg"])
    canvas = Image.new("RGB", (fg.width + bg.width, max(fg.height, bg.height)))
    canvas.paste(fg, (0, 0))
    canvas.paste(bg, (fg.width, 0))
    prompt = req["prompt"] + " (The first image is on the left, the second on the right.)"
    inputs = proc(images=canvas, text=prompt, return_tensors="pt")
    out = model.generate(**inputs, max_new_tokens=8, do_sample=False)
    encdec = getattr(model.config, "is_encoder_decoder", False)
    prompt_len = 0 if encdec or "input_ids" not in inputs else inputs["input_ids"].shape[1]
    text = proc.decode(out[0][prompt_len:], skip_special_tokens=True).strip()
    return {"text": text}


OPS = {
    "caption": caption,
    "embed": embed,
    "embed_image": embed_image,
    "embed_text": embed_text,
    "vision_embed": vision_embed,
    "answer": answer,
}


def handle(line):
    try:
        req = json.loads(line)
        op = OPS.get(req.get("op"))
        if op is None:
            return {"ok": False, "error": "unsupported op %r" % req.get("op")}
        reply = op(req)
        reply["ok"] = True
        return reply
    except Exception as e:  # reported per request; the process stays up
        traceback.print_exc(file=sys.stderr)
        return {"ok": False, "error": "%s: %s" % (type(e).__name__, e)}


def main():
    for line in sys.stdin:
        if not line.strip():
            continue
        sys.stdout.write(json.dumps(handle(line)) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
