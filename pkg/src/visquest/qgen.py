"""Question generation: feature encoding and a recurrent decoder.

The decoder is a single LSTM cell written out in numpy, trained by
teacher-forced gradient descent on the summed negative log likelihood of the
question tokens. Conditioning follows a fixed scheme: the concatenation
[f; sigma(v)] is projected into the initial hidden and cell states, and
sigma(v) is additionally concatenated to every step's token embedding so the
target word stays visible throughout decoding.

Gate layout is the standard four-gate form (input, forget, output,
candidate with sigmoid/sigmoid/sigmoid/tanh). The forget-gate bias starts
at 1, everything else uniform in [-0.08, 0.08], seeded.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, InvalidInputError
from .images import ensure_image
from .metrics import bleu
from .regions import Region

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

PAD, START, END, UNK = 0, 1, 2, 3
_RESERVED = ["<pad>", "<s>", "</s>", "<unk>"]


def tokenize(text: str) -> list:
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens) -> str:
    return " ".join(tokens)


@dataclass
class Vocabulary:
    tokens: list

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}

    @classmethod
    def from_sequences(cls, sequences) -> "Vocabulary":
        seen = set()
        for seq in sequences:
            seen.update(seq)
        return cls(tokens=_RESERVED + sorted(seen - set(_RESERVED)))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, tokens) -> list:
        return [self.index.get(t, UNK) for t in tokens]

    def decode(self, ids) -> list:
        return [self.tokens[i] for i in ids]


def spatial_vector(region: Region, image: np.ndarray) -> np.ndarray:
    """[x_tl/W, y_tl/H, x_br/W, y_br/H, area/(W*H)]."""
    image = ensure_image(image)
    h, w = image.shape[:2]
    if region.x_br > w or region.y_br > h:
        raise InvalidInputError("region extends outside the image")
    return np.array([region.x_tl / w, region.y_tl / h,
                     region.x_br / w, region.y_br / h,
                     region.area / (w * h)], dtype=np.float64)


def encode(image: np.ndarray, region: Region, extractor) -> np.ndarray:
    """f = [f_R, f_I, l_R]: region features, whole-image features, layout."""
    f_r = np.asarray(extractor(image, region), dtype=np.float64)
    f_i = np.asarray(extractor(image, None), dtype=np.float64)
    return np.concatenate([f_r, f_i, spatial_vector(region, image)])


@dataclass
class DecoderConfig:
    hidden: int = 64
    emb_dim: int = 32
    lr: float = 0.1
    steps: int = 2000
    batch_size: int = 32
    clip: float = 5.0
    seed: int = 0

    def validate(self):
        if self.hidden < 1 or self.emb_dim < 1 or self.batch_size < 1:
            raise ConfigError("hidden, emb_dim, batch_size must be positive")
        if self.lr <= 0 or self.steps < 1 or self.clip <= 0:
            raise ConfigError("lr, steps, clip must be positive")


@dataclass
class DecoderParams:
    vocab: Vocabulary
    cond_dim: int
    step_dim: int
    hidden: int
    emb_dim: int
    emb: np.ndarray        # (V, E)
    w_x: np.ndarray        # (E + step_dim, 4H)
    w_h: np.ndarray        # (H, 4H)
    b: np.ndarray          # (4H,)
    w_init_h: np.ndarray   # (cond_dim, H)
    b_init_h: np.ndarray   # (H,)
    w_init_c: np.ndarray   # (cond_dim, H)
    b_init_c: np.ndarray   # (H,)
    w_out: np.ndarray      # (H, V)
    b_out: np.ndarray      # (V,)
    meta: dict = field(default_factory=dict)

    _TENSORS = ("emb", "w_x", "w_h", "b", "w_init_h", "b_init_h",
                "w_init_c", "b_init_c", "w_out", "b_out")

    def tensors(self) -> dict:
        return {name: getattr(self, name) for name in self._TENSORS}


def init_params(vocab: Vocabulary, cond_dim: int, step_dim: int,
                config: DecoderConfig) -> DecoderParams:
    rng = np.random.default_rng(config.seed)
    h, e, v = config.hidden, config.emb_dim, len(vocab)

    def u(*shape):
        return rng.uniform(-0.08, 0.08, size=shape)

    b = u(4 * h)
    b[h:2 * h] = 1.0   # forget gate starts open
    return DecoderParams(
        vocab=vocab, cond_dim=cond_dim, step_dim=step_dim,
        hidden=h, emb_dim=e,
        emb=u(v, e), w_x=u(e + step_dim, 4 * h), w_h=u(h, 4 * h), b=b,
        w_init_h=u(cond_dim, h), b_init_h=u(h),
        w_init_c=u(cond_dim, h), b_init_c=u(h),
        w_out=u(h, v), b_out=u(v))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def decoder_step(params: DecoderParams, state, input_vector: np.ndarray):
    """One recurrent step; returns ((h', c'), logits)."""
    h_prev, c_prev = state
    hid = params.hidden
    z = input_vector @ params.w_x + h_prev @ params.w_h + params.b
    i = _sigmoid(z[..., :hid])
    f = _sigmoid(z[..., hid:2 * hid])
    o = _sigmoid(z[..., 2 * hid:3 * hid])
    g = np.tanh(z[..., 3 * hid:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    logits = h @ params.w_out + params.b_out
    return (h, c), logits


def initial_state(params: DecoderParams, cond: np.ndarray):
    h0 = np.tanh(cond @ params.w_init_h + params.b_init_h)
    c0 = np.tanh(cond @ params.w_init_c + params.b_init_c)
    return h0, c0


def _prep_batch(entries, vocab: Vocabulary):
    """Pad a list of (f, sigma_v, token ids) into dense training arrays."""
    b = len(entries)
    lengths = [len(ids) + 1 for _, _, ids in entries]   # +1 for the end token
    t_max = max(lengths)
    cond = np.stack([np.concatenate([f, sv]) for f, sv, _ in entries])
    step_cond = np.stack([np.asarray(sv, dtype=np.float64) for _, sv, _ in entries])
    inputs = np.full((b, t_max), PAD, dtype=np.int64)
    targets = np.full((b, t_max), PAD, dtype=np.int64)
    mask = np.zeros((b, t_max))
    for row, (_, _, ids) in enumerate(entries):
        inputs[row, 0] = START
        inputs[row, 1:len(ids) + 1] = ids
        targets[row, :len(ids)] = ids
        targets[row, len(ids)] = END
        mask[row, :len(ids) + 1] = 1.0
    return cond, step_cond, inputs, targets, mask


def _forward_backward(params: DecoderParams, batch):
    """Summed NLL over the batch plus gradients of that sum."""
    cond, step_cond, inputs, targets, mask = batch
    b, t_max = inputs.shape
    hid = params.hidden

    pre_h = cond @ params.w_init_h + params.b_init_h
    pre_c = cond @ params.w_init_c + params.b_init_c
    h = np.tanh(pre_h)
    c = np.tanh(pre_c)
    h0, c0 = h, c

    cache = []
    loss = 0.0
    for t in range(t_max):
        ids = inputs[:, t]
        x = np.concatenate([params.emb[ids], step_cond], axis=1)
        h_prev, c_prev = h, c
        z = x @ params.w_x + h_prev @ params.w_h + params.b
        i = _sigmoid(z[:, :hid])
        f = _sigmoid(z[:, hid:2 * hid])
        o = _sigmoid(z[:, 2 * hid:3 * hid])
        g = np.tanh(z[:, 3 * hid:])
        c_new = f * c_prev + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        m = mask[:, t:t + 1]
        # carry the previous state through padded steps so gradients stay exact
        h = m * h_new + (1.0 - m) * h_prev
        c = m * c_new + (1.0 - m) * c_prev
        logits = h_new @ params.w_out + params.b_out
        shifted = logits - logits.max(axis=1, keepdims=True)
        expdd = np.exp(shifted)
        probs = expdd / expdd.sum(axis=1, keepdims=True)
        tgt = targets[:, t]
        tok_nll = -np.log(probs[np.arange(b), tgt] + 1e-300)
        loss += float((tok_nll * mask[:, t]).sum())
        cache.append((ids, x, h_prev, c_prev, i, f, o, g, c_new, tanh_c, probs, m))

    grads = {name: np.zeros_like(tensor) for name, tensor in params.tensors().items()}
    dh_next = np.zeros((b, hid))
    dc_next = np.zeros((b, hid))
    for t in range(t_max - 1, -1, -1):
        ids, x, h_prev, c_prev, i, f, o, g, c_new, tanh_c, probs, m = cache[t]
        dlogits = probs.copy()
        dlogits[np.arange(b), targets[:, t]] -= 1.0
        dlogits *= mask[:, t:t + 1]
        h_new = o * tanh_c
        grads["w_out"] += h_new.T @ dlogits
        grads["b_out"] += dlogits.sum(axis=0)
        dh_new = dlogits @ params.w_out.T + dh_next * m
        dc_new = dc_next * m
        dh_prev_carry = dh_next * (1.0 - m)
        dc_prev_carry = dc_next * (1.0 - m)

        do = dh_new * tanh_c
        dc_new = dc_new + dh_new * o * (1.0 - tanh_c ** 2)
        di = dc_new * g
        df = dc_new * c_prev
        dg = dc_new * i
        dc_prev = dc_new * f + dc_prev_carry

        dz = np.concatenate([di * i * (1.0 - i),
                             df * f * (1.0 - f),
                             do * o * (1.0 - o),
                             dg * (1.0 - g ** 2)], axis=1)
        grads["w_x"] += x.T @ dz
        grads["w_h"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dx = dz @ params.w_x.T
        np.add.at(grads["emb"], ids, dx[:, :params.emb_dim])
        dh_next = dz @ params.w_h.T + dh_prev_carry
        dc_next = dc_prev

    dpre_h = dh_next * (1.0 - h0 ** 2)
    dpre_c = dc_next * (1.0 - c0 ** 2)
    grads["w_init_h"] += cond.T @ dpre_h
    grads["b_init_h"] += dpre_h.sum(axis=0)
    grads["w_init_c"] += cond.T @ dpre_c
    grads["b_init_c"] += dpre_c.sum(axis=0)
    return loss, float(mask.sum()), grads


def batch_loss(params: DecoderParams, batch) -> float:
    loss, _, _ = _forward_backward(params, batch)
    return loss


def gradient_check(params: DecoderParams, batch, h: float = 1e-5) -> float:
    """Max relative error of analytic vs central-difference gradients."""
    _, _, grads = _forward_backward(params, batch)
    worst = 0.0
    for name, tensor in params.tensors().items():
        flat = tensor.reshape(-1)
        gflat = grads[name].reshape(-1)
        for k in range(flat.shape[0]):
            orig = flat[k]
            flat[k] = orig + h
            up = batch_loss(params, batch)
            flat[k] = orig - h
            down = batch_loss(params, batch)
            flat[k] = orig
            fd = (up - down) / (2 * h)
            # denominator floor: below ~1e-4 the quotient measures central-
            # difference roundoff (eps*|loss|/2h ~ 1e-10), not gradient error
            err = abs(gflat[k] - fd) / max(1e-4, abs(gflat[k]) + abs(fd))
            worst = max(worst, err)
    return worst


def _encode_corpus(corpus, vocab: Vocabulary | None):
    if not corpus:
        raise DataError("empty training corpus")
    sequences = [tokens for _, _, tokens in corpus]
    if vocab is None:
        vocab = Vocabulary.from_sequences(sequences)
    else:
        for seq in sequences:
            missing = [t for t in seq if t not in vocab]
            if missing:
                raise DataError(f"tokens not in vocabulary: {missing[:5]}")
    entries = []
    for f, sv, tokens in corpus:
        f = np.asarray(f, dtype=np.float64)
        sv = np.asarray(sv, dtype=np.float64)
        entries.append((f, sv, vocab.encode(tokens)))
    return vocab, entries


def train_decoder(corpus, config: DecoderConfig | None = None,
                  vocab: Vocabulary | None = None) -> DecoderParams:
    """Teacher-forced gradient descent on summed question NLL.

    corpus entries are (f, sigma_v, tokens). Deterministic for a fixed seed
    regardless of later use; the vocabulary is built from the corpus when
    not supplied.
    """
    config = config or DecoderConfig()
    config.validate()
    vocab, entries = _encode_corpus(corpus, vocab)
    f0, sv0, _ = entries[0]
    cond_dim = f0.shape[0] + sv0.shape[0]
    for f, sv, _ in entries:
        if f.shape[0] + sv.shape[0] != cond_dim or sv.shape[0] != sv0.shape[0]:
            raise DataError("inconsistent feature dimensions in corpus")
    params = init_params(vocab, cond_dim, sv0.shape[0], config)

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(entries))
    cursor = 0
    history = []
    names = list(params.tensors().keys())
    for _ in range(config.steps):
        take = min(config.batch_size, len(entries))
        if cursor + take > len(entries):
            order = rng.permutation(len(entries))
            cursor = 0
        batch_entries = [entries[j] for j in order[cursor:cursor + take]]
        cursor += take
        batch = _prep_batch(batch_entries, vocab)
        loss, tokens, grads = _forward_backward(params, batch)
        history.append(loss / tokens)
        for name in names:
            grads[name] /= take
        norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
        scale = config.clip / norm if norm > config.clip else 1.0
        for name in names:
            getattr(params, name).__isub__(config.lr * scale * grads[name])
    params.meta = {
        "hidden": config.hidden, "emb_dim": config.emb_dim, "lr": config.lr,
        "steps": config.steps, "batch_size": config.batch_size,
        "clip": config.clip, "seed": config.seed,
        "vocab_size": len(vocab), "cond_dim": cond_dim,
        "step_dim": sv0.shape[0], "loss_history": history,
    }
    return params


def per_token_ce(params: DecoderParams, corpus) -> float:
    """Mean teacher-forced cross-entropy per token, in nats."""
    _, entries = _encode_corpus(corpus, params.vocab)
    batch = _prep_batch(entries, params.vocab)
    loss, tokens, _ = _forward_backward(params, batch)
    return loss / tokens


@dataclass
class QuestionRecord:
    tokens: list
    text: str
    mode: str
    image_id: str | None = None
    region: Region | None = None
    target_word: str | None = None
    model_version: str = "0"

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "region": list(self.region.as_tuple()) if self.region else None,
            "target_word": self.target_word,
            "tokens": list(self.tokens),
            "text": self.text,
            "mode": self.mode,
            "model_version": self.model_version,
        }


def _log_probs(params, state, token_id, step_cond):
    x = np.concatenate([params.emb[token_id], step_cond])
    state, logits = decoder_step(params, state, x)
    shifted = logits - logits.max()
    logp = shifted - np.log(np.exp(shifted).sum())
    return state, logp


def _greedy(params, cond, step_cond, max_len):
    state = initial_state(params, cond)
    tokens = []
    token = START
    for _ in range(max_len):
        state, logp = _log_probs(params, state, token, step_cond)
        token = int(np.argmax(logp))
        if token == END:
            break
        tokens.append(token)
    return tokens


def _beam(params, cond, step_cond, width, max_len):
    state = initial_state(params, cond)
    active = [(0.0, [], state)]          # (cum logp, emitted ids, state)
    done = []                            # (cum logp, emitted ids, n scored steps)
    for _ in range(max_len):
        if not active:
            break
        candidates = []
        for cum, toks, st in active:
            last = toks[-1] if toks else START
            new_state, logp = _log_probs(params, st, last, step_cond)
            ranked = sorted(range(logp.shape[0]), key=lambda j: (-logp[j], j))[:width]
            for tok in ranked:
                candidates.append((cum + float(logp[tok]), toks, new_state, tok))
        candidates.sort(key=lambda cand: (-cand[0], tuple(cand[1] + [cand[3]])))
        active = []
        for cum, toks, st, tok in candidates[:width]:
            if tok == END:
                done.append((cum, toks, len(toks) + 1))
            else:
                active.append((cum, toks + [tok], st))
    for cum, toks, _ in active:
        done.append((cum, toks, max(len(toks), 1)))
    best = min(done, key=lambda d: (-(d[0] / d[2]), tuple(d[1])))
    return best[1]


def generate_question(params: DecoderParams, f: np.ndarray, sigma_v: np.ndarray,
                      mode: str = "greedy", beam_width: int = 3,
                      max_len: int = 20, **record_fields) -> QuestionRecord:
    f = np.asarray(f, dtype=np.float64)
    sigma_v = np.asarray(sigma_v, dtype=np.float64)
    cond = np.concatenate([f, sigma_v])
    if cond.shape[0] != params.cond_dim or sigma_v.shape[0] != params.step_dim:
        raise InvalidInputError("feature dimensions do not match the model")
    if mode == "greedy":
        ids = _greedy(params, cond, sigma_v, max_len)
    elif mode == "beam":
        if beam_width < 1:
            raise ConfigError("beam width must be >= 1")
        ids = _beam(params, cond, sigma_v, beam_width, max_len)
    else:
        raise ConfigError(f"unknown generation mode {mode!r}")
    tokens = params.vocab.decode(ids)
    return QuestionRecord(tokens=tokens, text=detokenize(tokens),
                          mode=mode if mode == "greedy" else f"beam({beam_width})",
                          model_version=str(params.meta.get("seed", 0)),
                          **record_fields)


def template_question(target_word: str, **record_fields) -> QuestionRecord:
    """Fallback generator used when no trained decoder is available."""
    if not target_word or not target_word.strip():
        raise InvalidInputError("target word must be nonempty")
    tokens = tokenize(f"what is this {target_word} ?")
    return QuestionRecord(tokens=tokens, text=detokenize(tokens), mode="template",
                          target_word=target_word, **record_fields)


def cnn_lstm_baseline(params_b: DecoderParams, f_i: np.ndarray,
                      mode: str = "greedy", max_len: int = 20,
                      **record_fields) -> QuestionRecord:
    """Whole-image-only generation; the baseline ignores region and word."""
    if params_b.step_dim != 0:
        raise ConfigError("baseline decoder must be trained without sigma(v)")
    record = generate_question(params_b, f_i, np.zeros(0), mode=mode,
                               max_len=max_len, **record_fields)
    record.mode = f"cnn-lstm-{record.mode}"
    return record


def retrieval_baseline(query_f_r: np.ndarray, index, m: int,
                       max_n: int = 4) -> QuestionRecord:
    """Consensus question among the m nearest regions by cosine similarity."""
    if m < 2:
        raise ConfigError("retrieval consensus needs m >= 2")
    if not index:
        raise InvalidInputError("empty retrieval index")
    if m > len(index):
        raise InvalidInputError("m exceeds index size")
    query = np.asarray(query_f_r, dtype=np.float64)
    qn = np.linalg.norm(query)
    sims = []
    for pos, (feat, _) in enumerate(index):
        feat = np.asarray(feat, dtype=np.float64)
        denom = qn * np.linalg.norm(feat)
        sims.append((feat @ query / denom if denom > 0 else 0.0, pos))
    nearest = sorted(sims, key=lambda s: (-s[0], s[1]))[:m]
    questions = []
    for _, pos in nearest:
        q = index[pos][1]
        questions.append(tokenize(q) if isinstance(q, str) else list(q))
    best_idx = 0
    best_score = -1.0
    for i, cand in enumerate(questions):
        others = [q for j, q in enumerate(questions) if j != i and len(q) > 0]
        if not others or len(cand) == 0:
            score = 0.0
        else:
            score = sum(bleu(cand, [ref], max_n) for ref in others) / len(others)
        if score > best_score:
            best_score = score
            best_idx = i
    tokens = questions[best_idx]
    return QuestionRecord(tokens=tokens, text=detokenize(tokens), mode="retrieval")


def save_decoder(params: DecoderParams, path) -> None:
    arrays = {name: tensor for name, tensor in params.tensors().items()}
    meta = {"vocab": params.vocab.tokens, "cond_dim": params.cond_dim,
            "step_dim": params.step_dim, "hidden": params.hidden,
            "emb_dim": params.emb_dim, "meta": params.meta}
    np.savez_compressed(path, _meta=np.frombuffer(
        json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_decoder(path) -> DecoderParams:
    try:
        data = np.load(path)
    except (FileNotFoundError, ValueError) as exc:
        raise DataError(f"cannot load decoder model: {exc}")
    meta = json.loads(bytes(data["_meta"]).decode())
    return DecoderParams(
        vocab=Vocabulary(tokens=meta["vocab"]),
        cond_dim=meta["cond_dim"], step_dim=meta["step_dim"],
        hidden=meta["hidden"], emb_dim=meta["emb_dim"],
        meta=meta["meta"],
        **{name: data[name] for name in DecoderParams._TENSORS})
