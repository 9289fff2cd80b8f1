"""The trainable docid generator: a bag-of-tokens encoder feeding a
single-hidden-layer autoregressive decoder over the digit alphabet.

Parameters are plain float64 numpy arrays; the per-example forward/backward
runs on a pluggable kernel backend (compiled extension or numpy fallback).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import backends
from .corpus import Corpus, tokenize
from .data_builder import INDEX_TASK, TASK_PREFIX, TrainingExample
from .errors import ContractViolation, DependencyError, ParseError, TrainingDiverged
from .symbols import N_SYMBOLS, encode_target
from .trie import DocidTrie

TASK_INDEX_TOKEN = "[I]"
TASK_RETRIEVE_TOKEN = "[R]"

CHECKPOINT_MAGIC = b"GENRET-CKPT-v1\n"

PARAM_NAMES = ("tok_emb", "sym_emb", "W_h", "b_h", "W_o", "b_o")


@dataclass(frozen=True)
class ModelConfig:
    emb_dim: int = 64
    hidden_dim: int = 128
    max_positions: int = 64
    learning_rate: float = 1.0
    momentum: float = 0.9
    clip_norm: float = 5.0
    init_scale: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class TrainReport:
    step: int
    loss: float
    task_mix_counts: tuple[int, int]  # (index examples, retrieve examples)


@dataclass(eq=False)
class TinyGenModel:
    config: ModelConfig
    vocab: dict[str, int]
    tok_emb: np.ndarray
    sym_emb: np.ndarray
    W_h: np.ndarray
    b_h: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray
    step: int = 0
    backend: object = field(default=None, repr=False)
    velocity: dict[str, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.backend is None:
            self.backend = backends.get_backend()

    def params(self) -> list[tuple[str, np.ndarray]]:
        return [(name, getattr(self, name)) for name in PARAM_NAMES]

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.params()}

    def snapshot(self) -> "TinyGenModel":
        """Value copy of the parameters, safe to hand across threads."""
        arrays = {name: arr.copy() for name, arr in self.params()}
        return TinyGenModel(config=self.config, vocab=dict(self.vocab), step=self.step, **arrays)


def build_vocab(corpus: Corpus) -> dict[str, int]:
    """Task markers first, then the sorted corpus vocabulary."""
    vocab = {TASK_INDEX_TOKEN: 0, TASK_RETRIEVE_TOKEN: 1}
    terms = sorted({t for tokens in corpus.doc_tokens for t in tokens})
    for term in terms:
        vocab[term] = len(vocab)
    return vocab


def new_model(vocab: dict[str, int], config: ModelConfig = ModelConfig(), backend=None) -> TinyGenModel:
    rng = np.random.default_rng(config.seed)
    d, h, p = config.emb_dim, config.hidden_dim, config.max_positions
    scale = config.init_scale
    return TinyGenModel(
        config=config,
        vocab=dict(vocab),
        tok_emb=rng.normal(0.0, scale, (len(vocab), d)),
        sym_emb=rng.normal(0.0, scale, (N_SYMBOLS, d)),
        W_h=rng.normal(0.0, scale, (h, 2 * d + p)),
        b_h=np.zeros(h),
        W_o=rng.normal(0.0, scale, (N_SYMBOLS, h)),
        b_o=np.zeros(N_SYMBOLS),
        backend=backend,
    )


def input_token_ids(model: TinyGenModel, text: str) -> np.ndarray:
    """Vocabulary ids for an input string; the task prefix maps to its
    reserved token and out-of-vocabulary tokens are skipped."""
    ids: list[int] = []
    for task, prefix in TASK_PREFIX.items():
        if text.startswith(prefix):
            ids.append(model.vocab[TASK_INDEX_TOKEN if task == INDEX_TASK else TASK_RETRIEVE_TOKEN])
            text = text[len(prefix) :]
            break
    vocab = model.vocab
    ids.extend(vocab[t] for t in tokenize(text) if t in vocab)
    return np.asarray(ids, dtype=np.int64)


def encode(model: TinyGenModel, text: str) -> np.ndarray:
    """Mean token embedding through tanh; the zero vector for empty input."""
    return model.backend.encode(model.tok_emb, input_token_ids(model, text))


def step_logits(model: TinyGenModel, enc: np.ndarray, prev_symbol: int, position: int) -> np.ndarray:
    if not 0 <= position < model.config.max_positions:
        raise ContractViolation(f"position {position} outside [0, {model.config.max_positions})")
    return model.backend.step_logits(
        enc, prev_symbol, position, model.sym_emb, model.W_h, model.b_h, model.W_o, model.b_o
    )


def target_symbols(model: TinyGenModel, target: str) -> np.ndarray:
    try:
        syms = encode_target(target)
    except ValueError as exc:
        raise ContractViolation(str(exc)) from None
    if len(syms) > model.config.max_positions:
        raise ContractViolation(
            f"target needs {len(syms)} symbols but the decoder has {model.config.max_positions} positions"
        )
    return np.asarray(syms, dtype=np.int64)


def prepare_examples(model: TinyGenModel, batch) -> list[tuple[np.ndarray, np.ndarray, str]]:
    return [(input_token_ids(model, ex.input_text), target_symbols(model, ex.target), ex.task) for ex in batch]


def example_nll(model: TinyGenModel, example: TrainingExample) -> float:
    """Mean per-symbol NLL of one example under the current parameters."""
    token_idxs = input_token_ids(model, example.input_text)
    syms = target_symbols(model, example.target)
    return model.backend.example_nll(
        model.tok_emb, model.sym_emb, model.W_h, model.b_h, model.W_o, model.b_o, token_idxs, syms
    )


def _apply_update(model: TinyGenModel, grads: dict[str, np.ndarray]) -> None:
    sq = sum(float(np.sum(g * g)) for g in grads.values())
    if not np.isfinite(sq):
        raise TrainingDiverged("non-finite gradient norm")
    norm = np.sqrt(sq)
    clip = model.config.clip_norm
    clip_factor = clip / norm if norm > clip else 1.0
    beta = model.config.momentum
    if beta > 0.0 and model.velocity is None:
        model.velocity = model.zero_grads()
    for name, arr in model.params():
        update = clip_factor * grads[name]
        if beta > 0.0:
            vel = model.velocity[name]
            vel *= beta
            vel += update
            update = vel
        arr -= model.config.learning_rate * update


def train_step_prepared(model: TinyGenModel, prepared) -> TrainReport:
    grads = model.zero_grads()
    scale = 1.0 / len(prepared)
    total = 0.0
    n_index = 0
    for token_idxs, syms, task in prepared:
        total += model.backend.example_grads(
            model.tok_emb,
            model.sym_emb,
            model.W_h,
            model.b_h,
            model.W_o,
            model.b_o,
            token_idxs,
            syms,
            grads["tok_emb"],
            grads["sym_emb"],
            grads["W_h"],
            grads["b_h"],
            grads["W_o"],
            grads["b_o"],
            scale,
        )
        n_index += task == INDEX_TASK
    loss = total / len(prepared)
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite loss at step {model.step}")
    _apply_update(model, grads)
    model.step += 1
    return TrainReport(step=model.step, loss=loss, task_mix_counts=(n_index, len(prepared) - n_index))


def train_step(model: TinyGenModel, batch) -> TrainReport:
    """One clipped SGD update on a batch; loss is the batch-mean per-symbol NLL."""
    if not batch:
        raise ContractViolation("empty batch")
    return train_step_prepared(model, prepare_examples(model, batch))


def validate_targets(examples, trie: DocidTrie) -> None:
    """Every docid in every target must be a valid corpus id."""
    for ex in examples:
        for docid in ex.target.split(","):
            if not trie.contains(docid):
                raise ContractViolation(f"target docid {docid!r} is not in the corpus id map")


def train(
    model: TinyGenModel,
    examples,
    steps: int,
    batch_size: int,
    seed: int = 0,
    trie: DocidTrie | None = None,
) -> list[TrainReport]:
    """Seeded uniform-batch training loop; returns one report per step.

    Each call is one training phase: momentum state starts from zero so a
    later phase is not steered by the previous phase's velocity.
    """
    if not examples:
        raise ContractViolation("no training examples")
    if trie is not None:
        validate_targets(examples, trie)
    model.velocity = None
    prepared = prepare_examples(model, examples)
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(steps):
        idxs = rng.integers(0, len(prepared), size=batch_size)
        reports.append(train_step_prepared(model, [prepared[i] for i in idxs]))
    return reports


def gradient_check(
    model: TinyGenModel,
    example: TrainingExample,
    epsilon: float = 1e-5,
    n_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients
    over a seeded sample of parameter coordinates."""
    if not 1e-7 <= epsilon <= 1e-3:
        raise ContractViolation("epsilon must be in [1e-7, 1e-3]")
    token_idxs = input_token_ids(model, example.input_text)
    syms = target_symbols(model, example.target)
    grads = model.zero_grads()
    model.backend.example_grads(
        model.tok_emb,
        model.sym_emb,
        model.W_h,
        model.b_h,
        model.W_o,
        model.b_o,
        token_idxs,
        syms,
        grads["tok_emb"],
        grads["sym_emb"],
        grads["W_h"],
        grads["b_h"],
        grads["W_o"],
        grads["b_o"],
        1.0,
    )

    sizes = [(name, arr.size) for name, arr in model.params()]
    total = sum(size for _, size in sizes)
    rng = np.random.default_rng(seed)
    picked = rng.choice(total, size=min(n_coords, total), replace=False)

    def nll() -> float:
        return model.backend.example_nll(
            model.tok_emb, model.sym_emb, model.W_h, model.b_h, model.W_o, model.b_o, token_idxs, syms
        )

    worst = 0.0
    for flat in sorted(int(i) for i in picked):
        offset = flat
        for name, size in sizes:
            if offset < size:
                break
            offset -= size
        arr = getattr(model, name)
        view = arr.reshape(-1)
        original = view[offset]
        view[offset] = original + epsilon
        upper = nll()
        view[offset] = original - epsilon
        lower = nll()
        view[offset] = original
        fd = (upper - lower) / (2.0 * epsilon)
        analytic = grads[name].reshape(-1)[offset]
        rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)
        worst = max(worst, rel)
    return worst


def save_checkpoint(model: TinyGenModel, path) -> None:
    """Versioned binary file: magic, JSON header, little-endian float64 arrays."""
    header = {
        "config": {
            "emb_dim": model.config.emb_dim,
            "hidden_dim": model.config.hidden_dim,
            "max_positions": model.config.max_positions,
            "learning_rate": model.config.learning_rate,
            "clip_norm": model.config.clip_norm,
            "init_scale": model.config.init_scale,
            "seed": model.config.seed,
        },
        "step": model.step,
        "vocab": sorted(model.vocab, key=model.vocab.get),
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in model.params()],
    }
    with open(path, "wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write((json.dumps(header, ensure_ascii=False) + "\n").encode("utf-8"))
        for _, arr in model.params():
            handle.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path, backend=None) -> TinyGenModel:
    try:
        handle = open(path, "rb")
    except FileNotFoundError:
        raise DependencyError(f"missing checkpoint file: {path}") from None
    with handle:
        magic = handle.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ParseError(f"not a {CHECKPOINT_MAGIC.strip().decode()} file: {path}", 1)
        header = json.loads(handle.readline().decode("utf-8"))
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(handle.read(count * 8), dtype="<f8").astype(np.float64)
            arrays[spec["name"]] = data.reshape(shape).copy()
    config = ModelConfig(**header["config"])
    vocab = {term: i for i, term in enumerate(header["vocab"])}
    return TinyGenModel(config=config, vocab=vocab, step=header["step"], backend=backend, **arrays)
