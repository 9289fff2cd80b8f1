"""Pure numpy implementation of the decoder kernels.

This is the reference backend: the compiled extension in ``_core.pyx``
implements the same contract and must agree with it to float precision.
All arrays are float64; symbol ids are 0-9 digits, 10 comma, 11 EOS,
12 BOS (input-only).
"""

from __future__ import annotations

import numpy as np

from ..symbols import BOS

NAME = "python"


def encode(tok_emb: np.ndarray, token_idxs: np.ndarray) -> np.ndarray:
    """tanh of the mean token embedding; zero vector for empty input."""
    if len(token_idxs) == 0:
        return np.zeros(tok_emb.shape[1])
    return np.tanh(tok_emb[token_idxs].mean(axis=0))


def _forward(enc, symbols, sym_emb, W_h, b_h, W_o, b_o):
    d = sym_emb.shape[1]
    T = len(symbols)
    prev = np.empty(T, dtype=np.int64)
    prev[0] = BOS
    prev[1:] = symbols[:-1]
    base = W_h[:, :d] @ enc + b_h
    pre = base[None, :] + sym_emb[prev] @ W_h[:, d : 2 * d].T + W_h[:, 2 * d : 2 * d + T].T
    act = np.tanh(pre)
    logits = act @ W_o.T + b_o
    return prev, act, logits


def _nll_rows(logits: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    zmax = logits.max(axis=1)
    lse = zmax + np.log(np.exp(logits - zmax[:, None]).sum(axis=1))
    return lse - logits[np.arange(len(symbols)), symbols]


def example_nll(tok_emb, sym_emb, W_h, b_h, W_o, b_o, token_idxs, symbols) -> float:
    """Teacher-forced mean per-symbol negative log-likelihood of one example."""
    enc = encode(tok_emb, token_idxs)
    _, _, logits = _forward(enc, symbols, sym_emb, W_h, b_h, W_o, b_o)
    return float(_nll_rows(logits, symbols).mean())


def example_grads(
    tok_emb,
    sym_emb,
    W_h,
    b_h,
    W_o,
    b_o,
    token_idxs,
    symbols,
    g_tok,
    g_sym,
    g_Wh,
    g_bh,
    g_Wo,
    g_bo,
    scale: float,
) -> float:
    """Accumulate ``scale`` times the gradient of the example NLL; returns the NLL."""
    d = sym_emb.shape[1]
    T = len(symbols)
    enc = encode(tok_emb, token_idxs)
    prev, act, logits = _forward(enc, symbols, sym_emb, W_h, b_h, W_o, b_o)
    nll = float(_nll_rows(logits, symbols).mean())

    zmax = logits.max(axis=1, keepdims=True)
    expz = np.exp(logits - zmax)
    probs = expz / expz.sum(axis=1, keepdims=True)
    dlogits = probs
    dlogits[np.arange(T), symbols] -= 1.0
    dlogits *= scale / T

    g_Wo += dlogits.T @ act
    g_bo += dlogits.sum(axis=0)
    dact = dlogits @ W_o
    dpre = (1.0 - act * act) * dact

    g_Wh[:, :d] += np.outer(dpre.sum(axis=0), enc)
    g_Wh[:, d : 2 * d] += dpre.T @ sym_emb[prev]
    g_Wh[:, 2 * d : 2 * d + T] += dpre.T
    g_bh += dpre.sum(axis=0)
    np.add.at(g_sym, prev, dpre @ W_h[:, d : 2 * d])

    if len(token_idxs):
        denc = W_h[:, :d].T @ dpre.sum(axis=0)
        dmean = (1.0 - enc * enc) * denc / len(token_idxs)
        np.add.at(g_tok, token_idxs, dmean)
    return nll


def step_logits(enc, prev_symbol: int, position: int, sym_emb, W_h, b_h, W_o, b_o) -> np.ndarray:
    """Logits for the next symbol given the running decode state."""
    d = sym_emb.shape[1]
    pre = W_h[:, :d] @ enc + W_h[:, d : 2 * d] @ sym_emb[prev_symbol] + W_h[:, 2 * d + position] + b_h
    return W_o @ np.tanh(pre) + b_o
