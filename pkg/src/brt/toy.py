"""Desk-scale synthetic transduction task and a minimal trainable transducer.

Each utterance is a sequence of token spans; frame features are the one-hot
identity of the token being spoken plus Gaussian noise. The model encodes
each frame (optionally stacked with neighbouring frames), embeds the
previous label, joins both through one tanh layer and outputs ``V+1``
logits.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import BLANK, ContractViolation, check_sequences
from .alignment import emission_times, viterbi_align
from .decoder import EarlyStopConfig, beam_search
from .loss import brt_loss
from .metrics import drift_latency, mean_df, overall_latency, wer
from .numerics import log_softmax
from .risk import RiskSpec, Variant

logger = logging.getLogger(__name__)

PARAM_NAMES = ("W_enc", "E", "W_je", "W_jp", "b_j", "W_o", "b_o")


@dataclass(frozen=True)
class ToyUtterance:
    features: np.ndarray
    labels: tuple
    ref_spans: tuple

    @property
    def T(self):
        return self.features.shape[0]


def _feasible_lengths(U_range, T_range, span_range):
    lo, hi = span_range
    us = []
    for U in range(U_range[0], U_range[1] + 1):
        if T_range is None or (U * lo <= T_range[1] and U * hi >= T_range[0]):
            us.append(U)
    return us


def generate_dataset(n_utts=200, T_range=(20, 40), U_range=(2, 5), V=8, span_range=(4, 12),
                     noise_std=0.5, seed=0):
    """Reproducible list of :class:`ToyUtterance`.

    Adjacent labels always differ, so every span boundary is visible in the
    noiseless features. ``T_range=None`` leaves the utterance length equal to
    the sum of sampled span lengths.
    """
    if n_utts < 1 or V < 2 or U_range[0] < 1 or U_range[0] > U_range[1]:
        raise ContractViolation("need n_utts >= 1, V >= 2 and a valid U_range")
    if span_range[0] < 1 or span_range[0] > span_range[1] or noise_std < 0:
        raise ContractViolation("invalid span_range or noise_std")
    if T_range is not None and T_range[0] > T_range[1]:
        raise ContractViolation("invalid T_range")
    choices = _feasible_lengths(U_range, T_range, span_range)
    if not choices:
        raise ContractViolation("no label count in U_range can fill T_range with spans in span_range")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_utts):
        U = int(rng.choice(choices))
        while True:
            spans = rng.integers(span_range[0], span_range[1] + 1, size=U)
            if T_range is None or T_range[0] <= spans.sum() <= T_range[1]:
                break
        labels = [int(rng.integers(1, V + 1))]
        for _ in range(U - 1):
            nxt = int(rng.integers(1, V))
            labels.append(nxt if nxt < labels[-1] else nxt + 1)
        T = int(spans.sum())
        feats = np.zeros((T, V))
        ends = np.cumsum(spans)
        starts = ends - spans
        for lab, s, e in zip(labels, starts, ends):
            feats[s:e, lab - 1] = 1.0
        if noise_std > 0:
            feats += rng.normal(scale=noise_std, size=feats.shape)
        ref = tuple((int(s) + 1, int(e)) for s, e in zip(starts, ends))
        out.append(ToyUtterance(feats, tuple(labels), ref))
    return out


def stack_context(x, left=0, right=0, mode="mean"):
    """Give every frame a view of ``left`` past and ``right`` future frames.

    ``mode="mean"`` averages the frames inside the window (the window is
    truncated at utterance edges); ``mode="stack"`` concatenates them with
    zero padding.
    """
    if left == 0 and right == 0:
        return x
    T, d = x.shape
    if mode == "stack":
        padded = np.vstack([np.zeros((left, d)), x, np.zeros((right, d))])
        return np.hstack([padded[i:i + T] for i in range(left + right + 1)])
    if mode != "mean":
        raise ContractViolation(f"unknown context mode {mode!r}")
    csum = np.vstack([np.zeros((1, d)), np.cumsum(x, axis=0)])
    lo = np.maximum(np.arange(T) - left, 0)
    hi = np.minimum(np.arange(T) + right + 1, T)
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


def init_params(d_in, V, hidden, rng, scale=0.3):
    def w(*shape):
        return rng.normal(scale=scale / math.sqrt(shape[0]), size=shape)
    return {
        "W_enc": w(d_in, hidden),
        "E": rng.normal(scale=scale, size=(V + 1, hidden)),
        "W_je": w(hidden, hidden),
        "W_jp": w(hidden, hidden),
        "b_j": np.zeros(hidden),
        "W_o": w(hidden, V + 1),
        "b_o": np.zeros(V + 1),
    }


def n_parameters(params):
    return sum(p.size for p in params.values())


def _contexts(labels):
    return np.concatenate([[BLANK], np.asarray(labels, dtype=np.int64)])


def model_forward(params, x, labels, return_cache=False):
    """Raw joint logits ``(T, U+1, V+1)`` for encoder input ``x`` and prefix ``labels``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params["W_enc"].shape[0]:
        raise ContractViolation(
            f"encoder expects (T, {params['W_enc'].shape[0]}) input, got {x.shape}")
    ctx = _contexts(labels)
    if ctx.size and ctx.max() >= params["E"].shape[0]:
        raise ContractViolation("label id outside the model vocabulary")
    enc = x @ params["W_enc"]
    pred = params["E"][ctx]
    pre = (enc @ params["W_je"])[:, None, :] + (pred @ params["W_jp"])[None, :, :] + params["b_j"]
    hid = np.tanh(pre)
    logits = hid @ params["W_o"] + params["b_o"]
    if return_cache:
        return logits, (x, ctx, enc, pred, hid)
    return logits


def model_backward(params, cache, dlogits):
    """Parameter gradients given ``dJ/dlogits``."""
    x, ctx, enc, pred, hid = cache
    grads = {}
    grads["W_o"] = np.einsum("tuh,tuk->hk", hid, dlogits)
    grads["b_o"] = dlogits.sum(axis=(0, 1))
    dpre = (dlogits @ params["W_o"].T) * (1.0 - hid ** 2)
    grads["b_j"] = dpre.sum(axis=(0, 1))
    d_enc_side = dpre.sum(axis=1)
    d_pred_side = dpre.sum(axis=0)
    grads["W_je"] = enc.T @ d_enc_side
    grads["W_jp"] = pred.T @ d_pred_side
    grads["W_enc"] = x.T @ (d_enc_side @ params["W_je"].T)
    dE = np.zeros_like(params["E"])
    np.add.at(dE, ctx, d_pred_side @ params["W_jp"].T)
    grads["E"] = dE
    return grads


def corpus_loss_and_grad(params, inputs, labels, spec, vanilla_weight=0.0):
    """Mean per-utterance loss and its gradient over the whole corpus."""
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    for x, lab in zip(inputs, labels):
        logits, cache = model_forward(params, x, lab, return_cache=True)
        res = brt_loss(logits, lab, spec, vanilla_weight)
        total += res.loss
        for k, g in model_backward(params, cache, res.grad).items():
            grads[k] += g
    n = len(inputs)
    return total / n, {k: g / n for k, g in grads.items()}


class TrainingDiverged(RuntimeError):
    pass


def train(params, inputs, labels, spec, epochs, lr, vanilla_weight=0.0, clip=5.0, momentum=0.0):
    """Full-batch gradient descent with a fixed step; returns the per-epoch loss trace.

    ``params`` is updated in place. Gradients whose global norm exceeds
    ``clip`` are rescaled to it. ``momentum`` > 0 adds a heavy-ball term.
    """
    trace = []
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    _check_finite(params, "initial")
    for epoch in range(epochs):
        loss, grads = corpus_loss_and_grad(params, inputs, labels, spec, vanilla_weight)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} at epoch {epoch}")
        trace.append(loss)
        norm = math.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
        step = lr * (clip / norm if clip and norm > clip else 1.0)
        for k in params:
            velocity[k] = momentum * velocity[k] - step * grads[k]
            params[k] += velocity[k]
        _check_finite(params, f"epoch {epoch}")
        if epoch % 10 == 0:
            logger.debug("epoch %d loss %.6f |g| %.4f", epoch, loss, norm)
    return trace


def _check_finite(params, when):
    for k, p in params.items():
        if not np.all(np.isfinite(p)):
            raise TrainingDiverged(f"parameter {k} is not finite ({when})")


class LookupScorer:
    """Score function over a precomputed ``(T, V+1, V+1)`` table.

    The toy prediction network only sees the previous label, so the joint
    output at ``(t, prefix)`` depends on ``prefix[-1]`` alone.
    """

    def __init__(self, table):
        self.table = table

    def __call__(self, t, prefix):
        return self.table[t, prefix[-1] if prefix else BLANK]


class BRTTransducer(BaseEstimator):
    """Toy transducer trained with a vanilla or Bayes-risk objective.

    ``fit`` takes a list of ``(T, d)`` feature matrices and label sequences;
    ``predict`` beam-searches label sequences for new feature matrices.
    """

    def __init__(self, variant="unit", lam=0.0, m=2, vanilla_weight=0.0, hidden=32,
                 left_context=0, right_context=0, context_mode="mean", epochs=100, lr=0.5, momentum=0.0, clip=5.0,
                 init_scale=0.3, vocab_size=None, seed=0, beam=10, early_stop=True,
                 threshold_d=-10.0, stable_k=3, stable_f=5, max_symbols_per_frame=3):
        self.variant = variant
        self.lam = lam
        self.m = m
        self.vanilla_weight = vanilla_weight
        self.hidden = hidden
        self.left_context = left_context
        self.right_context = right_context
        self.context_mode = context_mode
        self.epochs = epochs
        self.lr = lr
        self.momentum = momentum
        self.clip = clip
        self.init_scale = init_scale
        self.vocab_size = vocab_size
        self.seed = seed
        self.beam = beam
        self.early_stop = early_stop
        self.threshold_d = threshold_d
        self.stable_k = stable_k
        self.stable_f = stable_f
        self.max_symbols_per_frame = max_symbols_per_frame

    @property
    def risk_spec(self):
        return RiskSpec(self.variant, self.lam, self.m)

    @property
    def early_stop_config(self):
        return EarlyStopConfig(bool(self.early_stop), self.threshold_d, self.stable_k, self.stable_f)

    def _encode(self, x):
        return stack_context(x, self.left_context, self.right_context, self.context_mode)

    def _init(self, d, V):
        rng = np.random.default_rng(self.seed)
        d_in = d * (self.left_context + 1 + self.right_context) if self.context_mode == "stack" else d
        self.params_ = init_params(d_in, V, self.hidden, rng, self.init_scale)
        self.n_features_in_ = d
        self.vocab_size_ = V

    def fit(self, X, y):
        X, y = check_sequences(X, y)
        V = self.vocab_size or max(int(l.max()) for l in y if l.size)
        self._init(X[0].shape[1], V)
        inputs = [self._encode(x) for x in X]
        self.loss_trace_ = train(self.params_, inputs, y, self.risk_spec, self.epochs, self.lr,
                                 self.vanilla_weight, self.clip, self.momentum)
        return self

    def lattice_logits(self, x, labels):
        """Raw joint logits for one utterance and a label sequence."""
        check_is_fitted(self, "params_")
        return model_forward(self.params_, self._encode(np.asarray(x, dtype=np.float64)), labels)

    def score_table(self, x):
        """Log distributions ``(T, V+1, V+1)`` indexed by frame and previous label."""
        check_is_fitted(self, "params_")
        V = self.vocab_size_
        logits = model_forward(self.params_, self._encode(np.asarray(x, dtype=np.float64)),
                               np.arange(1, V + 1))
        return log_softmax(logits)

    def decode(self, X, beam=None, early_stop=None):
        X, _ = check_sequences(X)
        es = self.early_stop_config if early_stop is None else early_stop
        beam = self.beam if beam is None else beam
        return [beam_search(LookupScorer(self.score_table(x)), x.shape[0], beam, es,
                            self.max_symbols_per_frame) for x in X]

    def predict(self, X):
        return [res.best.prefix for res in self.decode(X)]

    def score(self, X, y):
        """Negative WER, so that larger is better."""
        _, y = check_sequences(X, y)
        return -wer([tuple(l) for l in y], self.predict(X))

    def align(self, x, labels):
        """Forced Viterbi alignment of ``labels``; returns 1-based emission frames."""
        logits = self.lattice_logits(x, labels)
        return emission_times(viterbi_align(log_softmax(logits), labels))


def evaluate(model, utts, beam=None, early_stop=None, dcl_ms=0.0, frame_ms=40.0):
    """Decode ``utts`` and aggregate accuracy and latency statistics.

    Drift latency uses the forced alignment of the reference labels against
    the reference span starts.
    """
    results = model.decode([u.features for u in utts], beam=beam, early_stop=early_stop)
    refs = [tuple(u.labels) for u in utts]
    hyps = [r.best.prefix for r in results]
    dl_all, last = [], []
    for u in utts:
        frames = model.align(u.features, u.labels)
        dl_all.extend(drift_latency(frames, u.ref_spans)[0])
        last.append(frames[-1])
    mean_dl = float(np.mean(dl_all))
    return {
        "wer": wer(refs, hyps),
        "mean_df": mean_df(results),
        "mean_dl": mean_dl,
        "mean_last_emission_frame": float(np.mean(last)),
        "mean_T": float(np.mean([u.T for u in utts])),
        "stopped_early_rate": float(np.mean([r.stopped_early for r in results])),
        "overall_latency_ms": overall_latency(dcl_ms, mean_dl, frame_ms),
        "hypotheses": hyps,
        "decode_results": results,
    }
