"""Vanilla transducer and Bayes-risk transducer losses with analytic gradients.

Losses take raw joint logits ``(T, U+1, V+1)``, normalize them internally and
return gradients with respect to the raw logits.

A risk that depends on the emission frame of token ``k`` is handled by two
banded passes: a backward pass over rows ``0..k-1`` whose exit arc (emitting
``l_k``) carries the risk, and a forward pass over rows ``k..U`` entered
through the same risk-weighted arc. Arc occupancies of the risk-weighted
path measure then combine one plain and one banded table.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import ContractViolation, check_raw_logits
from .lattice import arc_scores, forward_backward, gate_posteriors
from .numerics import log_softmax
from .risk import RiskSpec, Variant, log_risk_offline, log_risk_streaming


@dataclass(frozen=True)
class LossResult:
    loss: float
    grad: np.ndarray
    emission_mean: tuple = field(default=())
    tau_star: tuple = field(default=())


def _exp_normalized(log_occ, log_total):
    return np.exp(log_occ - log_total)


def _raw_grad(z, occ_blank, occ_emit, labels):
    """Chain rule through log-softmax: ``dJ/da = p * sum(gamma) - gamma``."""
    T, U1, _ = z.shape
    gamma = np.zeros_like(z)
    gamma[:, :, 0] = occ_blank
    if U1 > 1:
        gamma[:, np.arange(U1 - 1), labels] += occ_emit
    return np.exp(z) * gamma.sum(axis=-1, keepdims=True) - gamma


def _vanilla_occupancy(z, labels):
    fb = forward_backward(z, labels)
    blank, emit = arc_scores(z, labels)
    T = z.shape[0]
    occ_blank = np.full(blank.shape, -np.inf)
    occ_blank[:-1] = fb.alpha[:-1] + blank[:-1] + fb.beta[1:]
    occ_blank[-1, -1] = fb.alpha[-1, -1] + blank[-1, -1]
    occ_emit = fb.alpha[:, :-1] + emit + fb.beta[:, 1:] if len(labels) else np.zeros((T, 0))
    return fb, _exp_normalized(occ_blank, fb.total), _exp_normalized(occ_emit, fb.total)


def _token_risk_occupancy(z, labels, fb, k, log_r):
    """Loss and arc occupancies of ``-log sum_pi P(pi) r(emission frame of l_k)``."""
    blank, emit = arc_scores(z, labels)
    T, U1 = blank.shape
    U = U1 - 1
    alpha, beta = fb.alpha, fb.beta
    # rows below k: backward band exiting through the weighted l_k arc
    exit_ = emit[:, k - 1] + log_r + beta[:, k]
    beta_w = _kernels.backward_rows(np.ascontiguousarray(blank[:, :k]),
                                    np.ascontiguousarray(emit[:, :k - 1]), exit_)
    # rows k..U: forward band entered through the same arc
    entry = alpha[:, k - 1] + emit[:, k - 1] + log_r
    alpha_w = _kernels.forward_rows(np.ascontiguousarray(blank[:, k:]),
                                    np.ascontiguousarray(emit[:, k:]), entry)
    log_s = float(beta_w[0, 0])

    occ_blank = np.full((T, U1), -np.inf)
    occ_emit = np.full((T, U), -np.inf)
    occ_blank[:-1, :k] = alpha[:-1, :k] + blank[:-1, :k] + beta_w[1:]
    occ_emit[:, :k - 1] = alpha[:, :k - 1] + emit[:, :k - 1] + beta_w[:, 1:]
    occ_emit[:, k - 1] = exit_ + alpha[:, k - 1]
    occ_blank[:-1, k:] = alpha_w[:-1] + blank[:-1, k:] + beta[1:, k:]
    occ_blank[-1, U] = alpha_w[-1, -1] + blank[-1, U]
    occ_emit[:, k:] = alpha_w[:, :-1] + emit[:, k:] + beta[:, k + 1:]
    return -log_s, _exp_normalized(occ_blank, log_s), _exp_normalized(occ_emit, log_s)


def _weighted_mean_frame(gate_col, log_r):
    w = gate_col + log_r
    w = np.exp(w - w.max())
    tau = np.arange(1, len(gate_col) + 1)
    return float((tau * w).sum() / w.sum())


def transducer_loss(raw_logits, labels):
    """Vanilla transducer loss ``-log P(l|x)`` and its gradient."""
    a, labels = check_raw_logits(raw_logits, labels)
    z = log_softmax(a)
    fb, g_blank, g_emit = _vanilla_occupancy(z, labels)
    return LossResult(loss=-fb.total, grad=_raw_grad(z, g_blank, g_emit, labels))


def _prepare(raw_logits, labels, spec, variant):
    a, labels = check_raw_logits(raw_logits, labels)
    if spec.variant is not variant:
        raise ContractViolation(f"expected a {variant.value} risk spec, got {spec.variant.value}")
    if len(labels) == 0:
        raise ContractViolation("risk-weighted losses need at least one label")
    z = log_softmax(a)
    return z, labels, forward_backward(z, labels)


def _mix_vanilla(result_loss, grad, z, labels, vanilla_weight, fb):
    if not vanilla_weight:
        return result_loss, grad
    _, g_blank, g_emit = _vanilla_occupancy(z, labels)
    w = float(vanilla_weight)
    return ((1 - w) * result_loss - w * fb.total,
            (1 - w) * grad + w * _raw_grad(z, g_blank, g_emit, labels))


def brt_offline_loss(raw_logits, labels, spec, vanilla_weight=0.0):
    """Risk on the emission frame of the last label, flat up to ``m*U``."""
    z, labels, fb = _prepare(raw_logits, labels, spec, Variant.OFFLINE)
    T, U = z.shape[0], len(labels)
    log_r = log_risk_offline(T, U, spec.lam, spec.m)
    loss, g_blank, g_emit = _token_risk_occupancy(z, labels, fb, U, log_r)
    grad = _raw_grad(z, g_blank, g_emit, labels)
    gates = gate_posteriors(z, labels, fb)
    means = tuple(_weighted_mean_frame(gates[:, u], log_r if u == U - 1 else np.zeros(T))
                  for u in range(U))
    loss, grad = _mix_vanilla(loss, grad, z, labels, vanilla_weight, fb)
    return LossResult(loss=loss, grad=grad, emission_mean=means)


def brt_streaming_loss(raw_logits, labels, spec, vanilla_weight=0.0):
    """Mean over tokens of a per-token risk centred on its most likely emission frame.

    The centre frame is recomputed from the current gates and held constant
    (no gradient flows through the argmax); ties go to the earliest frame.
    """
    z, labels, fb = _prepare(raw_logits, labels, spec, Variant.STREAMING)
    T, U = z.shape[0], len(labels)
    gates = gate_posteriors(z, labels, fb)
    loss = 0.0
    grad = np.zeros_like(z)
    stars, means = [], []
    for k in range(1, U + 1):
        tau_star = int(np.argmax(gates[:, k - 1])) + 1
        log_r = log_risk_streaming(T, tau_star, spec.lam)
        j, g_blank, g_emit = _token_risk_occupancy(z, labels, fb, k, log_r)
        loss += j / U
        grad += _raw_grad(z, g_blank, g_emit, labels) / U
        stars.append(tau_star)
        means.append(_weighted_mean_frame(gates[:, k - 1], log_r))
    loss, grad = _mix_vanilla(loss, grad, z, labels, vanilla_weight, fb)
    return LossResult(loss=loss, grad=grad, emission_mean=tuple(means), tau_star=tuple(stars))


def brt_loss(raw_logits, labels, spec=None, vanilla_weight=0.0):
    """Dispatch on ``spec.variant``; a unit risk gives the vanilla loss."""
    spec = spec or RiskSpec()
    if spec.variant is Variant.OFFLINE:
        return brt_offline_loss(raw_logits, labels, spec, vanilla_weight)
    if spec.variant is Variant.STREAMING:
        return brt_streaming_loss(raw_logits, labels, spec, vanilla_weight)
    return transducer_loss(raw_logits, labels)


def unit_risk_loss(raw_logits, labels, k=None):
    """Vanilla loss computed through the risk-weighted banded passes (risk = 1).

    Agrees with :func:`transducer_loss` exactly in exact arithmetic; kept as
    an independent route for cross-checks.
    """
    a, labels = check_raw_logits(raw_logits, labels)
    if len(labels) == 0:
        raise ContractViolation("risk-weighted losses need at least one label")
    z = log_softmax(a)
    fb = forward_backward(z, labels)
    k = len(labels) if k is None else k
    loss, g_blank, g_emit = _token_risk_occupancy(z, labels, fb, k, np.zeros(z.shape[0]))
    return LossResult(loss=loss, grad=_raw_grad(z, g_blank, g_emit, labels))


def reweighted_emission_mean(gates, spec, u):
    """Risk-reweighted expected emission frame (1-based) of label ``u``.

    ``gates`` is the ``(T, U)`` log gate table.
    """
    gates = np.asarray(gates, dtype=np.float64)
    T, U = gates.shape
    if not 1 <= u <= U:
        raise ContractViolation(f"u must be in [1, {U}], got {u}")
    col = gates[:, u - 1]
    if spec.variant is Variant.OFFLINE:
        log_r = log_risk_offline(T, U, spec.lam, spec.m)
    elif spec.variant is Variant.STREAMING:
        log_r = log_risk_streaming(T, int(np.argmax(col)) + 1, spec.lam)
    else:
        log_r = np.zeros(T)
    return _weighted_mean_frame(col, log_r)


class ArgmaxTie(ContractViolation):
    """The streaming centre frame is not locally constant at this input."""


def precise_loss(raw_logits, labels, spec=None):
    """Reference loss evaluated in ``np.longdouble`` with plain Python loops.

    Slow, but its rounding floor sits a few hundred times below the float64
    kernels, which is what a finite-difference check at small steps needs
    for coordinates whose gradient is many orders below the loss.
    """
    spec = spec or RiskSpec()
    a, labels = check_raw_logits(raw_logits, labels)
    return float(_precise_loss_ld(a, labels, spec))


def _precise_loss_ld(a, labels, spec):
    a = a.astype(np.longdouble)
    z = a - np.logaddexp.reduce(a, axis=-1, keepdims=True)
    T, U1, _ = z.shape
    U = U1 - 1
    blank = z[:, :, 0]
    emit = z[:, np.arange(U), labels] if U else np.zeros((T, 0), dtype=np.longdouble)
    ninf = np.longdouble(-np.inf)
    alpha = np.full((T, U1), ninf, dtype=np.longdouble)
    beta = np.full((T, U1), ninf, dtype=np.longdouble)
    for t in range(T):
        for u in range(U1):
            acc = np.longdouble(0.0) if t == 0 and u == 0 else ninf
            if t > 0:
                acc = np.logaddexp(acc, alpha[t - 1, u] + blank[t - 1, u])
            if u > 0:
                acc = np.logaddexp(acc, alpha[t, u - 1] + emit[t, u - 1])
            alpha[t, u] = acc
    for t in range(T - 1, -1, -1):
        for u in range(U, -1, -1):
            acc = blank[t, u] if t == T - 1 and u == U else ninf
            if t < T - 1:
                acc = np.logaddexp(acc, blank[t, u] + beta[t + 1, u])
            if u < U:
                acc = np.logaddexp(acc, emit[t, u] + beta[t, u + 1])
            beta[t, u] = acc
    if spec.variant is Variant.UNIT:
        return -beta[0, 0]
    if U == 0:
        raise ContractViolation("risk-weighted losses need at least one label")
    gates = alpha[:, :U] + emit + beta[:, 1:]
    if spec.variant is Variant.OFFLINE:
        log_r = log_risk_offline(T, U, spec.lam, spec.m).astype(np.longdouble)
        return -np.logaddexp.reduce(log_r + gates[:, U - 1])
    total = np.longdouble(0.0)
    for u in range(U):
        log_r = log_risk_streaming(T, int(np.argmax(gates[:, u])) + 1, spec.lam)
        total -= np.logaddexp.reduce(log_r.astype(np.longdouble) + gates[:, u])
    return total / U


def loss_gradient_check(raw_logits, labels, spec=None, h=1e-5, tie_tol=1e-6, precision="extended"):
    """Max relative error between the analytic gradient and central differences.

    Only coordinates with ``|analytic| > 1e-8`` are compared. With
    ``precision="extended"`` the differenced loss is :func:`precise_loss`;
    ``"double"`` differences the float64 loss itself, whose rounding noise
    (about ``|loss| * 1e-16 / h``) swamps gradients near the 1e-8 cutoff.
    """
    spec = spec or RiskSpec()
    a, labels = check_raw_logits(raw_logits, labels)
    if precision not in ("extended", "double"):
        raise ContractViolation(f"precision must be 'extended' or 'double', got {precision!r}")
    if spec.variant is Variant.STREAMING and a.shape[0] > 1:
        top2 = np.sort(gate_posteriors(log_softmax(a), labels), axis=0)[-2:]
        # a step of h moves a log gate by at most ~2h
        if np.any(top2[1] - top2[0] < max(tie_tol, 4 * h)):
            raise ArgmaxTie("two gates within tolerance of the argmax")
    res = brt_loss(a, labels, spec)
    if precision == "extended":
        def evaluate(x):
            return _precise_loss_ld(x, labels, spec)
    else:
        def evaluate(x):
            return brt_loss(x, labels, spec).loss
    worst = 0.0
    for idx in zip(*np.nonzero(np.abs(res.grad) > 1e-8)):
        plus, minus = a.copy(), a.copy()
        plus[idx] += h
        minus[idx] -= h
        fd = float((evaluate(plus) - evaluate(minus)) / (2 * h))
        worst = max(worst, abs(fd - res.grad[idx]) / abs(res.grad[idx]))
    return worst
