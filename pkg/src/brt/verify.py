"""Seeded verification suites: oracle equivalence, gradients, lattice invariants."""

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import anti_diagonal_totals, forward, backward, forward_backward, gate_posteriors
from .loss import ArgmaxTie, brt_loss, loss_gradient_check, reweighted_emission_mean, transducer_loss
from .numerics import log_softmax
from .oracle import enumerate_paths, oracle_gates, oracle_loss
from .risk import RiskSpec

ORACLE_TOL = 1e-10
IDENTITY_TOL = 1e-12
GRADIENT_TOL = 1e-4

OFFLINE_LAMBDAS = (0.0, 1.0, 5.0)
STREAMING_LAMBDAS = (0.0, 2.0, 10.0)
MONOTONE_LAMBDAS = (0.0, 1.0, 2.0, 5.0, 10.0)


@dataclass
class SuiteReport:
    name: str
    n_cases: int
    tolerance: float
    worst: float = 0.0
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(err <= tol for err, tol in self.checks.values())

    def record(self, check, err, tol=None):
        tol = self.tolerance if tol is None else tol
        prev = self.checks.get(check, (0.0, tol))[0]
        self.checks[check] = (max(prev, err), tol)
        self.worst = max(self.worst, err / tol * self.tolerance)


def random_case(rng, T_max=6, U_max=4, V_max=5, U_min=0, T_min=1, scale=1.5):
    """Random raw logits ``(T, U+1, V+1)`` and labels."""
    T = int(rng.integers(T_min, T_max + 1))
    U = int(rng.integers(U_min, U_max + 1))
    V = int(rng.integers(1, V_max + 1))
    labels = rng.integers(1, V + 1, size=U)
    return rng.normal(scale=scale, size=(T, U + 1, V + 1)), labels


def _abs_diff(a, b):
    if a == b:
        return 0.0
    return abs(a - b)


def run_oracle_suite(seed=0, n_cases=100):
    """DP losses and gates against brute-force enumeration."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("oracle", n_cases, ORACLE_TOL)
    for _ in range(n_cases):
        a, labels = random_case(rng)
        z = log_softmax(a)
        rep.record("vanilla", _abs_diff(transducer_loss(a, labels).loss, oracle_loss(z, labels)))
        if len(labels) == 0:
            continue
        for lam in OFFLINE_LAMBDAS:
            spec = RiskSpec("offline", lam)
            rep.record("offline", _abs_diff(brt_loss(a, labels, spec).loss, oracle_loss(z, labels, spec)))
        for lam in STREAMING_LAMBDAS:
            spec = RiskSpec("streaming", lam)
            rep.record("streaming", _abs_diff(brt_loss(a, labels, spec).loss, oracle_loss(z, labels, spec)))
        g = gate_posteriors(z, labels)
        og = np.array(oracle_gates(z, labels))
        finite = np.isfinite(og)
        rep.record("gates", float(np.max(np.abs(g[finite] - og[finite]), initial=0.0)))
        rep.record("gates_zero", float(np.any(np.isfinite(g[~finite]))))
    return rep


def run_gradient_suite(seed=0, n_cases=50, h=1e-5):
    """Analytic gradients against central differences, ``n_cases`` per variant."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("gradient", n_cases, GRADIENT_TOL)
    specs = {"vanilla": RiskSpec(), "offline": RiskSpec("offline", 5.0),
             "streaming": RiskSpec("streaming", 10.0)}
    for name, spec in specs.items():
        done = 0
        while done < n_cases:
            a, labels = random_case(rng, T_max=5, U_max=3, V_max=4, U_min=1)
            try:
                err = loss_gradient_check(a, labels, spec, h=h)
            except ArgmaxTie:
                continue
            rep.record(name, err)
            done += 1
    return rep


def run_invariants_suite(seed=0, n_cases=100):
    """Anti-diagonal identity, gate normalization, path counts, risk monotonicity."""
    rng = np.random.default_rng(seed)
    rep = SuiteReport("invariants", n_cases, ORACLE_TOL)
    for _ in range(n_cases):
        a, labels = random_case(rng)
        z = log_softmax(a)
        fb = forward_backward(z, labels)
        rep.record("fb_consistency", max(abs(forward(z, labels).total - fb.total),
                                         abs(backward(z, labels).total - fb.total)))
        rep.record("anti_diagonal", float(np.max(np.abs(anti_diagonal_totals(fb) - fb.total))))
        T, U = z.shape[0], len(labels)
        rep.record("path_count", float(len(enumerate_paths(T, labels)) != math.comb(T - 1 + U, U)))
        if U == 0:
            continue
        g = gate_posteriors(z, labels, fb)
        m = g.max(axis=0)
        col_totals = m + np.log(np.exp(g - m).sum(axis=0))
        rep.record("gate_normalization", float(np.max(np.abs(col_totals - fb.total))))
        vanilla = transducer_loss(a, labels).loss
        rep.record("unit_identity_offline",
                   abs(brt_loss(a, labels, RiskSpec("offline", 0.0)).loss - vanilla), IDENTITY_TOL)
        rep.record("unit_identity_streaming",
                   abs(brt_loss(a, labels, RiskSpec("streaming", 0.0)).loss - vanilla), IDENTITY_TOL)
        means = [reweighted_emission_mean(g, RiskSpec("offline", lam), U) for lam in MONOTONE_LAMBDAS]
        rep.record("emission_mean_monotone", max(0.0, max(b - a_ for a_, b in zip(means, means[1:]))))
    return rep


SUITES = {
    "oracle": run_oracle_suite,
    "gradient": run_gradient_suite,
    "invariants": run_invariants_suite,
}
