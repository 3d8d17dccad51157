# src/qadvlab/selftest.py
"""
Fast invariant checks that run in-process from an installed package
(`qadvlab selftest`). The pytest suite covers the same ground in more depth.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from .attacks import AttackBudget, AttackSpace, quantum_fgsm_channel
from .bounds import (
    BoundConfig,
    excess_classical_prop1,
    khintchine_constant,
    mc_rc_estimate,
    pac_slack,
    rc_bound_thm2,
    rc_exact_enumeration,
)
from .embeddings import EmbeddingFamily, EmbeddingSpec, embed, embed_batch
from .model import ModelConfig, build_model, input_losses, loss_grad_inputs, loss_grad_params
from .qmath import INF, holder_extremizer, random_density, random_hermitian, schatten_norm, trace_product, validate_density
from .settings import substream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _norms(rng: np.random.Generator) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(50):
        dim = int(rng.integers(2, 17))
        m = random_hermitian(rng, dim)
        lam = np.abs(np.linalg.eigvalsh(m))
        for r in (1.0, 2.0, 3.0, INF):
            brute = lam.max() if math.isinf(r) else np.sum(lam**r) ** (1.0 / r)
            worst = max(worst, abs(schatten_norm(m, r) - brute) / max(1.0, brute))
            a = holder_extremizer(m, r, 1.0)
            dual = 1.0 if math.isinf(r) else (INF if r == 1.0 else r / (r - 1.0))
            worst = max(worst, abs(trace_product(a, m).real - schatten_norm(m, dual)))
    return worst <= 1e-9, f"max deviation {worst:.2e}"


def _embeddings(rng: np.random.Generator) -> Tuple[bool, str]:
    specs = [
        EmbeddingSpec(family=EmbeddingFamily.AMPLITUDE, input_dim=5),
        EmbeddingSpec(family=EmbeddingFamily.ANGLE, input_dim=3),
        EmbeddingSpec(family=EmbeddingFamily.DENSE, input_dim=3),
        EmbeddingSpec(family=EmbeddingFamily.LLAYER_ANGLE, input_dim=2, layers=3),
        EmbeddingSpec(family=EmbeddingFamily.ANGLE, input_dim=2, depolarize_lambda=0.05),
    ]
    for spec in specs:
        for _ in range(10):
            rho = embed(rng.normal(size=spec.input_dim), spec)
            validate_density(rho)
            if np.linalg.eigvalsh(rho)[0] < spec.depolarize_lambda - 1e-12:
                return False, f"{spec.family.value}: eigenvalue below lambda_min"
    return True, f"{len(specs)} embedding specs produce valid states"


def _gradients(rng: np.random.Generator) -> Tuple[bool, str]:
    spec = EmbeddingSpec(family=EmbeddingFamily.ANGLE, input_dim=2)
    model = build_model(spec, ModelConfig(layers=2), seed=int(rng.integers(1 << 31)))
    X = rng.normal(size=(3, 2))
    y = np.array([0, 1, 1])
    _, grad = loss_grad_params(model, embed_batch(X, spec), y)
    h = 1e-6
    flat = model.angles.reshape(-1)
    worst = 0.0
    for k in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[k] += h
        down[k] -= h
        f_up = input_losses(model.with_angles(up.reshape(model.angles.shape)), X, y).mean()
        f_down = input_losses(model.with_angles(down.reshape(model.angles.shape)), X, y).mean()
        fd = (f_up - f_down) / (2 * h)
        worst = max(worst, abs(fd - grad.reshape(-1)[k]) / max(1e-3, abs(fd)))
    _, gx = loss_grad_inputs(model, X, y)
    for j in range(2):
        shift = np.zeros(2)
        shift[j] = h
        fd = (input_losses(model, X + shift, y) - input_losses(model, X - shift, y)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - gx[:, j]) / np.maximum(1e-3, np.abs(fd)))))
    return worst <= 1e-4, f"max relative error {worst:.2e}"


def _quantum_fgsm(rng: np.random.Generator) -> Tuple[bool, str]:
    spec = EmbeddingSpec(family=EmbeddingFamily.ANGLE, input_dim=2)
    model = build_model(spec, ModelConfig(layers=1), seed=int(rng.integers(1 << 31)))
    for _ in range(20):
        rho = random_density(rng, 4)
        budget = AttackBudget(space=AttackSpace.QUANTUM, p=float(rng.choice([1.0, 2.0, INF])), epsilon=float(rng.uniform(0.001, 0.5)))
        channel, iters = quantum_fgsm_channel(model, rho, int(rng.integers(2)), budget, max_iter=30)
        out = channel.apply(rho)
        validate_density(0.5 * (out + out.conj().T), tol=1e-10)
        if iters > 30:
            return False, "halving loop exceeded max_iter"
        if not channel.is_identity and schatten_norm(0.5 * ((rho - out) + (rho - out).conj().T), budget.p) >= budget.epsilon + 1e-12:
            return False, "attacked state outside the budget"
    return True, "20 random attacks inside budget"


def _bounds(rng: np.random.Generator) -> Tuple[bool, str]:
    checks = [
        (khintchine_constant(2.0), 2.0**-0.25 * math.sqrt(2.0 * math.pi / math.e)),
        (pac_slack(BoundConfig(m=20, delta_conf=0.05, B_loss=1.0)), 3 * math.sqrt(math.log(40) / 40)),
        (excess_classical_prop1(BoundConfig(epsilon=0.3, p=INF, d=10, L=1), EmbeddingFamily.ANGLE), 2 * 0.6**10),
    ]
    for got, want in checks:
        if abs(got - want) > 1e-5 * abs(want):
            return False, f"scalar check {got} != {want}"
    psi0, psi1 = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    exact = rc_exact_enumeration([np.outer(psi0, psi0), np.outer(psi1, psi1)], BoundConfig(r=INF, b=1.0))
    if abs(exact - 1.0) > 1e-12:
        return False, f"exact RC {exact} != 1"
    states = [random_density(rng, 4) for _ in range(8)]
    for r in (1.0, 2.0, INF):
        cfg = BoundConfig(r=r, b=1.0)
        mean, err = mc_rc_estimate(states, None, cfg, 200, seed=int(rng.integers(1 << 31)))
        if mean > rc_bound_thm2(states, cfg) + 3 * err:
            return False, f"RC estimate above its bound at r={r}"
    return True, "scalar constants, exact RC and RC dominance"


SUITES: List[Tuple[str, Callable[[np.random.Generator], Tuple[bool, str]]]] = [
    ("norms", _norms),
    ("embeddings", _embeddings),
    ("gradients", _gradients),
    ("quantum_fgsm", _quantum_fgsm),
    ("bounds", _bounds),
]


def run_selftest(seed: int = 0) -> List[SuiteResult]:
    results = []
    for i, (name, suite) in enumerate(SUITES):
        rng = substream(seed, "selftest", i)
        try:
            passed, detail = suite(rng)
        except Exception as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        logger.info("[selftest] %s: %s (%s)", name, "ok" if passed else "FAILED", detail)
        results.append(SuiteResult(name, passed, detail))
    return results
