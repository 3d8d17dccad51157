# src/qadvlab/bounds.py
"""
Closed-form generalization bounds and the Rademacher oracles they must
dominate.

Every bound takes the embedded training states (density matrices) and a
BoundConfig. Monte-Carlo estimators draw their sign vectors from
`rademacher_draw(seed, i, m)`, one independent stream per draw index, so two
estimators called with the same seed see the same signs.
"""
from __future__ import annotations

import itertools
import logging
import math
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import erfc

from .attacks import AttackBudget, random_perturbations
from .embeddings import EmbeddingFamily, EmbeddingSpec, embed
from .errors import AssumptionViolation, DivergenceError, DomainError, UnsupportedOrder
from .qmath import (
    INF,
    SchattenOrder,
    dual_order,
    inverse_order,
    psd_sqrt,
    schatten_norm,
    symmetrize,
    validate_density,
)
from .settings import substream

logger = logging.getLogger(__name__)

# Largest m for which all 2^m sign vectors are enumerated
MAX_ENUMERATION = 16
ARC_RESTARTS = 20
ARC_ITERATIONS = 60


class ExcessVariant(str, Enum):
    PROP1 = "prop1"
    APPENDIX = "appendix"


class BoundConfig(BaseModel):
    """Parameters of one bound evaluation. `b` and `m` are filled from the data when left unset."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    r: SchattenOrder = INF
    b: Optional[float] = Field(default=None, gt=0)
    p: SchattenOrder = INF
    epsilon: float = Field(default=0.3, ge=0)
    m: Optional[int] = Field(default=None, ge=1)
    d: int = Field(default=2, ge=1)
    d_H: int = Field(default=4, ge=1)
    L: int = Field(default=1, ge=1)
    K: int = Field(default=2, ge=2)
    gamma: float = Field(default=1.0, gt=0)
    min_x_norm: float = Field(default=1.0, gt=0)
    delta_conf: float = Field(default=0.05, gt=0, lt=1)
    B_loss: float = Field(default=1.0, gt=0)
    eta: float = Field(default=2.5, gt=0)

    @property
    def budget_b(self) -> float:
        if self.b is None:
            raise DomainError("observable norm budget b is not set")
        return self.b

    def with_updates(self, **updates: Any) -> "BoundConfig":
        return self.model_validate({**self.model_dump(), **updates})


_REPORTED_BOUNDS = ("rc_bound", "excess_scaled", "arc_bound", "pac_slack", "assembled_generalization_bound")


class BoundReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    theorem: str
    family: str
    variant: str
    space: str
    r: SchattenOrder
    p: SchattenOrder
    epsilon: float
    m: int
    d: int
    d_H: int
    rc_bound: float = Field(ge=0)
    excess_scaled: float = Field(ge=0)
    arc_bound: float = Field(ge=0)
    pac_slack: float = Field(ge=0)
    assembled_generalization_bound: float = Field(ge=0)
    provenance: List[Tuple[str, str]] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _finite_bounds(cls, data: Any) -> Any:
        if isinstance(data, dict):
            for name in _REPORTED_BOUNDS:
                value = data.get(name)
                if value is not None and not np.isfinite(value):
                    raise DivergenceError(f"{name} is not finite: {value}")
        return data

    def to_rows(self) -> List[Dict[str, Any]]:
        """One CSV row per quantity: theorem, r, p, epsilon, m, d, d_H, family, variant, value."""
        head = {
            "r": self.model_dump(mode="json")["r"],
            "p": self.model_dump(mode="json")["p"],
            "epsilon": self.epsilon,
            "m": self.m,
            "d": self.d,
            "d_H": self.d_H,
            "family": self.family,
            "variant": self.variant,
        }
        values = [
            ("thm2", self.rc_bound),
            ("excess", self.excess_scaled),
            ("thm3", self.arc_bound),
            ("pac_slack", self.pac_slack),
            ("thm1", self.assembled_generalization_bound),
        ]
        return [{"theorem": name, **head, "value": v} for name, v in values]


# ---------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------


def _stack(states: Sequence[Any]) -> np.ndarray:
    rhos = [validate_density(s) for s in states]
    if not rhos:
        raise DomainError("bound evaluation needs at least one state")
    dims = {r.shape[0] for r in rhos}
    if len(dims) != 1:
        raise DomainError(f"states have mixed dimensions {sorted(dims)}")
    return np.stack(rhos)


def khintchine_constant(beta: float) -> float:
    """B_beta = 2^(-1/4) sqrt(pi beta / e)."""
    return 2.0 ** -0.25 * math.sqrt(math.pi * beta / math.e)


def rademacher_draw(seed: int, index: int, m: int) -> np.ndarray:
    """The index-th sign vector of an estimator seeded with `seed`."""
    return substream(seed, "rademacher", index).choice(np.array([-1.0, 1.0]), size=m)


def _signed(labels: Optional[Sequence[int]], m: int) -> np.ndarray:
    if labels is None:
        return np.ones(m)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if y.size != m:
        raise DomainError(f"{y.size} labels for {m} states")
    return 1.0 - 2.0 * y


def _mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(n))


# ---------------------------------------------------------------------
# Standard Rademacher complexity
# ---------------------------------------------------------------------


def rc_bound_thm2(dataset_states: Sequence[Any], cfg: BoundConfig) -> float:
    """
    Upper bound on the empirical RC of the r-Schatten observable class, from
    S2 = sum_i rho_i^2. Orders strictly between 1 and 2 have no bound.
    """
    rhos = _stack(dataset_states)
    m, d_h = rhos.shape[0], rhos.shape[1]
    b = cfg.budget_b
    r = cfg.r
    if 1.0 < r < 2.0:
        raise UnsupportedOrder(f"no RC bound for 1 < r < 2 (r = {r})")

    s2 = symmetrize(np.einsum("mij,mjk->ik", rhos, rhos))
    if r == 1.0:
        if d_h < 2:
            return 0.0
        return b / m * math.sqrt(2.0 * math.log(d_h) * schatten_norm(s2, INF))
    root = symmetrize(psd_sqrt(s2))
    if math.isinf(r):
        return b / m * schatten_norm(root, 1.0)
    q = dual_order(r)
    return b / m * khintchine_constant(q) * schatten_norm(root, q)


def _draw_value(rhos: np.ndarray, signs: np.ndarray, b: float, q: float) -> float:
    mix = symmetrize(np.tensordot(signs, rhos, axes=1))
    return b / rhos.shape[0] * schatten_norm(mix, q)


def mc_rc_estimate(
    dataset_states: Sequence[Any],
    labels: Optional[Sequence[int]],
    cfg: BoundConfig,
    n_draws: int,
    seed: int,
) -> Tuple[float, float]:
    """
    Exact empirical RC of the r-Schatten class, averaged over sign draws:
    each draw contributes (b/m) ||sum_i sigma_i y~_i rho_i||_{r/(r-1)}.
    Returns (mean, standard error).
    """
    if n_draws < 1:
        raise DomainError("n_draws must be >= 1")
    rhos = _stack(dataset_states)
    m = rhos.shape[0]
    signed = _signed(labels, m)
    q = dual_order(cfg.r)
    b = cfg.budget_b
    values = [_draw_value(rhos, rademacher_draw(seed, i, m) * signed, b, q) for i in range(n_draws)]
    return _mean_stderr(values)


def rc_exact_enumeration(dataset_states: Sequence[Any], cfg: BoundConfig) -> float:
    """Empirical RC by averaging over all 2^m sign vectors."""
    rhos = _stack(dataset_states)
    m = rhos.shape[0]
    if m > MAX_ENUMERATION:
        raise DomainError(f"enumeration limited to m <= {MAX_ENUMERATION}, got {m}")
    q = dual_order(cfg.r)
    b = cfg.budget_b
    values = [
        _draw_value(rhos, np.array(signs), b, q)
        for signs in itertools.product((-1.0, 1.0), repeat=m)
    ]
    return math.fsum(values) / len(values)


# ---------------------------------------------------------------------
# Excess terms
# ---------------------------------------------------------------------


def _family(family: Any) -> EmbeddingFamily:
    return family if isinstance(family, EmbeddingFamily) else EmbeddingFamily(family)


def excess_classical_prop1(cfg: BoundConfig, family: Any) -> float:
    """Scaled excess RC under classical l_p attacks, constants as stated for the embedding."""
    fam = _family(family)
    eps, d, L = cfg.epsilon, cfg.d, cfg.L
    ip = inverse_order(cfg.p)
    if eps == 0:
        return 0.0
    if fam is EmbeddingFamily.AMPLITUDE:
        spread = max(1.0, d ** (0.5 - ip))
        return 2.0 ** (1 + math.ceil(math.log2(d))) * min(eps * spread / cfg.min_x_norm, 1.0)
    if fam in (EmbeddingFamily.ANGLE, EmbeddingFamily.LLAYER_ANGLE):
        return 2.0 * L * (2.0 * eps) ** d * d ** (-d * ip)
    return 2.0 * L * (2.0 * math.sqrt(2.0) * eps) ** (d / 2) * max(d ** (-d / 4), d ** (-d * ip / 2))


def excess_classical_appendix(cfg: BoundConfig, family: Any) -> float:
    """Same quantity with the constants of the per-embedding smoothness derivations."""
    fam = _family(family)
    eps, d, L = cfg.epsilon, cfg.d, cfg.L
    ip = inverse_order(cfg.p)
    if eps == 0:
        return 0.0
    if fam is EmbeddingFamily.AMPLITUDE:
        spread = max(float(d), d ** (1.5 - ip))
        return 2.0 * min(eps * spread / cfg.min_x_norm, float(d))
    if fam in (EmbeddingFamily.ANGLE, EmbeddingFamily.LLAYER_ANGLE):
        return 2.0 * L * eps**d * d ** (-d * ip)
    return 2.0 * L * (math.sqrt(2.0) * eps) ** (d / 2) * max(d ** (-d / 4), d ** (-d * ip / 2))


def excess_classical(cfg: BoundConfig, family: Any, variant: Any = ExcessVariant.PROP1) -> float:
    if ExcessVariant(variant) is ExcessVariant.APPENDIX:
        return excess_classical_appendix(cfg, family)
    return excess_classical_prop1(cfg, family)


def excess_quantum(cfg: BoundConfig) -> float:
    """epsilon * max(d_H, d_H^(2 - 1/r - 1/p))."""
    d_h = float(cfg.d_H)
    exponent = 2.0 - inverse_order(cfg.r) - inverse_order(cfg.p)
    return cfg.epsilon * max(d_h, d_h**exponent)


def empirical_excess(
    spec: EmbeddingSpec,
    X: np.ndarray,
    cfg: BoundConfig,
    n_perturb: int,
    seed: int,
) -> float:
    """
    Sampled sup of ||rho(x) - rho(x')||_{r/(r-1)} over uniform l_p perturbations
    of each row of X (p in {2, inf}). Multiply by d_H for the scaled excess.
    """
    q = dual_order(cfg.r)
    budget = AttackBudget(p=cfg.p, epsilon=cfg.epsilon)
    rng = substream(seed, "perturb")
    best = 0.0
    for x in np.atleast_2d(np.asarray(X, dtype=float)):
        rho = embed(x, spec)
        for x_pert in random_perturbations(x, budget, rng, n_perturb):
            best = max(best, schatten_norm(symmetrize(rho - embed(x_pert, spec)), q))
    return best


def j_of_r(r: float) -> float:
    """Dudley-integral constant J(r) of the adversarial RC bound."""
    two_r = 2.0 ** inverse_order(r)
    t = math.log(6.0 * two_r)
    return 36.0 * two_r * ((1.0 / two_r) / 6.0 * math.sqrt(t) + 0.5 * math.sqrt(math.pi) * erfc(math.sqrt(t)))


def j_prime_of_r(r: float) -> float:
    """Multiclass constant: the same integral with prefactor 72 instead of 36."""
    return 2.0 * j_of_r(r)


# ---------------------------------------------------------------------
# Adversarial bounds
# ---------------------------------------------------------------------


def _m_of(rhos_or_states: Sequence[Any]) -> int:
    return len(rhos_or_states)


def arc_bound_thm3(dataset_states: Sequence[Any], cfg: BoundConfig, excess_S: float) -> BoundReport:
    """
    RC bound plus b * S * J(r) / sqrt(m). The returned report carries the
    RC, excess and ARC terms; PAC fields are left at zero.
    """
    rc = rc_bound_thm2(dataset_states, cfg)
    m = _m_of(dataset_states)
    arc = rc + cfg.budget_b * excess_S * j_of_r(cfg.r) / math.sqrt(m)
    return BoundReport(
        theorem="thm3",
        family="",
        variant="",
        space="",
        r=cfg.r,
        p=cfg.p,
        epsilon=cfg.epsilon,
        m=m,
        d=cfg.d,
        d_H=int(np.asarray(dataset_states[0]).shape[0]),
        rc_bound=rc,
        excess_scaled=excess_S,
        arc_bound=arc,
        pac_slack=0.0,
        assembled_generalization_bound=0.0,
        provenance=[
            ("thm2", "RC <= (b/m) * norm of sqrt(sum rho_i^2)"),
            ("thm3", "ARC <= RC + b * S * J(r) / sqrt(m)"),
        ],
    )


def check_min_eigenvalue(dataset_states: Sequence[Any], epsilon: float) -> None:
    """Every state must have minimum eigenvalue >= epsilon (up to 1e-12)."""
    rhos = _stack(dataset_states)
    lows = np.linalg.eigvalsh(rhos)[:, 0]
    bad = np.flatnonzero(lows < epsilon - 1e-12)
    if bad.size:
        raise AssumptionViolation(bad, epsilon)


def noisy_bounds_thm4(dataset_states: Sequence[Any], cfg: BoundConfig) -> Tuple[float, float]:
    """
    (lower, upper) for the adversarial RC of noisy embeddings under quantum
    attacks. `lower` is the RC bound used as the reference scale; the
    certified inequality is between exact complexities.
    """
    check_min_eigenvalue(dataset_states, cfg.epsilon)
    rc = rc_bound_thm2(dataset_states, cfg)
    m = _m_of(dataset_states)
    d_h = float(np.asarray(dataset_states[0]).shape[0])
    factor = max(1.0, d_h ** (1.0 - inverse_order(cfg.p) - inverse_order(cfg.r)))
    return rc, rc + cfg.budget_b * cfg.epsilon * factor / math.sqrt(m)


def covering_number_lemma1(cfg: BoundConfig, delta: float) -> float:
    """Natural log of the delta-cover size of the r-Schatten ball of radius b."""
    b = cfg.budget_b
    reach = 2.0 ** inverse_order(cfg.r) * b
    if not 0 < delta <= reach:
        raise DomainError(f"delta must lie in (0, {reach:g}], got {delta}")
    return cfg.d_H**2 * math.log(3.0 * reach / delta)


def multiclass_bound_thm5(dataset_states: Sequence[Any], cfg: BoundConfig, excess_S: float) -> float:
    rc = rc_bound_thm2(dataset_states, cfg)
    m = _m_of(dataset_states)
    K, gamma = cfg.K, cfg.gamma
    return 2.0 * K / gamma * rc + K * cfg.budget_b * excess_S * j_prime_of_r(cfg.r) / (gamma * math.sqrt(m))


def pac_slack(cfg: BoundConfig, m: Optional[int] = None) -> float:
    """3 B sqrt(ln(2/delta) / (2m))."""
    m = cfg.m if m is None else m
    if m is None or m < 1:
        raise DomainError("sample count m is not set")
    if not 0 < cfg.delta_conf < 1:
        raise DomainError(f"confidence delta must lie in (0, 1), got {cfg.delta_conf}")
    return 3.0 * cfg.B_loss * math.sqrt(math.log(2.0 / cfg.delta_conf) / (2.0 * m))


def pac_assemble_thm1(empirical_risk: float, complexity_term: float, cfg: BoundConfig) -> float:
    """Population-risk bound: empirical + 2 eta * complexity + PAC slack."""
    return empirical_risk + 2.0 * cfg.eta * complexity_term + pac_slack(cfg)


# ---------------------------------------------------------------------
# Adversarial RC oracle for one qubit
# ---------------------------------------------------------------------

_PAULIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def _pauli_coefficients(rhos: np.ndarray) -> np.ndarray:
    """rho = c0 I + c . sigma, coefficients (m, 4)."""
    return 0.5 * np.real(np.einsum("mij,kji->mk", rhos, _PAULIS))


def _small_arc_setup(
    dataset_states: Sequence[Any],
    labels: Optional[Sequence[int]],
    cfg: BoundConfig,
    n_draws: int,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray, float]:
    rhos = _stack(dataset_states)
    if rhos.shape[1] != 2:
        raise DomainError("the single-qubit adversarial oracle needs d_H = 2")
    if cfg.r != 2.0 or cfg.p != 2.0:
        raise UnsupportedOrder("the single-qubit adversarial oracle needs r = p = 2")
    if n_draws < 1:
        raise DomainError("n_draws must be >= 1")
    check_min_eigenvalue(rhos, cfg.epsilon)
    m = rhos.shape[0]
    signed = _signed(labels, m)
    sigmas = np.stack([rademacher_draw(seed, i, m) for i in range(n_draws)])
    mix = (sigmas * signed) @ _pauli_coefficients(rhos)
    return mix, sigmas.sum(axis=1), float(m)


def _arc_objective(v: np.ndarray, mix: np.ndarray, total: np.ndarray, eps: float) -> np.ndarray:
    """2 (a0 m0 + a . m) - sqrt(2) eps S ||a|| over the last axis of v."""
    lin = 2.0 * np.einsum("...k,...k->...", v, mix)
    return lin - math.sqrt(2.0) * eps * total * np.linalg.norm(v[..., 1:], axis=-1)


def mc_arc_estimate_small(
    dataset_states: Sequence[Any],
    labels: Optional[Sequence[int]],
    cfg: BoundConfig,
    n_draws: int,
    seed: int,
) -> Tuple[float, float]:
    """
    Adversarial RC of the r = 2 observable class on one qubit under p = 2
    quantum attacks, for states meeting the minimum-eigenvalue condition.

    Per draw, A = a0 I + a . sigma ranges over sqrt(2 (a0^2 + |a|^2)) <= b and
    the attacked score is Tr(A M) - eps S sqrt(2) |a| with M = sum sigma_i y~_i rho_i
    and S = sum sigma_i. The sup is found by projected (proximal) gradient
    ascent from 20 starts; start 0 is the RC maximiser b M / ||M||_2.
    """
    mix, total, m = _small_arc_setup(dataset_states, labels, cfg, n_draws, seed)
    radius = cfg.budget_b / math.sqrt(2.0)
    eps = cfg.epsilon
    draws = mix.shape[0]

    rng = substream(seed, "restarts")
    starts = rng.standard_normal((draws, ARC_RESTARTS, 4))
    starts /= np.linalg.norm(starts, axis=-1, keepdims=True)
    starts *= radius * rng.uniform(0.0, 1.0, size=(draws, ARC_RESTARTS, 1)) ** 0.25
    mix_norm = np.linalg.norm(mix, axis=-1, keepdims=True)
    starts[:, 0] = np.where(mix_norm > 0, radius * mix / np.where(mix_norm > 0, mix_norm, 1.0), 0.0)

    m_b = mix[:, None, :]
    s_b = total[:, None]
    penalty = math.sqrt(2.0) * eps * total
    step = 4.0 * radius / np.maximum(2.0 * mix_norm[:, 0] + np.abs(penalty), 1e-300)
    step = step[:, None]

    v = starts
    best = _arc_objective(v, m_b, s_b, eps)
    for _ in range(ARC_ITERATIONS):
        w = v + 2.0 * step[..., None] * m_b
        a = w[..., 1:]
        a_norm = np.linalg.norm(a, axis=-1, keepdims=True)
        safe = np.where(a_norm > 0, a_norm, 1.0)
        kick = (step * penalty[:, None])[..., None]
        scale = np.where(a_norm > 0, np.maximum(0.0, 1.0 - kick / safe), 0.0)
        w[..., 1:] = a * scale
        norms = np.linalg.norm(w, axis=-1, keepdims=True)
        v = np.where(norms > radius, w * (radius / np.where(norms > 0, norms, 1.0)), w)
        best = np.maximum(best, _arc_objective(v, m_b, s_b, eps))

    values = best.max(axis=1) / m
    return _mean_stderr(list(values))


def arc_small_closed_form(
    dataset_states: Sequence[Any],
    labels: Optional[Sequence[int]],
    cfg: BoundConfig,
    n_draws: int,
    seed: int,
) -> Tuple[float, float]:
    """
    Exact per-draw maximum of the same objective:
    (b / sqrt 2) * sqrt(u^2 + max(c, 0)^2) with u = 2 m0, c = 2 |m| - sqrt(2) eps S.
    """
    mix, total, m = _small_arc_setup(dataset_states, labels, cfg, n_draws, seed)
    radius = cfg.budget_b / math.sqrt(2.0)
    u = 2.0 * mix[:, 0]
    c = 2.0 * np.linalg.norm(mix[:, 1:], axis=1) - math.sqrt(2.0) * cfg.epsilon * total
    values = radius * np.sqrt(u**2 + np.maximum(c, 0.0) ** 2) / m
    return _mean_stderr(list(values))


# ---------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------


def evaluate_bounds(
    dataset_states: Sequence[Any],
    cfg: BoundConfig,
    family: Any,
    space: str = "classical",
    variant: Any = ExcessVariant.PROP1,
    empirical_risk: float = 0.0,
) -> BoundReport:
    """RC, excess, ARC, PAC slack and the assembled population-risk bound."""
    fam = _family(family)
    var = ExcessVariant(variant)
    m = _m_of(dataset_states)
    d_h = int(np.asarray(dataset_states[0]).shape[0])
    cfg = cfg.with_updates(m=m, d_H=d_h)

    if space == "quantum":
        excess = excess_quantum(cfg)
        source = ("excess", "S^Q <= eps * max(d_H, d_H^(2-1/r-1/p))")
    else:
        excess = excess_classical(cfg, fam, var)
        source = ("excess", f"S^C for {fam.value} embedding, {var.value} constants")

    partial = arc_bound_thm3(dataset_states, cfg, excess)
    slack = pac_slack(cfg)
    assembled = pac_assemble_thm1(empirical_risk, partial.arc_bound, cfg)
    logger.info(
        "[bounds] %s %s m=%d d_H=%d: rc=%.6g excess=%.6g arc=%.6g",
        fam.value,
        space,
        m,
        d_h,
        partial.rc_bound,
        excess,
        partial.arc_bound,
    )
    return partial.model_copy(
        update={
            "theorem": "thm1",
            "family": fam.value,
            "variant": var.value,
            "space": space,
            "pac_slack": slack,
            "assembled_generalization_bound": assembled,
            "provenance": partial.provenance
            + [source, ("thm1", "risk <= empirical + 2 eta ARC + 3 B sqrt(ln(2/delta) / 2m)")],
        }
    )
