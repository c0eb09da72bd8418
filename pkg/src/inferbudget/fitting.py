"""Marginal likelihood over latent budgets and its gradient-based fitting.

The objective is the negative marginal log-likelihood of observed actions,
mixing each state's budget-conditioned policy under a per-subpopulation
categorical prior.  Gradients are analytic: the prior side is the
softmax-categorical score weighted by posterior responsibilities; the
reward/lexicon side chains responsibilities through each family's policy
Jacobians.  Optimization is full-batch gradient descent with backtracking
line search, so the NLL trace is nonincreasing and runs are reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import BudgetPrior, OptimizationError, ParameterError


@dataclass
class ModelParams:
    theta_raw: np.ndarray | None       # family-specific parameter block
    eta_logits: np.ndarray             # [n_subpops, K]
    budget_kind: str = "runtime"       # runtime | temp | puct

    def __post_init__(self):
        if self.theta_raw is not None:
            self.theta_raw = np.asarray(self.theta_raw, dtype=float).reshape(-1)
        self.eta_logits = np.atleast_2d(np.asarray(self.eta_logits, dtype=float))

    def priors(self) -> list[BudgetPrior]:
        return [BudgetPrior(row, subpopulation_id=i)
                for i, row in enumerate(self.eta_logits)]

    def prior_probs(self) -> np.ndarray:
        z = self.eta_logits - logsumexp(self.eta_logits, axis=1, keepdims=True)
        return np.exp(z)

    @classmethod
    def initial(cls, family, budget_kind="runtime", theta_raw=None) -> "ModelParams":
        if theta_raw is None and family.theta_size:
            theta_raw = (family.default_theta() if hasattr(family, "default_theta")
                         else np.zeros(family.theta_size))
        k = len(family.budget_values)
        return cls(theta_raw, np.zeros((family.n_subpops, k)), budget_kind)


@dataclass
class FitConfig:
    learning_rate: float = 0.5
    max_iters: int = 200
    tol: float = 1e-6                  # stop when NLL improves by less
    seed: int = 0
    deterministic: bool = True         # reductions are canonical-order already
    l2_eta: float = 0.0
    lr_sweep: list[float] | None = None

    def __post_init__(self):
        if self.learning_rate <= 0 or self.tol <= 0:
            raise ParameterError("learning rate and tolerance must be positive")
        if self.lr_sweep is not None and any(r <= 0 for r in self.lr_sweep):
            raise ParameterError("swept learning rates must be positive")


@dataclass
class FitResult:
    params: ModelParams
    nll: float
    nll_trace: np.ndarray
    wall_time: float
    n_iters: int
    valid_nll: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta_raw": None if self.params.theta_raw is None
            else self.params.theta_raw.tolist(),
            "eta_logits": self.params.eta_logits.tolist(),
            "budget_kind": self.params.budget_kind,
            "nll": self.nll,
            "valid_nll": self.valid_nll,
            "nll_trace": [float(v) for v in self.nll_trace],
            "wall_time": self.wall_time,
            "n_iters": self.n_iters,
            "meta": self.meta,
        }


def _log_weights(eta_logits: np.ndarray) -> np.ndarray:
    return eta_logits - logsumexp(eta_logits, axis=1, keepdims=True)


def marginal_nll(family, params: ModelParams) -> float:
    """Total negative marginal log-likelihood over all records (by count)."""
    if family.n_records == 0:
        return 0.0
    T = family.sa_tables(params.theta_raw)
    logw = _log_weights(params.eta_logits)
    lse = logsumexp(logw[family.sa_subpop] + T, axis=1)
    return float(-(family.counts * lse).sum())


def grad_params(family, params: ModelParams):
    """Analytic gradients of marginal_nll w.r.t. (theta_raw, eta_logits)."""
    if family.n_records == 0:
        gt = None if params.theta_raw is None else np.zeros_like(params.theta_raw)
        return gt, np.zeros_like(params.eta_logits)
    T, GT = family.sa_tables(params.theta_raw, with_grad=True)
    logw = _log_weights(params.eta_logits)
    joint = logw[family.sa_subpop] + T
    lse = logsumexp(joint, axis=1)
    resp = np.exp(joint - lse[:, None])                       # [n_sa, K]
    w = np.exp(logw)                                          # [S, K]
    counts = family.counts.astype(float)
    # d NLL / d eta = sum_records (w - responsibility), per subpopulation
    acc = np.zeros_like(w)
    np.add.at(acc, family.sa_subpop, counts[:, None] * resp)
    per_sub = np.zeros(family.n_subpops)
    np.add.at(per_sub, family.sa_subpop, counts)
    grad_eta = per_sub[:, None] * w - acc
    if params.theta_raw is None or family.theta_size == 0:
        return None, grad_eta
    grad_theta = -np.einsum("r,rk,rkp->p", counts, resp, GT)
    return grad_theta, grad_eta


def budget_posteriors(family, params: ModelParams) -> np.ndarray:
    """Count-weighted average posterior over budgets per subpopulation."""
    T = family.sa_tables(params.theta_raw)
    logw = _log_weights(params.eta_logits)
    joint = logw[family.sa_subpop] + T
    resp = np.exp(joint - logsumexp(joint, axis=1)[:, None])
    acc = np.zeros_like(logw)
    np.add.at(acc, family.sa_subpop, family.counts[:, None] * resp)
    totals = np.zeros(family.n_subpops)
    np.add.at(totals, family.sa_subpop, family.counts)
    return acc / np.maximum(totals[:, None], 1.0)


def _pack(params: ModelParams, freeze_theta, freeze_eta):
    parts = []
    if not freeze_theta and params.theta_raw is not None:
        parts.append(params.theta_raw)
    if not freeze_eta:
        parts.append(params.eta_logits.reshape(-1))
    return np.concatenate(parts) if parts else np.empty(0)


def _unpack(x, params: ModelParams, freeze_theta, freeze_eta):
    pos = 0
    theta = params.theta_raw
    if not freeze_theta and params.theta_raw is not None:
        n = params.theta_raw.size
        theta = x[pos:pos + n]
        pos += n
    eta = params.eta_logits
    if not freeze_eta:
        eta = x[pos:].reshape(params.eta_logits.shape)
    return ModelParams(theta, eta, params.budget_kind)


def fit(family, config: FitConfig, params0: ModelParams | None = None,
        freeze_theta: bool = False, freeze_eta: bool = False) -> FitResult:
    """Full-batch descent on marginal_nll with backtracking line search."""
    start = time.perf_counter()
    if params0 is None:
        params0 = ModelParams.initial(family)
    if family.theta_size == 0:
        freeze_theta = True
    if family.n_records == 0:
        return FitResult(params0, 0.0, np.array([0.0]), 0.0, 0)

    lam = config.l2_eta
    # optimize the per-record mean so step sizes are dataset-size invariant;
    # traces and results stay in total-NLL units
    scale = 1.0 / family.n_records

    def objective(p: ModelParams) -> float:
        val = marginal_nll(family, p)
        if lam:
            val += 0.5 * lam * float(np.sum(p.eta_logits ** 2))
        return val

    def gradient(p: ModelParams) -> np.ndarray:
        gt, ge = grad_params(family, p)
        if lam:
            ge = ge + lam * p.eta_logits
        parts = []
        if not freeze_theta and p.theta_raw is not None:
            parts.append(gt if gt is not None else np.zeros_like(p.theta_raw))
        if not freeze_eta:
            parts.append(ge.reshape(-1))
        return scale * np.concatenate(parts) if parts else np.empty(0)

    x = _pack(params0, freeze_theta, freeze_eta)
    params = params0
    f = objective(params)
    if not np.isfinite(f):
        raise OptimizationError("objective not finite at the initial point",
                                trace=[f])
    trace = [f]
    iters = 0
    if x.size == 0:  # nothing to optimize
        return FitResult(params, marginal_nll(family, params), np.array(trace),
                         time.perf_counter() - start, 0)
    # Diagonal RMS preconditioning (Adam family, no momentum): the reward
    # and logit blocks have wildly different curvature, and a positive
    # diagonal rescaling keeps the step a descent direction so backtracking
    # still guarantees a nonincreasing trace.
    v = np.zeros_like(x)
    eps = 1e-8
    for it in range(config.max_iters):
        g = gradient(params)
        if not np.all(np.isfinite(g)):
            raise OptimizationError("gradient not finite", trace=trace)
        if float(np.dot(g, g)) == 0.0:
            break
        v = 0.9 * v + 0.1 * g * g
        vhat = v / (1.0 - 0.9 ** (it + 1))
        d = g / (np.sqrt(vhat) + eps)
        slope = float(np.dot(g, d)) * family.n_records  # total-NLL units
        t = config.learning_rate
        accepted = False
        for _ in range(50):
            cand = _unpack(x - t * d, params, freeze_theta, freeze_eta)
            fc = objective(cand)
            if np.isfinite(fc) and fc <= f - 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        improvement = f - fc
        x, params, f = x - t * d, cand, fc
        trace.append(f)
        iters += 1
        if improvement < config.tol:
            break
    return FitResult(params, marginal_nll(family, params), np.array(trace),
                     time.perf_counter() - start, iters)


def fit_boltzmann(family, config: FitConfig,
                  params0: ModelParams | None = None,
                  budget_kind: str = "temp") -> FitResult:
    """Same machinery with a temperature/exploration grid as the latent."""
    if params0 is None:
        params0 = ModelParams.initial(family, budget_kind=budget_kind)
    else:
        params0 = ModelParams(params0.theta_raw, params0.eta_logits, budget_kind)
    result = fit(family, config, params0)
    result.params.budget_kind = budget_kind
    return result


def fixed_budget_baseline(family, config: FitConfig, budget,
                          theta0: np.ndarray | None = None,
                          sharpness: float = 60.0) -> FitResult:
    """Point-mass prior frozen at one budget; only theta is fitted."""
    values = list(family.budget_values)
    if float(budget) not in values:
        raise ParameterError(f"budget {budget} not on the family grid")
    k = values.index(float(budget))
    logits = np.zeros((family.n_subpops, len(values)))
    logits[:, k] = sharpness
    params0 = ModelParams.initial(family, theta_raw=theta0)
    params0 = ModelParams(params0.theta_raw, logits, "runtime")
    result = fit(family, config, params0, freeze_eta=True)
    result.meta["fixed_budget"] = budget
    return result


def sweep_learning_rates(family, config: FitConfig, rates,
                         valid_family=None,
                         params0: ModelParams | None = None,
                         fit_fn=fit, **fit_kwargs) -> FitResult:
    """Fit once per rate; keep the best by validation (else train) NLL."""
    best = None
    tried = []
    for lr in rates:
        cfg = FitConfig(learning_rate=lr, max_iters=config.max_iters,
                        tol=config.tol, seed=config.seed,
                        deterministic=config.deterministic,
                        l2_eta=config.l2_eta)
        try:
            res = fit_fn(family, cfg, params0=params0, **fit_kwargs)
        except OptimizationError:
            tried.append((lr, None))
            continue
        score = (marginal_nll(valid_family, res.params)
                 if valid_family is not None else res.nll)
        res.valid_nll = float(score)
        res.meta["learning_rate"] = lr
        tried.append((lr, float(score)))
        if best is None or score < best.valid_nll:
            best = res
    if best is None:
        raise OptimizationError("every learning rate diverged",
                                trace=[lr for lr, _ in tried])
    best.meta["sweep"] = tried
    return best
