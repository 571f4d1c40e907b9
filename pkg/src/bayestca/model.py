"""Regression model: multiplicative links, priors and the log-posterior.

The links map covariates X1..X4 to ALD parameters:

    mu    = -exp(b0 + b1 ln X1 + b2 ln X2 + b3 ln X3 + b4 ln X4)
    sigma =  exp(g0 + g1 ln X1 + g2 ln X2 + g3 ln X3 + g4 ln X4
                 [+ g5 ln(|X2 - 20| + g6)   for PWP20 only])
    r     =  exp(a0 + a1 ln X1 + a2 ln X2),   kappa = (r + sqrt(4 + r^2)) / 2

X1 is a fraction (size/ADV), X2 and X3 are percents, X4 is bps.  The PWP20
scale term captures the variance dip at the 20 percent participation target;
g6 > 0 keeps the log argument positive (it has zero prior mass at g6 <= 0).

Two-stage pooling: the generic model is fit on all algorithms pooled; its
posterior marginal moments then become normal priors for per-algorithm fits
in which the location (beta) and skew (alpha) blocks are algorithm-specific
while the scale block (gamma) stays shared across algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import ald
from .errors import ConfigError, InsufficientSamples, InvalidCovariate, ShapeMismatch

LOG_2PI = float(np.log(2.0 * np.pi))

N_BETA = 5
N_ALPHA = 3


def n_gamma(kind: str) -> int:
    return 7 if kind == "PWP20" else 5


def coeff_names(kind: str) -> list[str]:
    """Canonical coefficient order: beta0..beta4, gamma0..gamma{4|6}, alpha0..alpha2."""
    return ([f"beta{i}" for i in range(N_BETA)]
            + [f"gamma{i}" for i in range(n_gamma(kind))]
            + [f"alpha{i}" for i in range(N_ALPHA)])


@dataclass(frozen=True)
class CoefficientVector:
    """One point in coefficient space: location beta, scale gamma, skew alpha.

    gamma has 5 entries, or 7 for PWP20 (g5 weights the |X2-20| term and g6
    offsets its log).  g6 <= 0 is representable but carries zero prior mass.
    """

    beta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        if self.beta.shape != (N_BETA,):
            raise ShapeMismatch(f"beta must have {N_BETA} entries, got {self.beta.shape}")
        if self.gamma.shape not in ((5,), (7,)):
            raise ShapeMismatch(f"gamma must have 5 or 7 entries, got {self.gamma.shape}")
        if self.alpha.shape != (N_ALPHA,):
            raise ShapeMismatch(f"alpha must have {N_ALPHA} entries, got {self.alpha.shape}")

    @property
    def is_pwp(self) -> bool:
        return self.gamma.shape[0] == 7

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma, self.alpha])

    @classmethod
    def from_flat(cls, vec, kind: str) -> "CoefficientVector":
        vec = np.asarray(vec, dtype=float)
        g = n_gamma(kind)
        if vec.shape != (N_BETA + g + N_ALPHA,):
            raise ShapeMismatch(f"expected {N_BETA + g + N_ALPHA} coefficients for {kind}")
        return cls(beta=vec[:N_BETA], gamma=vec[N_BETA:N_BETA + g], alpha=vec[N_BETA + g:])


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal priors, one (mean, std) per coefficient.

    ``truncated`` marks coordinates restricted to (0, inf) (left truncation at
    zero, used for g6).  ``pooled``, when set, marks which coordinates are
    shared across algorithms in a per-algorithm fit; it is populated by
    ``hierarchical_prior_from_posterior`` and None for generic priors.
    """

    means: np.ndarray
    stds: np.ndarray
    truncated: np.ndarray
    pooled: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=float))
        object.__setattr__(self, "truncated", np.asarray(self.truncated, dtype=bool))
        if self.pooled is not None:
            object.__setattr__(self, "pooled", np.asarray(self.pooled, dtype=bool))
        if not (self.means.shape == self.stds.shape == self.truncated.shape):
            raise ShapeMismatch("prior mean/std/truncated shapes differ")
        if self.pooled is not None and self.pooled.shape != self.means.shape:
            raise ShapeMismatch("prior pooled mask shape differs")
        if np.any(self.stds <= 0):
            raise ShapeMismatch("prior stds must be > 0")

    def __len__(self) -> int:
        return self.means.shape[0]

    def to_dict(self) -> dict:
        d = {
            "mean": [float(v) for v in self.means],
            "std": [float(v) for v in self.stds],
            "truncated": [bool(v) for v in self.truncated],
        }
        d["pooled"] = None if self.pooled is None else [bool(v) for v in self.pooled]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        pooled = d.get("pooled")
        return cls(
            means=np.array(d["mean"], dtype=float),
            stds=np.array(d["std"], dtype=float),
            truncated=np.array(d["truncated"], dtype=bool),
            pooled=None if pooled is None else np.array(pooled, dtype=bool),
        )


def default_prior(kind: str) -> PriorSpec:
    """Generic-stage priors: wide intercepts, concave unit-ish slopes.

    beta0 ~ N(0,2), beta1..4 ~ N(0.5,0.5); gamma0 ~ N(0,2),
    gamma1..5 ~ N(0.5,0.5), gamma6 ~ N(1,1) truncated at zero;
    alpha0 ~ N(-5,2) (start near zero skew), alpha1,2 ~ N(0,0.5).
    """
    g = n_gamma(kind)
    means = [0.0] + [0.5] * 4 + [0.0] + [0.5] * (g - 1) + [-5.0, 0.0, 0.0]
    stds = [2.0] + [0.5] * 4 + [2.0] + [0.5] * (g - 1) + [2.0, 0.5, 0.5]
    truncated = [False] * (N_BETA + g + N_ALPHA)
    if kind == "PWP20":
        means[N_BETA + 6] = 1.0
        stds[N_BETA + 6] = 1.0
        truncated[N_BETA + 6] = True
    return PriorSpec(means=np.array(means), stds=np.array(stds), truncated=np.array(truncated))


@dataclass(frozen=True)
class ModelSpec:
    """Benchmark kind + prior + pooling mode.

    ``algo_ids`` None means the generic pooled model; a tuple of ids selects
    the per-algorithm model with shared gamma, which requires a prior built
    from a generic-stage posterior (``pooled`` mask set).
    """

    kind: str
    prior: PriorSpec
    algo_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.prior) != N_BETA + n_gamma(self.kind) + N_ALPHA:
            raise ShapeMismatch(f"prior length {len(self.prior)} wrong for kind {self.kind}")
        if self.algo_ids is not None:
            object.__setattr__(self, "algo_ids", tuple(self.algo_ids))
            if not self.algo_ids:
                raise ConfigError("per-algorithm model needs at least one algo_id")
            if self.prior.pooled is None:
                raise ConfigError(
                    "per-algorithm model requires a prior derived from a generic-stage posterior"
                )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "prior": self.prior.to_dict(),
            "algo_ids": None if self.algo_ids is None else list(self.algo_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        ids = d.get("algo_ids")
        return cls(kind=d["kind"], prior=PriorSpec.from_dict(d["prior"]),
                   algo_ids=None if ids is None else tuple(ids))


def _checked_log_covariates(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 4:
        raise ShapeMismatch(f"covariates must have 4 columns, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise InvalidCovariate("covariates must be finite and > 0")
    return np.log(x)


def link(coeffs: CoefficientVector, x, kind: str) -> ald.ALDParams:
    """ALD parameters at covariates ``x`` (shape (4,) or (n, 4)).

    Written as explicit elementwise arithmetic so a scalar evaluation and a
    vectorized one round identically.
    """
    if coeffs.is_pwp != (kind == "PWP20"):
        raise ShapeMismatch(f"gamma length does not match kind {kind}")
    squeeze = np.ndim(x) == 1
    lnx = _checked_log_covariates(np.atleast_2d(x))
    l1, l2, l3, l4 = lnx[:, 0], lnx[:, 1], lnx[:, 2], lnx[:, 3]
    b, g, a = coeffs.beta, coeffs.gamma, coeffs.alpha

    mu = -np.exp(b[0] + b[1] * l1 + b[2] * l2 + b[3] * l3 + b[4] * l4)
    s_ln = g[0] + g[1] * l1 + g[2] * l2 + g[3] * l3 + g[4] * l4
    if coeffs.is_pwp:
        x2 = np.atleast_2d(np.asarray(x, dtype=float))[:, 1]
        arg = np.abs(x2 - 20.0) + g[6]
        if np.any(arg <= 0):
            raise InvalidCovariate("gamma6 must exceed -min|X2 - 20| for the PWP scale term")
        s_ln = s_ln + g[5] * np.log(arg)
    sigma = np.exp(s_ln)
    r = np.exp(a[0] + a[1] * l1 + a[2] * l2)
    kappa = 0.5 * (r + np.sqrt(4.0 + r * r))
    if squeeze:
        return ald.ALDParams(mu=float(mu[0]), sigma=float(sigma[0]), kappa=float(kappa[0]))
    return ald.ALDParams(mu=mu, sigma=sigma, kappa=kappa)


def log_prior(coeffs: CoefficientVector, prior: PriorSpec) -> float:
    """Sum of independent normal log-densities; -inf outside truncation bounds."""
    return _log_prior_flat(coeffs.to_flat(), prior)


def _log_prior_flat(w: np.ndarray, prior: PriorSpec) -> float:
    if w.shape != prior.means.shape:
        raise ShapeMismatch(f"coefficient shape {w.shape} does not match prior {prior.means.shape}")
    if np.any(prior.truncated & (w <= 0)):
        return -np.inf
    z = (w - prior.means) / prior.stds
    lp = -0.5 * float(z @ z) - float(np.log(prior.stds).sum()) - 0.5 * LOG_2PI * len(w)
    if np.any(prior.truncated):
        # left truncation at 0: renormalize by P(W > 0) = Phi(mean/std)
        t = prior.truncated
        lp -= float(np.log(ndtr(prior.means[t] / prior.stds[t])).sum())
    return lp


def _ald_loglik(y, lnx, abs_x2m20, beta, gamma, alpha) -> float:
    """Vectorized ALD log-likelihood; -inf when the links overflow."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        mu = -np.exp(beta[0] + lnx @ beta[1:])
        s_ln = gamma[0] + lnx @ gamma[1:5]
        if abs_x2m20 is not None:
            s_ln = s_ln + gamma[5] * np.log(abs_x2m20 + gamma[6])
        sigma = np.exp(s_ln)
        r = np.exp(alpha[0] + lnx[:, :2] @ alpha[1:])
        kappa = 0.5 * (r + np.sqrt(4.0 + r * r))
        resid = y - mu
        pos = resid >= 0
        kps = np.where(pos, kappa, 1.0 / kappa)
        sgn = np.where(pos, 1.0, -1.0)
        total = -np.log(sigma * (kappa + 1.0 / kappa)).sum() - ((resid / sigma) * sgn * kps).sum()
    return float(total) if np.isfinite(total) else -np.inf


def _observation_arrays(observations, kind: str):
    y = np.array([o.y for o in observations], dtype=float)
    x = np.array([[o.x1, o.x2, o.x3, o.x4] for o in observations], dtype=float)
    if len(observations):
        kinds = {o.kind for o in observations}
        if kinds != {kind}:
            raise ShapeMismatch(f"observations of kind {sorted(kinds)} fed to a {kind} model")
        lnx = _checked_log_covariates(x)
    else:
        lnx = np.zeros((0, 4))
    abs_x2m20 = np.abs(x[:, 1] - 20.0) if kind == "PWP20" and len(observations) else (
        np.zeros(0) if kind == "PWP20" else None)
    return y, lnx, abs_x2m20


class PooledPosterior:
    """Unnormalized log-posterior of the generic (pooled) model.

    Callable on the flat coefficient vector; exposes ``names``, ``init`` and
    ``blocks`` (beta / gamma / alpha index groups) for the sampler.
    """

    def __init__(self, kind: str, prior: PriorSpec, observations):
        self.kind = kind
        self.prior = prior
        self.names = coeff_names(kind)
        if len(prior) != len(self.names):
            raise ShapeMismatch("prior length does not match model kind")
        self._y, self._lnx, self._abs = _observation_arrays(observations, kind)
        g = n_gamma(kind)
        self.blocks = [np.arange(0, N_BETA), np.arange(N_BETA, N_BETA + g),
                       np.arange(N_BETA + g, N_BETA + g + N_ALPHA)]
        self.init = prior.means.copy()

    def __call__(self, w: np.ndarray) -> float:
        lp = _log_prior_flat(w, self.prior)
        if not np.isfinite(lp):
            return -np.inf
        g = n_gamma(self.kind)
        return lp + _ald_loglik(self._y, self._lnx, self._abs,
                                w[:N_BETA], w[N_BETA:N_BETA + g], w[N_BETA + g:])


class PerAlgoPosterior:
    """Per-algorithm model: own beta/alpha per algorithm, one shared gamma.

    Flat layout: [beta_A1, alpha_A1, beta_A2, alpha_A2, ..., gamma]; every
    algorithm's beta/alpha carries the same prior (the generic-stage
    posterior moments), gamma carries its own.  Algorithms with no
    observations contribute prior mass only.
    """

    def __init__(self, kind: str, prior: PriorSpec, algo_ids, observations):
        self.kind = kind
        if prior.pooled is None:
            raise ConfigError("per-algorithm posterior needs a pooled-marked prior")
        self.algo_ids = tuple(algo_ids)
        g = n_gamma(kind)
        if len(prior) != N_BETA + g + N_ALPHA:
            raise ShapeMismatch("prior length does not match model kind")
        extra = {o.algo_id for o in observations} - set(self.algo_ids)
        if extra:
            raise ConfigError(f"observations reference algos outside the model: {sorted(extra)}")

        self._g = g
        self._beta_prior = (prior.means[:N_BETA], prior.stds[:N_BETA])
        self._gamma_prior = (prior.means[N_BETA:N_BETA + g], prior.stds[N_BETA:N_BETA + g],
                             prior.truncated[N_BETA:N_BETA + g])
        self._alpha_prior = (prior.means[N_BETA + g:], prior.stds[N_BETA + g:])

        self.names: list[str] = []
        self.blocks: list[np.ndarray] = []
        self._beta_idx: dict[str, np.ndarray] = {}
        self._alpha_idx: dict[str, np.ndarray] = {}
        pos = 0
        for algo in self.algo_ids:
            self._beta_idx[algo] = np.arange(pos, pos + N_BETA)
            self.blocks.append(self._beta_idx[algo])
            self.names += [f"{algo}:beta{i}" for i in range(N_BETA)]
            pos += N_BETA
            self._alpha_idx[algo] = np.arange(pos, pos + N_ALPHA)
            self.blocks.append(self._alpha_idx[algo])
            self.names += [f"{algo}:alpha{i}" for i in range(N_ALPHA)]
            pos += N_ALPHA
        self._gamma_idx = np.arange(pos, pos + g)
        self.blocks.append(self._gamma_idx)
        self.names += [f"gamma{i}" for i in range(g)]

        self._data = {}
        for algo in self.algo_ids:
            rows = [o for o in observations if o.algo_id == algo]
            if rows:
                self._data[algo] = _observation_arrays(rows, kind)

        init = np.empty(pos + g)
        for algo in self.algo_ids:
            init[self._beta_idx[algo]] = self._beta_prior[0]
            init[self._alpha_idx[algo]] = self._alpha_prior[0]
        init[self._gamma_idx] = self._gamma_prior[0]
        self.init = init

    def __call__(self, w: np.ndarray) -> float:
        gm, gs, gt = self._gamma_prior
        gamma = w[self._gamma_idx]
        if np.any(gt & (gamma <= 0)):
            return -np.inf
        zg = (gamma - gm) / gs
        lp = -0.5 * float(zg @ zg) - float(np.log(gs).sum()) - 0.5 * LOG_2PI * len(gamma)
        if np.any(gt):
            lp -= float(np.log(ndtr(gm[gt] / gs[gt])).sum())
        bm, bs = self._beta_prior
        am, asd = self._alpha_prior
        for algo in self.algo_ids:
            beta = w[self._beta_idx[algo]]
            alpha = w[self._alpha_idx[algo]]
            zb = (beta - bm) / bs
            za = (alpha - am) / asd
            lp += -0.5 * float(zb @ zb) - float(np.log(bs).sum()) - 0.5 * LOG_2PI * len(beta)
            lp += -0.5 * float(za @ za) - float(np.log(asd).sum()) - 0.5 * LOG_2PI * len(alpha)
            data = self._data.get(algo)
            if data is not None:
                y, lnx, abs_x2 = data
                lp += _ald_loglik(y, lnx, abs_x2, beta, gamma, alpha)
                if not np.isfinite(lp):
                    return -np.inf
        return lp


def build_posterior(model: ModelSpec, observations):
    """The sampling target for a model spec: pooled or per-algorithm."""
    if model.algo_ids is None:
        return PooledPosterior(model.kind, model.prior, observations)
    return PerAlgoPosterior(model.kind, model.prior, model.algo_ids, observations)


def log_posterior(coeffs: CoefficientVector, observations, prior: PriorSpec) -> float:
    """log p(coeffs) + sum_i log ALD(y_i; link(coeffs, x_i)), unnormalized."""
    lp = log_prior(coeffs, prior)
    if not np.isfinite(lp):
        return -np.inf
    kind = "PWP20" if coeffs.is_pwp else next(iter({o.kind for o in observations}), "IS")
    y, lnx, abs_x2m20 = _observation_arrays(observations, kind)
    return lp + _ald_loglik(y, lnx, abs_x2m20, coeffs.beta, coeffs.gamma, coeffs.alpha)


def hierarchical_prior_from_posterior(stage1) -> PriorSpec:
    """Turn generic-stage posterior draws into per-algorithm priors.

    Per coefficient: normal with the stage-1 marginal mean and std (ddof=1,
    floored at 1e-6 so degenerate draws still give a proper prior).  beta and
    alpha are marked algorithm-specific, gamma shared; the g6 truncation is
    carried over.
    """
    draws = np.asarray(stage1.draws, dtype=float)
    if draws.shape[0] < 100:
        raise InsufficientSamples(f"need >= 100 retained draws, got {draws.shape[0]}")
    names = list(stage1.names)
    means = draws.mean(axis=0)
    stds = np.maximum(draws.std(axis=0, ddof=1), 1e-6)
    truncated = np.array([n == "gamma6" for n in names])
    pooled = np.array([n.startswith("gamma") for n in names])
    return PriorSpec(means=means, stds=stds, truncated=truncated, pooled=pooled)
