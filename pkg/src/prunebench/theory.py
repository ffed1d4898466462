"""Synthetic random-feature models ``Phi = sum_i a_i phi_i`` and numerical
checks of the pruning error bounds.

Two error bounds are checked:

* renormalized pruning, ``||Phi - N/(N-M) Phi_M||_2 <= 2 beta Dphi M +
  xi (beta + alpha) delta M / alpha``, for features in the delta-ball with
  coefficients in ``[alpha, beta]``;
* standard pruning, ``||Phi - Phi_M||_2^2 >= delta^2 sum_P a_i^2 -
  eps M^2 max_P a_i^2``, for features on the delta-sphere whose pairwise
  inner products inside the pruned set are bounded by ``eps``.

Here ``Dphi = max_i ||phi_i - mu_phi||`` with ``mu_phi`` the true mean of the
feature distribution and ``xi = beta - alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from prunebench.errors import DomainError, EmptyNetworkError
from prunebench.numerics import CAP_RTOL, Rng, sample_concentrated_ball, sample_uniform_sphere

MODES = ("concentrated_ball", "uniform_sphere", "orthonormal")
STRATEGIES = ("smallest_a", "random")

# absolute-relative hybrid tolerance for bound checks
BOUND_TOL = 1e-9


@dataclass
class ModelConfig:
    n_terms: int
    dim: int
    alpha: float = 1.0
    beta: float = 2.0
    delta: float = 1.0
    mode: str = "concentrated_ball"
    spread: float = 0.1
    seed: int = 0
    center: np.ndarray | None = None  # ball mode; defaults to (delta - spread) e_1


@dataclass
class RandomFeatureModel:
    a: np.ndarray  # (N,)
    phi: np.ndarray  # (N, D)
    alpha: float
    beta: float
    delta: float
    mu_phi: np.ndarray  # (D,)
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown model mode {self.mode!r}")
        if not 0 < self.alpha <= self.beta:
            raise DomainError(f"need 0 < alpha <= beta, got alpha={self.alpha}, beta={self.beta}")
        if np.any(self.a < self.alpha) or np.any(self.a > self.beta):
            raise DomainError("coefficients fall outside [alpha, beta]")
        norms = np.linalg.norm(self.phi, axis=1)
        if self.mode == "concentrated_ball" and np.any(norms > self.delta * (1 + CAP_RTOL)):
            raise DomainError("a feature lies outside the delta-ball")
        if self.mode != "concentrated_ball" and np.any(np.abs(norms - self.delta) > 1e-12 * self.delta):
            raise DomainError("a feature is off the delta-sphere")

    @property
    def n_terms(self) -> int:
        return self.a.shape[0]

    @property
    def dim(self) -> int:
        return self.phi.shape[1]


@dataclass
class ConcentrationStats:
    delta_phi: float
    xi: float
    coherence_eps: float
    delta_phi_empirical: float = 0.0
    coherence_eps_global: float = 0.0


@dataclass
class BoundReport:
    M: int
    P: np.ndarray
    err_renormalized: float
    err_standard: float
    thm1_bound: float
    thm1_intermediate: float
    thm2_lower: float | None
    stats: ConcentrationStats
    thm1_holds: bool
    thm2_holds: bool | None
    thm1_intermediate_holds: bool = True


@dataclass
class SphereConcentrationReport:
    D: int
    eps: float
    n_pairs: int
    violating_pairs: int
    empirical_prob: float


def build_model(cfg: ModelConfig) -> RandomFeatureModel:
    """Draw ``a_i ~ U[alpha, beta]`` then the features, per ``cfg.mode``.

    The coefficient draw comes first and uses one uniform per term, so two
    configs sharing a seed share the same uniforms even when alpha/beta or
    the spread differ.
    """
    if cfg.n_terms < 1 or cfg.dim < 1:
        raise DomainError("need at least one term and one dimension")
    if not 0 < cfg.alpha <= cfg.beta:
        raise DomainError(f"need 0 < alpha <= beta, got alpha={cfg.alpha}, beta={cfg.beta}")
    if not cfg.delta > 0:
        raise DomainError(f"delta must be positive, got {cfg.delta}")
    rng = Rng(cfg.seed)
    u = rng.uniform(size=cfg.n_terms)
    a = np.minimum(cfg.alpha + (cfg.beta - cfg.alpha) * u, cfg.beta)

    if cfg.mode == "concentrated_ball":
        if cfg.spread < 0 or cfg.spread > cfg.delta:
            raise DomainError(f"spread must lie in [0, delta], got {cfg.spread}")
        if cfg.center is None:
            center = np.zeros(cfg.dim)
            center[0] = cfg.delta - cfg.spread
        else:
            center = np.asarray(cfg.center, dtype=np.float64)
        phi = sample_concentrated_ball(center, cfg.spread, cfg.delta, rng, size=cfg.n_terms)
        mu = center.copy()
    elif cfg.mode == "uniform_sphere":
        phi = sample_uniform_sphere(cfg.dim, cfg.delta, rng, size=cfg.n_terms)
        mu = np.zeros(cfg.dim)
    else:
        raise DomainError(f"build_model does not construct mode {cfg.mode!r}; "
                          "use orthonormal_model for the orthonormal fixture")
    return RandomFeatureModel(a, phi, cfg.alpha, cfg.beta, cfg.delta, mu, cfg.mode)


def orthonormal_model(a, delta: float, rng: Rng | None = None) -> RandomFeatureModel:
    """Features forming ``delta`` times an orthonormal basis of R^N.

    With ``rng`` the basis is a random rotation (QR of a Gaussian matrix),
    otherwise the standard basis.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if rng is None:
        q = np.eye(n)
    else:
        q, r = np.linalg.qr(rng.normal((n, n)))
        q = q * np.sign(np.diag(r))
    phi = delta * q.T
    return RandomFeatureModel(a, phi, float(a.min()), float(a.max()), delta,
                              np.zeros(n), "orthonormal")


def _index_array(model: RandomFeatureModel, subset) -> np.ndarray:
    idx = np.asarray(sorted(set(int(i) for i in subset)), dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= model.n_terms):
        raise DomainError(f"index out of range [0, {model.n_terms})")
    return idx


def combined(model: RandomFeatureModel, subset, scale: float = 1.0) -> np.ndarray:
    """``scale * sum_{i in subset} a_i phi_i``."""
    idx = _index_array(model, subset)
    if idx.size == 0:
        return np.zeros(model.dim)
    return scale * (model.a[idx] @ model.phi[idx])


def _complement(model: RandomFeatureModel, P: np.ndarray) -> np.ndarray:
    keep = np.ones(model.n_terms, dtype=bool)
    keep[P] = False
    return np.flatnonzero(keep)


def pruning_errors(model: RandomFeatureModel, P) -> tuple[float, float]:
    """``(||Phi - Phi_M||, ||Phi - N/(N-M) Phi_M||)`` by direct vector arithmetic."""
    P = _index_array(model, P)
    n, m = model.n_terms, P.size
    if m >= n:
        raise EmptyNetworkError(f"pruning all {n} terms leaves nothing to renormalize")
    full = combined(model, range(n))
    kept = combined(model, _complement(model, P))
    err_std = float(np.linalg.norm(full - kept))
    err_renorm = float(np.linalg.norm(full - (n / (n - m)) * kept))
    return err_std, err_renorm


def thm1_bound_value(alpha: float, beta: float, delta: float, delta_phi: float, M: int) -> float:
    xi = beta - alpha
    return 2 * beta * delta_phi * M + xi * (beta + alpha) * delta * M / alpha


def thm1_intermediate_value(alpha: float, beta: float, delta: float, delta_phi: float,
                            M: int) -> float:
    """Same bound assembled from the last per-term line of the proof:
    ``M`` copies of ``2 beta Dphi + beta (beta-alpha)(beta+alpha) delta / (alpha beta)``."""
    per_term = 2 * beta * delta_phi + beta * (beta - alpha) * (beta + alpha) * delta / (alpha * beta)
    return M * per_term


def feature_spread(model: RandomFeatureModel) -> float:
    return float(np.max(np.linalg.norm(model.phi - model.mu_phi, axis=1)))


def coherence(phi: np.ndarray, subset=None) -> float:
    """``max_{i != j} |<phi_i, phi_j>|`` over ``subset`` (all rows if None)."""
    rows = phi if subset is None else phi[np.asarray(subset, dtype=np.int64)]
    if rows.shape[0] < 2:
        return 0.0
    gram = np.abs(rows @ rows.T)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


def concentration_stats(model: RandomFeatureModel, P=None) -> ConcentrationStats:
    empirical_mu = model.phi.mean(axis=0)
    global_eps = coherence(model.phi) if model.n_terms <= 4096 else float("nan")
    return ConcentrationStats(
        delta_phi=feature_spread(model),
        xi=float(model.beta - model.alpha),
        coherence_eps=coherence(model.phi, P) if P is not None else global_eps,
        delta_phi_empirical=float(np.max(np.linalg.norm(model.phi - empirical_mu, axis=1))),
        coherence_eps_global=global_eps,
    )


def thm1_bound(model: RandomFeatureModel, M: int) -> tuple[float, float]:
    """``(stated bound, proof-form bound)`` for pruning ``M`` terms."""
    if not 0 <= M < model.n_terms:
        raise DomainError(f"need 0 <= M < N, got M={M}, N={model.n_terms}")
    dphi = feature_spread(model)
    args = (model.alpha, model.beta, model.delta, dphi, M)
    return thm1_bound_value(*args), thm1_intermediate_value(*args)


def thm2_lower_bound(model: RandomFeatureModel, P) -> tuple[float, float]:
    """``(lower bound on ||Phi - Phi_M||^2, coherence eps measured inside P)``."""
    P = _index_array(model, P)
    if P.size == 0:
        raise DomainError("the pruned set must be nonempty")
    if model.mode == "concentrated_ball":
        raise DomainError("the standard-pruning lower bound needs features on the delta-sphere")
    eps = coherence(model.phi, P)
    a = model.a[P]
    m = P.size
    lower = model.delta ** 2 * float(np.sum(a ** 2)) - eps * m ** 2 * float(np.max(a ** 2))
    return lower, eps


def coherence_report(model: RandomFeatureModel, eps: float) -> SphereConcentrationReport:
    if model.mode == "concentrated_ball":
        raise DomainError("coherence_report expects sphere-mode features")
    n = model.n_terms
    gram = np.abs(model.phi @ model.phi.T)
    iu = np.triu_indices(n, k=1)
    n_pairs = iu[0].size
    violating = int(np.count_nonzero(gram[iu] >= eps))
    prob = 1.0 - violating / n_pairs if n_pairs else 1.0
    return SphereConcentrationReport(model.dim, eps, n_pairs, violating, prob)


def choose_pruned(model: RandomFeatureModel, M: int, strategy: str, rng: Rng | None = None) -> np.ndarray:
    """Indices of the ``M`` terms to prune, sorted ascending."""
    if strategy == "smallest_a":
        return np.sort(np.argsort(model.a, kind="stable")[:M])
    if strategy == "random":
        if rng is None:
            raise DomainError("random strategy needs an rng")
        return np.sort(rng.choice(model.n_terms, size=M, replace=False))
    raise DomainError(f"unknown prune strategy {strategy!r}")


def _within(value: float, bound: float) -> bool:
    return value <= bound + BOUND_TOL * (1 + abs(bound))


def bound_report(model: RandomFeatureModel, P, bound_scale: float = 1.0) -> BoundReport:
    """Errors and both bounds for pruning ``P``.

    ``bound_scale`` shrinks the upper bound; it exists only so the harness
    can prove it detects violations.
    """
    P = _index_array(model, P)
    m = int(P.size)
    err_std, err_renorm = pruning_errors(model, P)
    bound, inter = thm1_bound(model, m)
    bound *= bound_scale
    inter *= bound_scale
    stats = concentration_stats(model, P)
    lower = None
    thm2_ok = None
    if model.mode != "concentrated_ball" and m > 0:
        lower, _ = thm2_lower_bound(model, P)
        thm2_ok = err_std ** 2 >= lower - BOUND_TOL * (1 + abs(lower))
    return BoundReport(
        M=m, P=P, err_renormalized=err_renorm, err_standard=err_std,
        thm1_bound=bound, thm1_intermediate=inter, thm2_lower=lower, stats=stats,
        thm1_holds=_within(err_renorm, bound), thm2_holds=thm2_ok,
        thm1_intermediate_holds=_within(err_renorm, inter),
    )


# -- Monte Carlo harness --------------------------------------------------------

@dataclass
class VerifyConfig:
    """Ranges from which each trial draws its model."""

    mode: str = "concentrated_ball"
    n_max: int = 64
    d_max: int = 32
    dims: tuple[int, ...] = ()  # sphere mode: choose D from here
    spread_max: float = 0.2  # fraction of delta
    alpha_range: tuple[float, float] = (0.1, 2.0)
    xi_max: float = 2.0
    delta_range: tuple[float, float] = (0.5, 2.0)
    seed: int = 0


@dataclass
class TrialRow:
    trial: int
    N: int
    D: int
    strategy: str
    report: BoundReport


@dataclass
class VerifyResult:
    trials: int
    thm1_violations: int
    thm2_violations: int
    thm1_intermediate_only: int = 0
    rows: list[TrialRow] = field(default_factory=list)


def trial_model_config(cfg: VerifyConfig, trial: int) -> tuple[ModelConfig, Rng]:
    """Model config for one trial, plus a stream for the pruning choice.

    Depends only on ``(cfg, trial)``, so trials can run in any order.
    """
    rng = Rng(cfg.seed).child(trial)
    n = int(rng.integers(2, cfg.n_max + 1))
    if cfg.dims:
        d = int(cfg.dims[int(rng.integers(0, len(cfg.dims)))])
    else:
        d = int(rng.integers(1, cfg.d_max + 1))
    alpha = float(rng.uniform(*cfg.alpha_range))
    beta = alpha + float(rng.uniform(0.0, cfg.xi_max))
    delta = float(rng.uniform(*cfg.delta_range))
    spread = float(rng.uniform(0.0, cfg.spread_max)) * delta
    seed = int(rng.integers(0, 2**63))
    mcfg = ModelConfig(n_terms=n, dim=d, alpha=alpha, beta=beta, delta=delta,
                       mode=cfg.mode, spread=spread, seed=seed)
    return mcfg, rng


def run_trial(cfg: VerifyConfig, trial: int, strategy: str, bound_scale: float = 1.0) -> TrialRow:
    mcfg, rng = trial_model_config(cfg, trial)
    model = build_model(mcfg)
    m = int(rng.integers(1, model.n_terms))
    P = choose_pruned(model, m, strategy, rng)
    return TrialRow(trial, model.n_terms, model.dim, strategy,
                    bound_report(model, P, bound_scale))


def monte_carlo_verify(cfg: VerifyConfig, trials: int, prune_strategy: str,
                       bound_scale: float = 1.0, keep_rows: bool = True) -> VerifyResult:
    if trials < 1:
        raise DomainError("need at least one trial")
    result = VerifyResult(trials=trials, thm1_violations=0, thm2_violations=0)
    for t in range(trials):
        row = run_trial(cfg, t, prune_strategy, bound_scale)
        rep = row.report
        if not rep.thm1_holds:
            result.thm1_violations += 1
            if rep.thm1_intermediate_holds:
                result.thm1_intermediate_only += 1
        if rep.thm2_holds is False:
            result.thm2_violations += 1
        if keep_rows:
            result.rows.append(row)
    return result


@dataclass
class ConvergenceRow:
    t: float
    spread: float
    xi: float
    mean_err_renormalized: float
    mean_thm1_bound: float
    mean_err_standard: float


def scaled_config(base: ModelConfig, t: float) -> ModelConfig:
    """Shrink feature spread and coefficient range by ``t``; alpha stays put."""
    return replace(base, spread=t * base.spread, beta=base.alpha + t * (base.beta - base.alpha),
                   center=None)


def convergence_sweep(base_cfg: ModelConfig, t_values, M: int, trials: int,
                      strategy: str = "smallest_a") -> list[ConvergenceRow]:
    """Mean errors and bound as the model concentrates (``t -> 0``).

    Trial ``k`` uses the same seed at every ``t`` (common random numbers), so
    each trial traces one model continuously shrinking toward its center.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    base_rng = Rng(base_cfg.seed)
    seeds = [base_rng.child(k).seed for k in range(trials)]
    rows = []
    for t in t_values:
        t = float(t)
        if t < 0:
            raise DomainError(f"scale t must be non-negative, got {t}")
        scfg = scaled_config(base_cfg, t)
        errs_r, errs_s, bounds = [], [], []
        for k, seed in enumerate(seeds):
            model = build_model(replace(scfg, seed=seed))
            P = choose_pruned(model, M, strategy, Rng(seed).child(1))
            err_s, err_r = pruning_errors(model, P)
            errs_r.append(err_r)
            errs_s.append(err_s)
            bounds.append(thm1_bound(model, M)[0])
        rows.append(ConvergenceRow(t, scfg.spread, scfg.beta - scfg.alpha, float(np.mean(errs_r)),
                                   float(np.mean(bounds)), float(np.mean(errs_s))))
    return rows


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(xs, dtype=np.float64))
    ly = np.log(np.asarray(ys, dtype=np.float64))
    return float(np.polyfit(lx, ly, 1)[0])


VERIFY_CSV_HEADER = ["trial", "N", "D", "M", "strategy", "delta_phi", "xi", "coherence_eps",
                     "err_std", "err_renorm", "thm1_bound", "thm2_lower", "thm1_holds", "thm2_holds"]


def trial_csv_row(row: TrialRow) -> list:
    r = row.report
    return [row.trial, row.N, row.D, r.M, row.strategy, r.stats.delta_phi, r.stats.xi,
            r.stats.coherence_eps, r.err_standard, r.err_renormalized, r.thm1_bound,
            "" if r.thm2_lower is None else r.thm2_lower,
            int(r.thm1_holds), "" if r.thm2_holds is None else int(r.thm2_holds)]
