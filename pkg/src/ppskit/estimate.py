"""Maximum-likelihood reconstruction of photon number distributions.

The full-information estimator maximizes the ordinary multinomial
log-likelihood over all click outcomes (including the all-click events,
which carry the only direct evidence about two-photon cells).  The matrix
is parametrized by normalized exponentials of unconstrained coordinates,
which keeps every cell strictly positive during the ascent so the
log-likelihood never diverges.

A baseline estimator replicating the older extended-maximum-likelihood
scheme is included for comparison: it discards outcomes in which all
detectors of a mode clicked and fits setting-renormalized probabilities,
so it needs at least two attenuator settings.

Count-ratio estimators of g2 / heralded g2 / pair probability are provided
for comparison with the reconstructed values; they accept raw or
noise-corrected records.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .detection import (
    CountRecord,
    DetectorPair,
    counts_with_clicks,
    noise_correct,
    noise_correct_single,
    outcome_map,
    singles,
)
from .errors import (
    DataModelMismatchError,
    InvalidInputError,
    UndefinedCharacteristicError,
)
from .pnd import CharacteristicSet, PndMatrix, characteristics
from .rng import substream

_FLOOR = 1e-15


@dataclass(frozen=True)
class LikelihoodModel:
    """Known detection parameters of a bipartite measurement.

    Detector efficiencies, splitter ratios and noise probabilities are
    assumed calibrated beforehand; ``settings`` lists the attenuator pair
    (gamma_s, gamma_i) of each setting index nu.
    """

    det_s: DetectorPair
    det_i: DetectorPair
    settings: tuple = ((1.0, 1.0),)
    n_max: int = 2

    def __post_init__(self):
        if not self.settings:
            raise InvalidInputError("model needs at least one setting")
        if self.n_max < 1:
            raise InvalidInputError("n_max must be >= 1")

    def maps(self, nu: int) -> tuple[np.ndarray, np.ndarray]:
        gamma_s, gamma_i = self.settings[nu]
        A = outcome_map(self.det_s.with_gamma(gamma_s), self.n_max)
        B = outcome_map(self.det_i.with_gamma(gamma_i), self.n_max)
        return A, B

    def outcome_probs(self, P: np.ndarray, nu: int) -> np.ndarray:
        A, B = self.maps(nu)
        return A @ P @ B.T

    def hash(self) -> str:
        text = repr(
            (
                self.det_s,
                self.det_i,
                tuple((float(a), float(b)) for a, b in self.settings),
                self.n_max,
            )
        )
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class SingleModeModel:
    """Known detection parameters of a single-mode measurement.

    ``layout`` is "2d" for the split-and-two-detectors scheme or "1d" for
    a plain on/off detector, in which case everything is routed to the
    transmitted detector and the outcomes collapse to (no click, click).
    """

    T: float
    eta_t: float
    eta_r: float
    d_t: float
    d_r: float
    gammas: tuple
    layout: str = "2d"
    n_max: int = 2

    def __post_init__(self):
        if not self.gammas:
            raise InvalidInputError("model needs at least one attenuator setting")
        if self.layout not in ("1d", "2d"):
            raise InvalidInputError(f"layout must be '1d' or '2d', got {self.layout!r}")

    @classmethod
    def two_detector(cls, T, eta, d, gammas, n_max: int = 2) -> "SingleModeModel":
        return cls(T=T, eta_t=eta, eta_r=eta, d_t=d, d_r=d, gammas=tuple(gammas), n_max=n_max)

    @classmethod
    def one_detector(cls, eta, d, gammas, n_max: int = 2) -> "SingleModeModel":
        return cls(
            T=1.0, eta_t=eta, eta_r=0.0, d_t=d, d_r=0.0,
            gammas=tuple(gammas), layout="1d", n_max=n_max,
        )

    @property
    def n_outcomes(self) -> int:
        return 2 if self.layout == "1d" else 4

    def map(self, nu: int) -> np.ndarray:
        det = DetectorPair(
            T=self.T, eta_t=self.eta_t, eta_r=self.eta_r,
            d_t=self.d_t, d_r=self.d_r, gamma=self.gammas[nu],
        )
        C = outcome_map(det, self.n_max)
        if self.layout == "1d":
            C = np.vstack([C[0] + C[1], C[2] + C[3]])
        return C

    def forward_probs(self, pv, nu: int) -> np.ndarray:
        return self.map(nu) @ np.asarray(pv, dtype=float)

    def hash(self) -> str:
        text = repr(
            (
                self.T, self.eta_t, self.eta_r, self.d_t, self.d_r,
                tuple(float(g) for g in self.gammas), self.layout, self.n_max,
            )
        )
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class EstimateOptions:
    """Optimizer knobs: multi-start count, iteration budget, tolerances."""

    n_starts: int = 5
    max_iter: int = 10000
    ftol: float = 1e-14
    gtol: float = 1e-11
    seed: int = 0
    jitter_scale: float = 1.0


@dataclass(frozen=True)
class StartResult:
    loglik: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class EstimateResult:
    """Best reconstruction over all starts plus per-start diagnostics."""

    p_hat: object  # PndMatrix for bipartite fits, ndarray for single-mode
    loglik: float
    iterations: int
    converged: bool
    starts: tuple = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# likelihood machinery


def _softmax_cells(z: np.ndarray) -> np.ndarray:
    """Probabilities over n cells from n-1 free coordinates (cell 0 pinned)."""
    full = np.concatenate([[0.0], z])
    full -= full.max()
    e = np.exp(full)
    return e / e.sum()


def _ll_terms(f: np.ndarray, W: np.ndarray) -> float:
    mask = f > 0
    if np.any(W[mask] <= 0.0):
        return -np.inf
    return float(np.sum(f[mask] * np.log(W[mask])))


def log_likelihood(P, records, model) -> float:
    """Total multinomial log-likelihood of count records under P.

    ``P`` may be a PndMatrix with a bipartite model or a probability
    vector with a single-mode model.  Outcomes with zero probability but
    nonzero counts make the result -inf, the typed infeasible value.
    """
    if isinstance(model, LikelihoodModel):
        p = P.p if isinstance(P, PndMatrix) else np.asarray(P, dtype=float)
        total = 0.0
        for rec in records:
            W = model.outcome_probs(p, rec.nu)
            total += _ll_terms(rec.f, W)
        return total
    if isinstance(model, SingleModeModel):
        pv = np.asarray(P, dtype=float)
        total = 0.0
        for rec in records:
            total += _ll_terms(rec.f, model.forward_probs(pv, rec.nu))
        return total
    raise InvalidInputError(f"unknown model type {type(model)!r}")


def _check_records(records, model) -> None:
    if not records:
        raise InvalidInputError("at least one count record is required")
    n_settings = len(model.settings) if isinstance(model, LikelihoodModel) else len(model.gammas)
    for rec in records:
        if not (0 <= rec.nu < n_settings):
            raise DataModelMismatchError(
                f"record setting nu={rec.nu} outside model settings (0..{n_settings - 1})"
            )
        if isinstance(model, SingleModeModel) and rec.f.shape != (model.n_outcomes,):
            raise DataModelMismatchError(
                f"record has {rec.f.shape[0]} outcomes, model expects {model.n_outcomes}"
            )


def _optimize(neg_obj, z0_list, options: EstimateOptions):
    best = None
    starts = []
    for z0 in z0_list:
        res = minimize(
            neg_obj,
            z0,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": options.max_iter,
                "ftol": options.ftol,
                "gtol": options.gtol,
                "maxls": 60,
            },
        )
        starts.append(StartResult(loglik=-res.fun, iterations=res.nit, converged=bool(res.success)))
        if best is None or -res.fun > -best.fun:
            best = res
    return best, tuple(starts)


def _jitter_starts(z0: np.ndarray, options: EstimateOptions) -> list[np.ndarray]:
    rng = substream(options.seed, "estimate-starts")
    starts = [z0]
    for _ in range(max(0, options.n_starts - 1)):
        starts.append(z0 + options.jitter_scale * rng.standard_normal(z0.size))
    return starts


def _fisher_polish(z, loglik_fn, score_fisher_fn, max_steps: int = 60):
    """Newton refinement with the expected information matrix.

    Quasi-Newton ascent stalls in the nearly flat directions of the small
    cells; a few scoring steps drive the gradient to machine precision.
    Steps that would lower the log-likelihood are halved away, so the
    polish can only improve on its starting point.
    """
    z = np.array(z, dtype=float)
    ll = loglik_fn(z)
    for _ in range(max_steps):
        score, fisher = score_fisher_fn(z)
        ridge = 1e-12 * max(np.trace(fisher) / max(z.size, 1), 1e-300)
        try:
            step = np.linalg.solve(fisher + ridge * np.eye(z.size), score)
        except np.linalg.LinAlgError:
            break
        norm = np.max(np.abs(step))
        if not np.isfinite(norm) or norm == 0.0:
            break
        if norm > 2.0:
            step *= 2.0 / norm
        improved = False
        for _ in range(30):
            candidate = z + step
            ll_new = loglik_fn(candidate)
            if ll_new >= ll - 1e-12 * max(abs(ll), 1.0):
                z, ll = candidate, ll_new
                improved = True
                break
            step *= 0.5
        if not improved or np.max(np.abs(step)) < 1e-13:
            break
    return z


def _softmax_jacobian(p: np.ndarray) -> np.ndarray:
    """d p_j / d z_c for the free coordinates c = 1..n-1; shape (n-1, n)."""
    J = -np.outer(p[1:], p)
    J[np.arange(p.size - 1), np.arange(1, p.size)] += p[1:]
    return J


# ---------------------------------------------------------------------------
# bipartite fits


def _stack_maps(model: LikelihoodModel, records):
    A = np.stack([model.maps(rec.nu)[0] for rec in records])
    B = np.stack([model.maps(rec.nu)[1] for rec in records])
    F = np.stack([rec.f for rec in records])
    return A, B, F


def _init_bipartite(records, model: LikelihoodModel) -> np.ndarray:
    """Moment inversion of (noise-corrected) counts for the starting point.

    Singles and pair coincidences give the one-photon cells; double-click
    rates give the two-photon cells.  Cells without signal floor at 1e-15.
    """
    best_nu = max(
        range(len(model.settings)),
        key=lambda nu: model.settings[nu][0] * model.settings[nu][1],
    )
    candidates = [rec for rec in records if rec.nu == best_nu] or list(records)
    rec = candidates[0]
    gamma_s, gamma_i = model.settings[rec.nu]
    det_s, det_i = model.det_s, model.det_i
    corr = noise_correct(rec, det_s.d_t, det_s.d_r, det_i.d_t, det_i.d_r)
    f = corr.f
    n = max(rec.n_m, 1)
    e = (
        gamma_s * det_s.eta_t,
        gamma_s * det_s.eta_r,
        gamma_i * det_i.eta_t,
        gamma_i * det_i.eta_r,
    )
    pair = 0.0
    for j in (1, 2):
        for k in (3, 4):
            if e[j - 1] > 0 and e[k - 1] > 0:
                pair += counts_with_clicks(f, [j, k]) / (e[j - 1] * e[k - 1])
    p11 = pair / n

    S = [counts_with_clicks(f, [j]) for j in (1, 2, 3, 4)]
    s_mean = sum(S[j] / e[j] for j in (0, 1) if e[j] > 0) / n
    i_mean = sum(S[j] / e[j] for j in (2, 3) if e[j] > 0) / n
    p10 = s_mean - p11
    p01 = i_mean - p11

    den_s2 = 2.0 * det_s.T * det_s.R * e[0] * e[1]
    den_i2 = 2.0 * det_i.T * det_i.R * e[2] * e[3]
    one_i = det_i.T * e[2] + det_i.R * e[3]
    one_s = det_s.T * e[0] + det_s.R * e[1]
    p22 = f[3, 3] / (n * den_s2 * den_i2) if den_s2 > 0 and den_i2 > 0 else 0.0
    p21 = f[3, 1:3].sum() / (n * den_s2 * one_i) if den_s2 > 0 and one_i > 0 else 0.0
    p12 = f[1:3, 3].sum() / (n * den_i2 * one_s) if den_i2 > 0 and one_s > 0 else 0.0
    p20 = f[3, 0] / (n * den_s2) if den_s2 > 0 else 0.0
    p02 = f[0, 3] / (n * den_i2) if den_i2 > 0 else 0.0

    cells = np.array(
        [p01, p02, p10, p11, p12, p20, p21, p22]  # row-major order minus (0, 0)
    )
    cells = np.maximum(cells, _FLOOR)
    total = cells.sum()
    if total >= 1.0:
        cells *= 0.5 / total
    p00 = 1.0 - cells.sum()
    return np.log(cells / p00)


def ml_estimate(records, model, options: EstimateOptions | None = None) -> EstimateResult:
    """Full-information maximum likelihood over all click outcomes.

    Multi-start local ascent in the unconstrained coordinates: one start
    from moment inversion of the counts plus jittered restarts; the best
    final log-likelihood wins.
    """
    options = options or EstimateOptions()
    _check_records(records, model)
    if isinstance(model, SingleModeModel):
        return _fit_single(records, model, options, objective="ml")
    if not isinstance(model, LikelihoodModel):
        raise InvalidInputError(f"unknown model type {type(model)!r}")

    A, B, F = _stack_maps(model, records)
    scale = max(float(F.sum()), 1.0)
    shape = (model.n_max + 1, model.n_max + 1)
    n_cells = shape[0] * shape[1]

    def neg_obj(z):
        p9 = _softmax_cells(z)
        P = p9.reshape(shape)
        W = np.einsum("vab,bc,vdc->vad", A, P, B)
        mask = F > 0
        if np.any(W[mask] <= 0.0):
            return np.inf, np.zeros_like(z)
        ll = float(np.sum(F[mask] * np.log(W[mask])))
        ratio = np.where(mask, F / np.where(W > 0, W, 1.0), 0.0)
        g_P = np.einsum("vab,vad,vdc->bc", A, ratio, B)
        g9 = g_P.reshape(-1)
        g_z = p9 * (g9 - float(g9 @ p9))
        return -ll / scale, -g_z[1:] / scale

    n_v = F.reshape(F.shape[0], -1).sum(axis=1)

    def score_fisher(z):
        p9 = _softmax_cells(z)
        P = p9.reshape(shape)
        W = np.einsum("vab,bc,vdc->vad", A, P, B)
        mask = F > 0
        ratio = np.where(mask, F / np.where(W > 0, W, 1.0), 0.0)
        dP = _softmax_jacobian(p9).reshape(-1, *shape)
        dW = np.einsum("vam,cmn,vbn->cvab", A, dP, B)
        score = np.einsum("vab,cvab->c", ratio, dW) / scale
        inv = np.where(W > 0, 1.0 / np.where(W > 0, W, 1.0), 0.0) * n_v[:, None, None]
        fisher = np.einsum("cvab,vab,dvab->cd", dW, inv, dW) / scale
        return score, fisher

    z0 = _init_bipartite(records, model)
    if z0.size != n_cells - 1:  # generalize moment init beyond 3x3 by padding
        padded = np.full(n_cells - 1, np.log(_FLOOR))
        padded[: z0.size] = z0
        z0 = padded
    best, starts = _optimize(neg_obj, _jitter_starts(z0, options), options)
    z_hat = _fisher_polish(best.x, lambda z: -neg_obj(z)[0], score_fisher)
    p_hat = _softmax_cells(z_hat).reshape(shape)
    pnd = PndMatrix(p_hat)
    return EstimateResult(
        p_hat=pnd,
        loglik=log_likelihood(pnd, records, model),
        iterations=int(best.nit),
        converged=bool(best.success),
        starts=starts,
    )


def _eml_used_mask(model) -> np.ndarray:
    """Outcome mask used by the baseline: drop any status in which both
    detectors of a mode clicked."""
    if isinstance(model, LikelihoodModel):
        mask = np.ones((4, 4), dtype=bool)
        mask[3, :] = False
        mask[:, 3] = False
        return mask
    mask = np.ones(model.n_outcomes, dtype=bool)
    mask[-1] = False
    return mask


def eml_estimate(records, model, options: EstimateOptions | None = None) -> EstimateResult:
    """Baseline fit on setting-renormalized probabilities.

    For every used outcome o the probabilities across settings are
    renormalized to W_o(nu) / sum_lambda W_o(lambda) and the counts fitted
    against that distribution, so the absolute click fraction carries no
    weight.  All-click outcomes are excluded.  Needs >= 2 settings.
    """
    options = options or EstimateOptions()
    _check_records(records, model)
    n_settings = len(model.settings) if isinstance(model, LikelihoodModel) else len(model.gammas)
    if n_settings < 2:
        raise InvalidInputError("the baseline needs at least two attenuator settings")
    if isinstance(model, SingleModeModel):
        return _fit_single(records, model, options, objective="eml")

    A, B, F = _stack_maps(model, records)
    used = _eml_used_mask(model)
    scale = max(float(F[:, used].sum()), 1.0)
    shape = (model.n_max + 1, model.n_max + 1)

    def neg_obj(z):
        p9 = _softmax_cells(z)
        P = p9.reshape(shape)
        W = np.einsum("vab,bc,vdc->vad", A, P, B)
        S = W.sum(axis=0)  # per-outcome total over settings
        mask = (F > 0) & used[None, :, :]
        if np.any(W[mask] <= 0.0) or np.any(S[used] <= 0.0):
            return np.inf, np.zeros_like(z)
        F_o = F.sum(axis=0)
        ll = float(np.sum(F[mask] * np.log(W[mask])))
        ll -= float(np.sum(F_o[used] * np.log(S[used])))
        ratio = np.where(mask, F / np.where(W > 0, W, 1.0), 0.0)
        ratio -= np.where(
            used[None, :, :], (F_o / np.where(S > 0, S, 1.0))[None, :, :], 0.0
        )
        g_P = np.einsum("vab,vad,vdc->bc", A, ratio, B)
        g9 = g_P.reshape(-1)
        g_z = p9 * (g9 - float(g9 @ p9))
        return -ll / scale, -g_z[1:] / scale

    z0 = _init_bipartite(records, model)
    best, starts = _optimize(neg_obj, _jitter_starts(z0, options), options)
    p_hat = _softmax_cells(best.x).reshape(shape)
    pnd = PndMatrix(p_hat)
    return EstimateResult(
        p_hat=pnd,
        loglik=-best.fun * scale,
        iterations=int(best.nit),
        converged=bool(best.success),
        starts=starts,
    )


# ---------------------------------------------------------------------------
# single-mode fits


def _init_single(records, model: SingleModeModel) -> np.ndarray:
    best_nu = max(range(len(model.gammas)), key=lambda nu: model.gammas[nu])
    candidates = [rec for rec in records if rec.nu == best_nu] or list(records)
    rec = candidates[0]
    gamma = model.gammas[rec.nu]
    f = noise_correct_single(rec, model.d_t, model.d_r)
    n = max(rec.n_m, 1)
    if model.layout == "1d":
        # No double-click observable here; the no-click probability is the
        # exact polynomial sum_n P_n x^n with x = 1 - gamma * eta, so the
        # attenuation curve across settings is the moment inversion.
        xs, ys = [], []
        for r in records:
            fr = noise_correct_single(r, model.d_t, model.d_r)
            xs.append(1.0 - model.gammas[r.nu] * model.eta_t)
            ys.append(fr[0] / max(r.n_m, 1))
        p1 = p2 = 0.0
        if len(set(xs)) >= 3:
            coeffs = np.polynomial.polynomial.polyfit(xs, ys, 2)
            p1, p2 = float(coeffs[1]), float(coeffs[2])
        elif model.eta_t > 0:
            p1 = f[1] / (n * gamma * model.eta_t)
    else:
        e_t, e_r = gamma * model.eta_t, gamma * model.eta_r
        one = model.T * e_t + (1 - model.T) * e_r
        two = 2.0 * model.T * (1 - model.T) * e_t * e_r
        p1 = (f[1] + f[2]) / (n * one) if one > 0 else 0.0
        p2 = f[3] / (n * two) if two > 0 else 0.0
    cells = np.maximum(np.array([p1, p2]), _FLOOR)
    if cells.sum() >= 1.0:
        cells *= 0.5 / cells.sum()
    return np.log(cells / (1.0 - cells.sum()))


def _fit_single(records, model: SingleModeModel, options: EstimateOptions, objective: str):
    C = np.stack([model.map(rec.nu) for rec in records])  # (v, outcomes, cells)
    F = np.stack([rec.f for rec in records])
    used = _eml_used_mask(model) if objective == "eml" else np.ones(model.n_outcomes, bool)
    scale = max(float(F[:, used].sum()), 1.0)

    def neg_obj(z):
        p = _softmax_cells(z)
        W = np.einsum("voc,c->vo", C, p)
        mask = (F > 0) & used[None, :]
        if np.any(W[mask] <= 0.0):
            return np.inf, np.zeros_like(z)
        ll = float(np.sum(F[mask] * np.log(W[mask])))
        ratio = np.where(mask, F / np.where(W > 0, W, 1.0), 0.0)
        if objective == "eml":
            S = W.sum(axis=0)
            if np.any(S[used] <= 0.0):
                return np.inf, np.zeros_like(z)
            F_o = F.sum(axis=0)
            ll -= float(np.sum(F_o[used] * np.log(S[used])))
            ratio -= np.where(used[None, :], (F_o / np.where(S > 0, S, 1.0))[None, :], 0.0)
        g_p = np.einsum("voc,vo->c", C, ratio)
        g_z = p * (g_p - float(g_p @ p))
        return -ll / scale, -g_z[1:] / scale

    z0 = _init_single(records, model)
    best, starts = _optimize(neg_obj, _jitter_starts(z0, options), options)
    z_hat = best.x
    if objective == "ml":
        n_v = F.sum(axis=1)

        def score_fisher(z):
            p = _softmax_cells(z)
            W = np.einsum("voc,c->vo", C, p)
            mask = F > 0
            ratio = np.where(mask, F / np.where(W > 0, W, 1.0), 0.0)
            dW = np.einsum("vom,cm->cvo", C, _softmax_jacobian(p))
            score = np.einsum("vo,cvo->c", ratio, dW) / scale
            inv = np.where(W > 0, 1.0 / np.where(W > 0, W, 1.0), 0.0) * n_v[:, None]
            fisher = np.einsum("cvo,vo,dvo->cd", dW, inv, dW) / scale
            return score, fisher

        z_hat = _fisher_polish(z_hat, lambda z: -neg_obj(z)[0], score_fisher)
    p_hat = _softmax_cells(z_hat)
    loglik = (
        log_likelihood(p_hat, records, model)
        if objective == "ml"
        else -best.fun * scale
    )
    return EstimateResult(
        p_hat=p_hat,
        loglik=loglik,
        iterations=int(best.nit),
        converged=bool(best.success),
        starts=starts,
    )


# ---------------------------------------------------------------------------
# count-ratio estimators


def count_based_g2(rec: CountRecord, mode: str = "s") -> float:
    """g2 from the classic coincidence-over-singles ratio C_tr / (S_t S_r).

    Marginalizes the 16-outcome record onto the chosen mode's detector
    pair.  Noise clicks bias this estimator toward 1; feed it a
    noise-corrected record to undo that.
    """
    if mode not in ("s", "i"):
        raise InvalidInputError(f"mode must be 's' or 'i', got {mode!r}")
    f = rec.f if mode == "s" else rec.f.T
    S_t = float(f[2:, :].sum())
    S_r = float(f[np.ix_((1, 3), range(4))].sum())
    if S_t <= 0.0 or S_r <= 0.0:
        raise UndefinedCharacteristicError("count-based g2 undefined: zero singles")
    C = float(f[3, :].sum())
    return C * rec.n_m / (S_t * S_r)


def count_based_gh2(rec: CountRecord, heralded: str = "s") -> float:
    """Heralded g2 from counting rates, C_trh * S_h / (C_th * C_rh).

    The heralding mode collapses to the union click of its two detectors.
    With imperfect heralding-side detection this ratio sits above the
    distribution value by up to a factor (2 - eta) when two-pair emission
    dominates the heralded mode's double clicks.
    """
    if heralded not in ("s", "i"):
        raise InvalidInputError(f"heralded must be 's' or 'i', got {heralded!r}")
    f = rec.f if heralded == "s" else rec.f.T
    S_h = float(f[:, 1:].sum())
    C_trh = float(f[3, 1:].sum())
    C_th = float(f[2:, 1:].sum())
    C_rh = float(f[np.ix_((1, 3), (1, 2, 3))].sum())
    if C_th <= 0.0 or C_rh <= 0.0:
        raise UndefinedCharacteristicError(
            "count-based heralded g2 undefined: zero heralded coincidences"
        )
    return C_trh * S_h / (C_th * C_rh)


def count_based_pg_eta(rec: CountRecord, etas) -> tuple[float, float, float]:
    """Pair probability and heralding efficiencies from corrected counts.

    p_g sums the four cross coincidence rates divided by the detector
    efficiency products (the splitter ratios cancel in the sum); the
    heralding efficiencies divide p_g by the efficiency-corrected singles
    of the opposite mode.  Returns (p_g, eta_H_s, eta_H_i).
    """
    etas = tuple(float(v) for v in etas)
    if len(etas) != 4 or any(not (0.0 < v <= 1.0) for v in etas):
        raise InvalidInputError("etas must be four efficiencies in (0, 1]")
    n = max(rec.n_m, 1)
    pair = 0.0
    for j in (1, 2):
        for k in (3, 4):
            pair += counts_with_clicks(rec.f, [j, k]) / (etas[j - 1] * etas[k - 1])
    p_g = pair / n
    S = singles(rec)
    den_i = (S[2] / etas[2] + S[3] / etas[3]) / n
    den_s = (S[0] / etas[0] + S[1] / etas[1]) / n
    if den_i <= 0.0 or den_s <= 0.0:
        raise UndefinedCharacteristicError("count-based eta_H undefined: zero singles")
    return p_g, p_g / den_i, p_g / den_s


def characterize(result: EstimateResult) -> CharacteristicSet:
    """Source characteristics of a reconstructed distribution.

    Pure delegation to the distribution-level formulas; callers should
    check ``result.converged`` before trusting the values.
    """
    if not isinstance(result.p_hat, PndMatrix):
        raise InvalidInputError("characterize needs a bipartite estimate")
    return characteristics(result.p_hat)
