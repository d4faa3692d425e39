"""Synthetic experiments: count sampling, random sources, parameter sweeps.

Counts are exact multinomial draws implemented as a conditional-binomial
chain, so a trial budget of 1e12 costs the same as 16 binomial draws.
Sweep cells and repetitions are keyed into independent counter-based
streams (see :mod:`ppskit.rng`), which makes results independent of
execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import estimate as est
from .detection import CountRecord, DetectorPair, OutcomeProbs, SingleCountRecord, bipartite_probs
from .errors import InvalidInputError
from .metrics import rmsle
from .pnd import PndMatrix, g2_marginal
from .rng import multinomial_counts, substream

DEFAULT_SINGLE_GAMMAS = tuple(round(0.1 * k, 1) for k in range(1, 11))

SWEEP_COLUMNS = (
    "cell_id",
    "p_g",
    "n_m",
    "eta",
    "d",
    "gamma",
    "rep",
    "rmsle",
    "pg_hat",
    "etaHs_hat",
    "etaHi_hat",
    "g2s_hat",
    "g2i_hat",
    "gh2s_hat",
    "gh2i_hat",
    "converged",
)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return substream(0 if seed is None else int(seed))


def sample_counts(W: OutcomeProbs, n_m: int, seed, nu: int = 0) -> CountRecord:
    """Multinomial count table for one setting; same seed, same counts."""
    if n_m < 0:
        raise InvalidInputError("n_m must be nonnegative")
    if W.probs.shape != (4, 4):
        raise InvalidInputError("sample_counts expects a bipartite outcome table")
    rng = _as_rng(seed)
    counts = multinomial_counts(n_m, W.probs.reshape(-1), rng).reshape(4, 4)
    return CountRecord(counts.astype(float), int(n_m), nu=nu)


def sample_single_counts(
    probs: np.ndarray, n_m: int, seed, gamma: float = 1.0, nu: int = 0
) -> SingleCountRecord:
    """Multinomial draw over single-mode outcomes (length 2 or 4)."""
    rng = _as_rng(seed)
    counts = multinomial_counts(n_m, np.asarray(probs, dtype=float), rng)
    return SingleCountRecord(counts.astype(float), int(n_m), gamma=gamma, nu=nu)


def random_pps_pnd(p_g: float, seed) -> PndMatrix:
    """Random pair-source matrix: first-order cells p_g * r, second-order
    cells p_g^2 * r with fresh r ~ U[0.5, 1.5] per cell; vacuum completes."""
    if not (0.0 < p_g <= 0.1):
        raise InvalidInputError(f"p_g must lie in (0, 0.1], got {p_g}")
    rng = _as_rng(seed)
    p = np.zeros((3, 3))
    for j in range(3):
        for k in range(3):
            if max(j, k) == 1:
                p[j, k] = p_g * rng.uniform(0.5, 1.5)
            elif max(j, k) == 2:
                p[j, k] = p_g**2 * rng.uniform(0.5, 1.5)
    rest = p.sum()
    if rest >= 1.0:
        raise InvalidInputError(f"p_g={p_g} too large to normalize")
    p[0, 0] = 1.0 - rest
    return PndMatrix(p)


def random_single_pnd(p_g: float, seed) -> np.ndarray:
    """Random single-mode vector (1 - p_g - P2, p_g, P2) with
    P2 = p_g^2 g2 / 2 and g2 ~ U[1, 2]."""
    if not (0.0 < p_g <= 0.1):
        raise InvalidInputError(f"p_g must lie in (0, 0.1], got {p_g}")
    rng = _as_rng(seed)
    g2 = rng.uniform(1.0, 2.0)
    p2 = p_g**2 * g2 / 2.0
    return np.array([1.0 - p_g - p2, p_g, p2])


@dataclass(frozen=True)
class ExperimentConfig:
    """One synthetic acquisition: a source, detectors, settings, a budget."""

    pnd: PndMatrix
    det_s: DetectorPair
    det_i: DetectorPair
    settings: tuple = ((1.0, 1.0),)
    n_m: int = 10**6
    seed: int = 0
    reps: int = 1

    def __post_init__(self):
        if self.n_m < 1:
            raise InvalidInputError("n_m must be >= 1")
        if not self.settings:
            raise InvalidInputError("at least one attenuator setting is required")


def simulate_records(config: ExperimentConfig, rep: int = 0) -> list[CountRecord]:
    """Sampled count records for every attenuator setting of one repetition."""
    records = []
    for nu, (gamma_s, gamma_i) in enumerate(config.settings):
        W = bipartite_probs(
            config.pnd,
            config.det_s.with_gamma(gamma_s),
            config.det_i.with_gamma(gamma_i),
        )
        rng = substream(config.seed, "experiment", rep, nu)
        records.append(sample_counts(W, config.n_m, rng, nu=nu))
    return records


def expected_records(config: ExperimentConfig) -> list[CountRecord]:
    """Noise-free expected counts n_m * W per setting (real-valued)."""
    records = []
    for nu, (gamma_s, gamma_i) in enumerate(config.settings):
        W = bipartite_probs(
            config.pnd,
            config.det_s.with_gamma(gamma_s),
            config.det_i.with_gamma(gamma_i),
        )
        records.append(CountRecord(config.n_m * W.probs, config.n_m, nu=nu))
    return records


@dataclass(frozen=True)
class SweepSpec:
    """Grid of simulated estimation problems.

    ``gamma_design`` chooses the attenuator plan for bipartite methods:
    "none" measures once at full transmission, "va4" adds the four
    combinations of 0.5 / 1.0 on the two arms (four times the raw budget).
    Single-mode methods always use ``single_gammas``.
    """

    p_g_grid: tuple
    n_m_grid: tuple
    eta_grid: tuple = (0.5,)
    d_grid: tuple = (0.0,)
    gamma_design: str = "none"
    reps: int = 100
    bs_T: float = 0.5
    single_gammas: tuple = DEFAULT_SINGLE_GAMMAS
    exact_counts: bool = False
    n_starts: int = 5
    max_iter: int = 10000

    def __post_init__(self):
        for name in ("p_g_grid", "n_m_grid", "eta_grid", "d_grid"):
            if len(getattr(self, name)) == 0:
                raise InvalidInputError(f"{name} must be nonempty")
        if self.gamma_design not in ("none", "va4"):
            raise InvalidInputError(f"unknown gamma design {self.gamma_design!r}")
        if self.reps < 1:
            raise InvalidInputError("reps must be >= 1")


def _bipartite_settings(design: str) -> tuple:
    if design == "va4":
        return ((1.0, 1.0), (1.0, 0.5), (0.5, 1.0), (0.5, 0.5))
    return ((1.0, 1.0),)


_NAN_CHARS = {name: float("nan") for name in
              ("pg_hat", "etaHs_hat", "etaHi_hat", "g2s_hat", "g2i_hat",
               "gh2s_hat", "gh2i_hat")}


def _bipartite_cell(spec, method, p_g, n_m, eta, d, seed, cell_id, rows):
    settings = _bipartite_settings(spec.gamma_design)
    options = est.EstimateOptions(n_starts=spec.n_starts, max_iter=spec.max_iter)
    for rep in range(spec.reps):
        truth = random_pps_pnd(p_g, substream(seed, "pnd", cell_id, rep))
        det = DetectorPair(T=spec.bs_T, eta_t=eta, eta_r=eta, d_t=d, d_r=d)
        config = ExperimentConfig(
            pnd=truth, det_s=det, det_i=det, settings=settings, n_m=int(n_m),
            seed=seed, reps=1,
        )
        if spec.exact_counts:
            records = expected_records(config)
        else:
            records = [
                sample_counts(
                    bipartite_probs(truth, det.with_gamma(gs), det.with_gamma(gi)),
                    int(n_m),
                    substream(seed, "counts", cell_id, rep, nu),
                    nu=nu,
                )
                for nu, (gs, gi) in enumerate(settings)
            ]
        model = est.LikelihoodModel(det_s=det, det_i=det, settings=settings)
        row = {
            "cell_id": cell_id, "p_g": p_g, "n_m": n_m, "eta": eta, "d": d,
            "gamma": spec.gamma_design, "rep": rep,
        }
        try:
            fit = (est.ml_estimate if method == "ml" else est.eml_estimate)(
                records, model, options
            )
            row["rmsle"] = rmsle(fit.p_hat, truth)
            chars = est.characterize(fit)
            row.update(
                pg_hat=chars.p_g, etaHs_hat=chars.eta_H_s, etaHi_hat=chars.eta_H_i,
                g2s_hat=chars.g2_s, g2i_hat=chars.g2_i,
                gh2s_hat=chars.gh2_s, gh2i_hat=chars.gh2_i,
            )
            row["converged"] = fit.converged
        except Exception:  # failures are data, not fatal
            row.update(rmsle=float("nan"), converged=False, **_NAN_CHARS)
        rows.append(row)


def _single_cell(spec, method, layout, p_g, n_m, eta, d, seed, cell_id, rows):
    gammas = spec.single_gammas
    model = est.SingleModeModel.two_detector(
        T=spec.bs_T, eta=eta, d=d, gammas=gammas
    ) if layout == "2d" else est.SingleModeModel.one_detector(
        eta=eta, d=d, gammas=gammas
    )
    options = est.EstimateOptions(n_starts=spec.n_starts, max_iter=spec.max_iter)
    for rep in range(spec.reps):
        truth = random_single_pnd(p_g, substream(seed, "pnd", cell_id, rep))
        records = []
        for nu, gamma in enumerate(gammas):
            probs = model.forward_probs(truth, nu)
            if spec.exact_counts:
                rec = SingleCountRecord(int(n_m) * probs, int(n_m), gamma=gamma, nu=nu)
            else:
                rec = sample_single_counts(
                    probs, int(n_m), substream(seed, "counts", cell_id, rep, nu),
                    gamma=gamma, nu=nu,
                )
            records.append(rec)
        row = {
            "cell_id": cell_id, "p_g": p_g, "n_m": n_m, "eta": eta, "d": d,
            "gamma": f"va{len(gammas)}", "rep": rep,
        }
        try:
            fit = (est.ml_estimate if method == "ml" else est.eml_estimate)(
                records, model, options
            )
            row["rmsle"] = rmsle(fit.p_hat, truth)
            row.update(_NAN_CHARS)
            row["pg_hat"] = float(fit.p_hat[1])
            row["g2s_hat"] = g2_marginal(fit.p_hat, truncated=True)
            row["converged"] = fit.converged
        except Exception:
            row.update(rmsle=float("nan"), converged=False, **_NAN_CHARS)
        rows.append(row)


def run_sweep(spec: SweepSpec, method: str = "ml-2x2d", seed: int = 0) -> list[dict]:
    """Run every (p_g, n_m, eta, d) cell of the sweep for one method.

    ``method`` is one of ml/eml crossed with 1d/2d/2x2d.  Rows are
    deterministic given the seed because each cell and repetition draws
    from its own substream; failures surface as converged=False rows.
    """
    try:
        kind, layout = method.split("-")
    except ValueError:
        raise InvalidInputError(f"method must look like 'ml-2x2d', got {method!r}")
    if kind not in ("ml", "eml") or layout not in ("1d", "2d", "2x2d"):
        raise InvalidInputError(f"unknown sweep method {method!r}")

    rows: list[dict] = []
    cell_id = 0
    for p_g in spec.p_g_grid:
        for n_m in spec.n_m_grid:
            for eta in spec.eta_grid:
                for d in spec.d_grid:
                    if layout == "2x2d":
                        _bipartite_cell(
                            spec, kind, p_g, n_m, eta, d, seed, cell_id, rows
                        )
                    else:
                        _single_cell(
                            spec, kind, layout, p_g, n_m, eta, d, seed, cell_id, rows
                        )
                    cell_id += 1
    return rows


def write_sweep_csv(path, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            out = []
            for col in SWEEP_COLUMNS:
                value = row.get(col)
                if isinstance(value, bool):
                    out.append("true" if value else "false")
                elif isinstance(value, float):
                    out.append(f"{value:.17g}")
                else:
                    out.append(str(value))
            writer.writerow(out)
