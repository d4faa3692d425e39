"""Bundled example configurations.

``reference_detectors`` carries a calibrated parameter set from a
tabletop downconversion source read out through 50/50 fiber splitters and
four avalanche photodiodes; it is the default detector model of the
command-line estimator.  ``wide_narrow_study`` builds the anticorrelated
Gaussian source with a wide signal filter and a narrow idler filter used
throughout the tests and example scripts to study heralded-g2 bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .detection import DetectorPair
from .jsd import FilterProfile, JsdGrid, PumpGain, gaussian_jsd, synthesize_pnd
from .pnd import PndMatrix, apply_loss_bipartite

# Calibrated lab values: splitter transmittances, detector efficiencies,
# per-trial noise probabilities (trigger-gated), pump repetition rate.
REFERENCE_T_BS = (0.4952, 0.4846)
REFERENCE_ETAS = (0.562, 0.575, 0.567, 0.548)
REFERENCE_DARKS = (1.01e-7, 2.11e-7, 0.94e-7, 1.00e-7)
REFERENCE_REP_RATE_HZ = 76.0e6


def reference_detectors() -> tuple[DetectorPair, DetectorPair]:
    """Detector pairs with the bundled calibration values."""
    det_s = DetectorPair(
        T=REFERENCE_T_BS[0],
        eta_t=REFERENCE_ETAS[0],
        eta_r=REFERENCE_ETAS[1],
        d_t=REFERENCE_DARKS[0],
        d_r=REFERENCE_DARKS[1],
    )
    det_i = DetectorPair(
        T=REFERENCE_T_BS[1],
        eta_t=REFERENCE_ETAS[2],
        eta_r=REFERENCE_ETAS[3],
        d_t=REFERENCE_DARKS[2],
        d_r=REFERENCE_DARKS[3],
    )
    return det_s, det_i


@dataclass(frozen=True)
class WideNarrowStudy:
    """Wide-signal / narrow-idler heralded-source scenario.

    The source matrix already includes the collection losses; detection
    adds 50/50 splitters with equal-efficiency detectors and optional
    noise.
    """

    jsd: JsdGrid
    filt_s: FilterProfile
    filt_i: FilterProfile
    gain: PumpGain
    loss_T: float
    eta: float
    bs_T: float

    def source_pnd(self) -> PndMatrix:
        filtered = synthesize_pnd(self.jsd, self.filt_s, self.filt_i, self.gain)
        return apply_loss_bipartite(filtered, self.loss_T, self.loss_T)

    def detectors(self, d: float = 0.0) -> tuple[DetectorPair, DetectorPair]:
        det = DetectorPair(T=self.bs_T, eta_t=self.eta, eta_r=self.eta, d_t=d, d_r=d)
        return det, det


def wide_narrow_study(
    xi_sq: float = 1e-3,
    eta: float = 0.5,
    loss_T: float = 0.9,
    n_grid: int = 256,
    width_s: float = 2.0,
    width_i: float = 0.2,
) -> WideNarrowStudy:
    """Anticorrelated Gaussian source with 10:1 filter-width asymmetry.

    Defaults give a branch weight of roughly 0.58 for transmitted pairs,
    an essentially unit signal heralding bound, an idler bound near 0.58,
    and an all-click probability of a few 1e-9 per trial.
    """
    jsd = gaussian_jsd(
        sigma_plus=0.05,
        sigma_minus=0.24,
        theta=math.pi / 4,
        n_s=n_grid,
        n_i=n_grid,
        span=10.0,
    )
    return WideNarrowStudy(
        jsd=jsd,
        filt_s=FilterProfile.rect(jsd.axis_s, 0.0, width_s),
        filt_i=FilterProfile.rect(jsd.axis_i, 0.0, width_i),
        gain=PumpGain(xi_sq),
        loss_T=loss_T,
        eta=eta,
        bs_T=0.5,
    )
