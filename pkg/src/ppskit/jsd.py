"""Joint spectral densities and their photon-number content.

A photon-pair source is described here by a normalized joint spectral
density (JSD) f(omega_s, omega_i) sampled on a uniform rectangular grid.
This module computes effective mode numbers (by SVD and by an equivalent
quadruple-integral contraction), splits the JSD into the four branches
produced by a pair of bandpass filters, and assembles the photon number
distribution matrix up to two-pair events.

Quadrature is a plain Riemann sum on the grid; every grid is renormalized
explicitly after discretization, so the algebraic identities between the
segmentation weights, overlaps and the synthesized distribution hold at
grid resolution rather than only in the continuum limit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .pnd import PndMatrix

# Branch weights below this value are treated as exactly zero and the
# corresponding normalized branch is flagged empty (avoids 0/0).
EMPTY_SEGMENT_THRESHOLD = 1e-15

_UNIFORM_RTOL = 1e-12
_NORM_TOL = 1e-12


def _uniform_step(axis: np.ndarray, name: str) -> float:
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size < 2:
        raise InvalidInputError(f"{name} must be a 1-D grid with at least 2 points")
    diffs = np.diff(axis)
    step = float(diffs.mean())
    if step <= 0:
        raise InvalidInputError(f"{name} must be strictly increasing")
    if np.max(np.abs(diffs - step)) > _UNIFORM_RTOL * abs(step) * max(1.0, axis.size):
        raise InvalidInputError(f"{name} is not uniform")
    return step


@dataclass(frozen=True)
class JsdGrid:
    """Discretized complex joint spectral amplitude on a uniform grid.

    ``values[a, b]`` holds f(axis_s[a], axis_i[b]).  The amplitude is
    renormalized on construction so that sum(|f|^2) * step_s * step_i == 1.
    Instances are immutable; the arrays are marked read-only.
    """

    values: np.ndarray
    axis_s: np.ndarray
    axis_i: np.ndarray
    step_s: float = field(init=False)
    step_i: float = field(init=False)

    def __post_init__(self):
        axis_s = np.asarray(self.axis_s, dtype=float)
        axis_i = np.asarray(self.axis_i, dtype=float)
        step_s = _uniform_step(axis_s, "axis_s")
        step_i = _uniform_step(axis_i, "axis_i")
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (axis_s.size, axis_i.size):
            raise InvalidInputError(
                f"values shape {values.shape} does not match axes "
                f"({axis_s.size}, {axis_i.size})"
            )
        norm_sq = float(np.sum(np.abs(values) ** 2)) * step_s * step_i
        if not math.isfinite(norm_sq) or norm_sq <= 0.0:
            raise InvalidInputError("JSD has zero or non-finite norm")
        values = values / math.sqrt(norm_sq)
        for arr in (values, axis_s, axis_i):
            arr.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "axis_s", axis_s)
        object.__setattr__(self, "axis_i", axis_i)
        object.__setattr__(self, "step_s", step_s)
        object.__setattr__(self, "step_i", step_i)

    def scaled(self) -> np.ndarray:
        """Values scaled by sqrt(step_s * step_i), so plain sums are integrals."""
        return self.values * math.sqrt(self.step_s * self.step_i)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2)) * self.step_s * self.step_i


@dataclass(frozen=True)
class FilterProfile:
    """Amplitude transmittance t(omega) of a spectral (or spatial) filter.

    The filter acts as a frequency-dependent beam splitter: amplitude t
    transmitted, amplitude r = sqrt(1 - t^2) reflected.  ``t`` must lie in
    [0, 1]; intensity data is converted with :meth:`from_intensity`.
    """

    omega: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        t = np.asarray(self.t, dtype=float)
        _uniform_step(omega, "filter axis")
        if t.shape != omega.shape:
            raise InvalidInputError("filter t and omega must have the same shape")
        if np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
            raise InvalidInputError("amplitude transmittance must lie in [0, 1]")
        t = np.clip(t, 0.0, 1.0)
        for arr in (omega, t):
            arr.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "t", t)

    @property
    def r(self) -> np.ndarray:
        """Amplitude reflectance, sqrt(1 - t^2) pointwise."""
        return np.sqrt(np.clip(1.0 - self.t**2, 0.0, 1.0))

    @classmethod
    def from_intensity(cls, omega, transmittance) -> "FilterProfile":
        """Build from intensity transmittance T(omega); stores t = sqrt(T)."""
        T = np.asarray(transmittance, dtype=float)
        if np.any(T < -1e-12) or np.any(T > 1.0 + 1e-12):
            raise InvalidInputError("intensity transmittance must lie in [0, 1]")
        return cls(omega, np.sqrt(np.clip(T, 0.0, 1.0)))

    @classmethod
    def rect(cls, axis, center: float, width: float) -> "FilterProfile":
        """Ideal bandpass: t = 1 for |omega - center| <= width / 2, else 0."""
        axis = np.asarray(axis, dtype=float)
        t = (np.abs(axis - center) <= width / 2.0).astype(float)
        return cls(axis, t)

    @classmethod
    def gauss(cls, axis, center: float, fwhm: float) -> "FilterProfile":
        """Gaussian bandpass with the given intensity FWHM."""
        axis = np.asarray(axis, dtype=float)
        T = np.exp(-4.0 * math.log(2.0) * (axis - center) ** 2 / fwhm**2)
        return cls.from_intensity(axis, T)

    @classmethod
    def all_pass(cls, axis) -> "FilterProfile":
        axis = np.asarray(axis, dtype=float)
        return cls(axis, np.ones_like(axis))

    @classmethod
    def blocking(cls, axis) -> "FilterProfile":
        axis = np.asarray(axis, dtype=float)
        return cls(axis, np.zeros_like(axis))


@dataclass(frozen=True)
class PumpGain:
    """Dimensionless pair-generation strength |xi|^2 of the pump.

    The synthesis truncates at two-pair events, which is only meaningful
    when three-pair terms of order |xi|^6 are negligible; construction
    therefore requires 0 < xi_sq < 0.1.
    """

    xi_sq: float

    def __post_init__(self):
        if not (0.0 < self.xi_sq < 0.1):
            raise InvalidInputError(
                f"xi_sq={self.xi_sq!r} outside (0, 0.1); two-pair truncation invalid"
            )


@dataclass(frozen=True)
class Segmentation:
    """Four-branch split of a JSD by the signal and idler filters.

    Branch indices follow (transmitted s & reflected i, reflected s &
    transmitted i, both transmitted, both reflected):

    ===== ===========================  =====================
    index amplitude weight             feeds
    ===== ===========================  =====================
    0     t_s * r_i * f  (weight q1)   one signal photon
    1     r_s * t_i * f  (weight q2)   one idler photon
    2     t_s * t_i * f  (weight q3)   a transmitted pair
    3     r_s * r_i * f  (weight q4)   nothing detected
    ===== ===========================  =====================

    ``parts`` holds the renormalized branch amplitudes (``None`` when the
    weight fell below :data:`EMPTY_SEGMENT_THRESHOLD`), ``kappa`` their
    effective mode numbers (1 for empty branches), and the remaining fields
    the pairwise exchange overlaps entering two-pair probabilities.
    """

    q: np.ndarray
    parts: tuple
    kappa: np.ndarray
    ox13: float
    ox24: float
    oy14: float
    oy23: float
    oc: complex

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        q.setflags(write=False)
        kappa = np.asarray(self.kappa, dtype=float)
        kappa.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "kappa", kappa)


def _require_normalized(jsd: JsdGrid) -> None:
    if abs(jsd.norm_squared() - 1.0) > 1e-10:
        raise InvalidInputError("JSD grid is not normalized")


def schmidt_number_svd(jsd: JsdGrid) -> float:
    """Effective mode number K from the singular values of the grid.

    With the grid scaled so its squared Frobenius norm is 1, the singular
    values c_k satisfy sum(c_k^2) = 1 and K = 1 / sum(c_k^4).
    """
    _require_normalized(jsd)
    s = np.linalg.svd(jsd.scaled(), compute_uv=False)
    return 1.0 / float(np.sum(s**4))


def schmidt_number_analytic(jsd: JsdGrid) -> float:
    """Effective mode number K without an SVD.

    1/K equals the exchange integral
    ``∫∫∫∫ f*(x1,y1) f*(x2,y2) f(x1,y2) f(x2,y1) dx1 dx2 dy1 dy2``,
    which contracts to trace((A A^dag)^2) for the scaled grid A.  The
    contraction costs O(n^3); it never forms the quadruple sum.
    """
    _require_normalized(jsd)
    a = jsd.scaled()
    gram = a @ a.conj().T
    purity = float(np.einsum("ij,ji->", gram, gram).real)
    return 1.0 / purity


def _require_same_axes(fa: JsdGrid, fb: JsdGrid) -> None:
    ok = (
        fa.values.shape == fb.values.shape
        and np.allclose(fa.axis_s, fb.axis_s, rtol=0, atol=1e-9 * fa.step_s)
        and np.allclose(fa.axis_i, fb.axis_i, rtol=0, atol=1e-9 * fa.step_i)
    )
    if not ok:
        raise InvalidInputError("grids do not share axes")


def pair_overlap(fa, fb, axis: str = "x", method: str = "contract") -> float:
    """Partial exchange overlap of two normalized amplitudes on one axis.

    For axis='x' (the signal axis) this evaluates
    ``∫∫∫∫ h*(x1,y1) g*(x2,y2) h(x2,y1) g(x1,y2)`` and for axis='y' the
    y-swapped analogue.  Either argument being ``None`` (an empty
    segmentation branch) yields 0.  ``method='brute'`` evaluates the raw
    O(n^4) quadruple sum and exists only as a test oracle.
    """
    if fa is None or fb is None:
        return 0.0
    _require_same_axes(fa, fb)
    if axis not in ("x", "y"):
        raise InvalidInputError(f"axis must be 'x' or 'y', got {axis!r}")
    a = fa.scaled()
    b = fb.scaled()
    if method == "brute":
        if axis == "x":
            val = np.einsum("ab,cd,cb,ad->", a.conj(), b.conj(), a, b, optimize=False)
        else:
            val = np.einsum("ab,cd,ad,cb->", a.conj(), b.conj(), a, b, optimize=False)
        return float(val.real)
    if method != "contract":
        raise InvalidInputError(f"unknown overlap method {method!r}")
    if axis == "x":
        # trace(A A† B B†) == ||B† A||_F²: x-parts inner-producted, y traced out
        m = b.conj().T @ a
    else:
        m = a @ b.conj().T
    return float(np.sum(np.abs(m) ** 2))


def complex_overlap(f1, f2, f3, f4, method: str = "contract") -> complex:
    """Four-branch exchange overlap O_c entering the two-pair coincidence cell.

    Evaluates ``∫∫∫∫ F1*(x1,y1) F2*(x2,y2) F3(x1,y2) F4(x2,y1)``; any empty
    branch makes the overlap 0.
    """
    if any(f is None for f in (f1, f2, f3, f4)):
        return 0.0 + 0.0j
    for other in (f2, f3, f4):
        _require_same_axes(f1, other)
    a1, a2, a3, a4 = (f.scaled() for f in (f1, f2, f3, f4))
    if method == "brute":
        val = np.einsum("ab,cd,ad,cb->", a1.conj(), a2.conj(), a3, a4, optimize=False)
        return complex(val)
    if method != "contract":
        raise InvalidInputError(f"unknown overlap method {method!r}")
    m13 = a1.conj().T @ a3
    m24 = a2.conj().T @ a4
    return complex(np.einsum("ij,ji->", m13, m24))


def _require_filter_axis(filt: FilterProfile, axis: np.ndarray, step: float, name: str):
    if filt.omega.shape != axis.shape or not np.allclose(
        filt.omega, axis, rtol=0, atol=1e-9 * step
    ):
        raise InvalidInputError(f"{name} filter axis does not match the JSD axis")


def segment(jsd: JsdGrid, filt_s: FilterProfile, filt_i: FilterProfile) -> Segmentation:
    """Split a JSD into its four filter branches with weights and overlaps.

    The branch weights always sum to 1 because |t|^2 + |r|^2 = 1 pointwise
    on both axes.  Mode numbers are computed analytically per nonempty
    branch; empty branches get kappa = 1 and overlaps 0.
    """
    _require_filter_axis(filt_s, jsd.axis_s, jsd.step_s, "signal")
    _require_filter_axis(filt_i, jsd.axis_i, jsd.step_i, "idler")

    tx, rx = filt_s.t, filt_s.r
    ty, ry = filt_i.t, filt_i.r
    branches = ((tx, ry), (rx, ty), (tx, ty), (rx, ry))

    measure = jsd.step_s * jsd.step_i
    q = np.zeros(4)
    parts = []
    for j, (wx, wy) in enumerate(branches):
        g = wx[:, None] * wy[None, :] * jsd.values
        qj = float(np.sum(np.abs(g) ** 2)) * measure
        if qj < EMPTY_SEGMENT_THRESHOLD:
            q[j] = 0.0
            parts.append(None)
        else:
            q[j] = qj
            parts.append(JsdGrid(g, jsd.axis_s, jsd.axis_i))  # renormalizes
    if abs(q.sum() - 1.0) > 1e-10:
        raise InvalidInputError("filter branches do not preserve the JSD norm")

    kappa = np.array(
        [1.0 if p is None else schmidt_number_analytic(p) for p in parts]
    )
    return Segmentation(
        q=q,
        parts=tuple(parts),
        kappa=kappa,
        ox13=pair_overlap(parts[0], parts[2], "x"),
        ox24=pair_overlap(parts[1], parts[3], "x"),
        oy14=pair_overlap(parts[0], parts[3], "y"),
        oy23=pair_overlap(parts[1], parts[2], "y"),
        oc=complex_overlap(parts[0], parts[1], parts[2], parts[3]),
    )


def synthesize_pnd(
    jsd: JsdGrid,
    filt_s: FilterProfile,
    filt_i: FilterProfile,
    gain: PumpGain,
    n_max: int = 2,
) -> PndMatrix:
    """Photon number distribution of the filtered source, two-pair exact.

    Single-pair events distribute the branch weights onto the one-photon
    cells; two-pair events fill the two-photon cells with the exact
    mode-number and exchange-overlap corrections.  The vacuum cell absorbs
    the remainder so the matrix is normalized.
    """
    if n_max < 2:
        raise InvalidInputError("n_max must be at least 2")
    seg = segment(jsd, filt_s, filt_i)
    mu = gain.xi_sq
    q1, q2, q3, q4 = seg.q
    k1, k2, k3, k4 = seg.kappa

    single = mu * np.array(
        [
            [q4, q2, 0.0],
            [q1, q3, 0.0],
            [0.0, 0.0, 0.0],
        ]
    )
    oc_re = seg.oc.real
    double = mu**2 * np.array(
        [
            [
                q4**2 * (1 + 1 / k4) / 2,
                q2 * q4 * (1 + seg.ox24),
                q2**2 * (1 + 1 / k2) / 2,
            ],
            [
                q1 * q4 * (1 + seg.oy14),
                q1 * q2 + q3 * q4 + 2 * math.sqrt(q1 * q2 * q3 * q4) * oc_re,
                q2 * q3 * (1 + seg.oy23),
            ],
            [
                q1**2 * (1 + 1 / k1) / 2,
                q1 * q3 * (1 + seg.ox13),
                q3**2 * (1 + 1 / k3) / 2,
            ],
        ]
    )
    p = single + double
    p[0, 0] = 0.0
    p[0, 0] = 1.0 - p.sum()
    if n_max > 2:
        padded = np.zeros((n_max + 1, n_max + 1))
        padded[:3, :3] = p
        p = padded
    return PndMatrix(p)


def gaussian_jsd(
    sigma_plus: float,
    sigma_minus: float,
    theta: float = math.pi / 4,
    n_s: int = 256,
    n_i: int = 256,
    span: float = 5.0,
    chirp: float = 0.0,
) -> JsdGrid:
    """Correlated two-dimensional Gaussian amplitude on rotated axes.

    The amplitude is exp(-u^2 / (2 sigma_plus^2) - v^2 / (2 sigma_minus^2))
    with u = cos(theta) x + sin(theta) y and v the orthogonal coordinate;
    theta = pi/4 with sigma_plus < sigma_minus gives the frequency
    anti-correlation typical of downconversion.  A nonzero ``chirp`` adds a
    phase exp(i * chirp * u * v), making the amplitude genuinely complex.
    The grid spans ``span`` marginal standard deviations on each axis.

    For this family the continuum mode number is (r + 1/r) / 2 with
    r = sigma_minus / sigma_plus, handy as an external cross-check.
    """
    if sigma_plus <= 0 or sigma_minus <= 0:
        raise InvalidInputError("sigmas must be positive")
    c, s = math.cos(theta), math.sin(theta)
    std_x = math.sqrt((c**2 * sigma_plus**2 + s**2 * sigma_minus**2) / 2.0)
    std_y = math.sqrt((s**2 * sigma_plus**2 + c**2 * sigma_minus**2) / 2.0)
    axis_s = np.linspace(-span * std_x, span * std_x, n_s)
    axis_i = np.linspace(-span * std_y, span * std_y, n_i)
    X, Y = np.meshgrid(axis_s, axis_i, indexing="ij")
    u = c * X + s * Y
    v = -s * X + c * Y
    amp = np.exp(
        -(u**2) / (2 * sigma_plus**2)
        - v**2 / (2 * sigma_minus**2)
        + (1j * chirp * u * v if chirp else 0.0)
    )
    return JsdGrid(amp, axis_s, axis_i)


def read_jsd_csv(path) -> JsdGrid:
    """Load a JSD from CSV with columns omega_s, omega_i, re, im.

    The rows must cover a complete rectangular lattice (any order).
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"omega_s", "omega_i", "re", "im"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise InvalidInputError(
                f"JSD CSV must have header omega_s,omega_i,re,im, got {reader.fieldnames}"
            )
        for line_no, row in enumerate(reader, start=2):
            try:
                rows.append(
                    (
                        float(row["omega_s"]),
                        float(row["omega_i"]),
                        float(row["re"]),
                        float(row["im"]),
                    )
                )
            except (TypeError, ValueError):
                raise InvalidInputError(f"malformed JSD CSV row at line {line_no}")
    if not rows:
        raise InvalidInputError("JSD CSV is empty")
    ws = np.array(sorted({r[0] for r in rows}))
    wi = np.array(sorted({r[1] for r in rows}))
    if len(rows) != ws.size * wi.size:
        raise InvalidInputError(
            "JSD CSV does not cover a complete rectangular lattice"
        )
    index_s = {w: a for a, w in enumerate(ws)}
    index_i = {w: b for b, w in enumerate(wi)}
    values = np.full((ws.size, wi.size), np.nan, dtype=complex)
    for w_s, w_i, re, im in rows:
        values[index_s[w_s], index_i[w_i]] = re + 1j * im
    if np.any(np.isnan(values)):
        raise InvalidInputError("JSD CSV has duplicate or missing lattice points")
    return JsdGrid(values, ws, wi)


def write_jsd_csv(path, jsd: JsdGrid) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega_s", "omega_i", "re", "im"])
        for a, w_s in enumerate(jsd.axis_s):
            for b, w_i in enumerate(jsd.axis_i):
                val = jsd.values[a, b]
                writer.writerow(
                    [f"{w_s:.17g}", f"{w_i:.17g}", f"{val.real:.17g}", f"{val.imag:.17g}"]
                )


def read_filter_csv(path, kind: str = "amplitude") -> FilterProfile:
    """Load a filter from CSV with columns omega, t.

    ``kind`` selects whether the t column is an amplitude or an intensity
    transmittance; intensities are converted via sqrt.
    """
    if kind not in ("amplitude", "intensity"):
        raise InvalidInputError(f"filter kind must be amplitude|intensity, got {kind!r}")
    omegas, ts = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"omega", "t"}:
            raise InvalidInputError(
                f"filter CSV must have header omega,t, got {reader.fieldnames}"
            )
        for row in reader:
            omegas.append(float(row["omega"]))
            ts.append(float(row["t"]))
    if not omegas:
        raise InvalidInputError("filter CSV is empty")
    order = np.argsort(omegas)
    omega = np.asarray(omegas)[order]
    t = np.asarray(ts)[order]
    if kind == "intensity":
        return FilterProfile.from_intensity(omega, t)
    return FilterProfile(omega, t)
