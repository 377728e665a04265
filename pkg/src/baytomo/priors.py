"""Prior energies G(x) with pi(x) ~ exp(-G(x)).

Images are 2D arrays indexed ``[i, j]`` (row, column).  Neighbour
differences use the pixel above (``i - 1``) and to the left (``j - 1``).

* Gaussian and TV: differences only between in-grid pairs, plus a separate
  penalty on the outer ring of pixels.
* Cauchy (walk and sheet): out-of-grid neighbours are zero, and the energy
  is exactly ``-log`` of the product of Cauchy factors.
* Besov B^1_{1,1}: ``scale * sum |D x|`` with the orthonormal Haar matrix D.

``smoothing_beta > 0`` swaps every ``|t|`` for ``sqrt(t^2 + beta^2) - beta``
in TV and Besov so that L-BFGS and HMC see a differentiable energy.
Single-pixel changes are evaluated by :func:`local_delta`, a numba kernel
that only visits the terms touching the pixel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .wavelets import DwtOperator, build_dwt

GAUSSIAN, TV, TV_ISO, BESOV, CAUCHY, CAUCHY_SHEET = range(6)
PRIOR_NAMES = ("gaussian", "tv", "tv_iso", "besov", "cauchy", "cauchy_sheet")


@dataclass(frozen=True)
class GaussianPriorParams:
    sigma_pr: float
    sigma_boundary: float

    def __post_init__(self):
        if not (self.sigma_pr > 0 and self.sigma_boundary > 0):
            raise ValueError("Gaussian prior parameters must be positive")


@dataclass(frozen=True)
class TvPriorParams:
    alpha: float
    alpha_boundary: float
    isotropic: bool = False
    smoothing_beta: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.alpha_boundary > 0):
            raise ValueError("TV weights must be positive")
        if self.smoothing_beta < 0:
            raise ValueError("smoothing_beta must be nonnegative")


@dataclass(frozen=True)
class BesovPriorParams:
    levels: int | None = None
    scale: float = 1.0
    smoothing_beta: float = 0.0

    def __post_init__(self):
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.smoothing_beta < 0:
            raise ValueError("smoothing_beta must be nonnegative")


@dataclass(frozen=True)
class CauchyPriorParams:
    lam: float
    h: float = 1.0
    formulation: str = "walk"

    def __post_init__(self):
        if not (self.lam > 0 and self.h > 0):
            raise ValueError("lambda and h must be positive")
        if self.formulation not in ("walk", "sheet"):
            raise ValueError(f"unknown Cauchy formulation {self.formulation!r}")

    @property
    def width(self) -> float:
        return self.h * self.lam if self.formulation == "walk" else self.h**2 * self.lam


def _sabs(t, beta):
    if beta > 0:
        return np.sqrt(t * t + beta * beta) - beta
    return np.abs(t)


def _dsabs(t, beta):
    if beta > 0:
        return t / np.sqrt(t * t + beta * beta)
    return np.sign(t)


def boundary_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask


def _diffs(X):
    return X[1:, :] - X[:-1, :], X[:, 1:] - X[:, :-1]


def _scatter_diffs(gv, gh, shape):
    """Adjoint of :func:`_diffs`."""
    g = np.zeros(shape)
    g[1:, :] += gv
    g[:-1, :] -= gv
    g[:, 1:] += gh
    g[:, :-1] -= gh
    return g


def gaussian_energy(p: GaussianPriorParams, X) -> float:
    X = np.asarray(X, dtype=np.float64)
    dv, dh = _diffs(X)
    bd = X[boundary_mask(X.shape)]
    return float(((dv**2).sum() + (dh**2).sum()) / p.sigma_pr**2 + (bd**2).sum() / p.sigma_boundary**2)


def gaussian_grad(p: GaussianPriorParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    dv, dh = _diffs(X)
    g = _scatter_diffs(dv, dh, X.shape) * (2.0 / p.sigma_pr**2)
    g += np.where(boundary_mask(X.shape), X, 0.0) * (2.0 / p.sigma_boundary**2)
    return g


def _iso_parts(X):
    """Backward differences padded with zeros where the neighbour is missing."""
    dv = np.zeros_like(X)
    dh = np.zeros_like(X)
    dv[1:, :] = X[1:, :] - X[:-1, :]
    dh[:, 1:] = X[:, 1:] - X[:, :-1]
    return dv, dh


def tv_energy(p: TvPriorParams, X) -> float:
    X = np.asarray(X, dtype=np.float64)
    beta = p.smoothing_beta
    if p.isotropic:
        dv, dh = _iso_parts(X)
        norm = np.sqrt(dv**2 + dh**2 + beta**2) - beta
        inner = float(norm.sum())
    else:
        dv, dh = _diffs(X)
        inner = float(_sabs(dv, beta).sum() + _sabs(dh, beta).sum())
    bd = X[boundary_mask(X.shape)]
    return p.alpha * inner + p.alpha_boundary * float(_sabs(bd, beta).sum())


def tv_grad(p: TvPriorParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    beta = p.smoothing_beta
    if p.isotropic:
        dv, dh = _iso_parts(X)
        norm = np.sqrt(dv**2 + dh**2 + beta**2)
        with np.errstate(invalid="ignore", divide="ignore"):
            gv = np.where(norm > 0, dv / norm, 0.0)
            gh = np.where(norm > 0, dh / norm, 0.0)
        g = _scatter_diffs(gv[1:, :], gh[:, 1:], X.shape)
    else:
        dv, dh = _diffs(X)
        g = _scatter_diffs(_dsabs(dv, beta), _dsabs(dh, beta), X.shape)
    g *= p.alpha
    g += np.where(boundary_mask(X.shape), _dsabs(X, beta), 0.0) * p.alpha_boundary
    return g


def _dwt_for(p: BesovPriorParams, shape) -> DwtOperator:
    if shape[0] != shape[1]:
        raise ValueError("Besov prior needs a square grid")
    return build_dwt(shape[0], p.levels)


def besov_energy(p: BesovPriorParams, X, dwt: DwtOperator | None = None) -> float:
    X = np.asarray(X, dtype=np.float64)
    dwt = dwt or _dwt_for(p, X.shape)
    return p.scale * float(_sabs(dwt.forward(X), p.smoothing_beta).sum())


def besov_grad(p: BesovPriorParams, X, dwt: DwtOperator | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    dwt = dwt or _dwt_for(p, X.shape)
    w = dwt.forward(X)
    return p.scale * dwt.inverse(_dsabs(w, p.smoothing_beta)).reshape(X.shape)


def _cauchy_diffs(p: CauchyPriorParams, X):
    Xp = np.pad(X, ((1, 0), (1, 0)))
    if p.formulation == "walk":
        return (Xp[1:, 1:] - Xp[:-1, 1:], Xp[1:, 1:] - Xp[1:, :-1])
    return (Xp[1:, 1:] - Xp[:-1, 1:] - Xp[1:, :-1] + Xp[:-1, :-1],)


def cauchy_energy(p: CauchyPriorParams, X) -> float:
    X = np.asarray(X, dtype=np.float64)
    c = p.width
    total = 0.0
    for d in _cauchy_diffs(p, X):
        total += float(np.sum(np.log(c * c + d * d) - np.log(c)))
    return total


def cauchy_grad(p: CauchyPriorParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    c2 = p.width**2
    g = np.zeros((X.shape[0] + 1, X.shape[1] + 1))
    diffs = _cauchy_diffs(p, X)
    if p.formulation == "walk":
        dv, dh = diffs
        gv = 2 * dv / (c2 + dv * dv)
        gh = 2 * dh / (c2 + dh * dh)
        g[1:, 1:] += gv + gh
        g[:-1, 1:] -= gv
        g[1:, :-1] -= gh
    else:
        (d,) = diffs
        gd = 2 * d / (c2 + d * d)
        g[1:, 1:] += gd
        g[:-1, 1:] -= gd
        g[1:, :-1] -= gd
        g[:-1, :-1] += gd
    return g[1:, 1:]


# --------------------------------------------------------------------------
# single-pixel deltas


@numba.njit(cache=True)
def _nabs(t, beta):
    if beta > 0:
        return np.sqrt(t * t + beta * beta) - beta
    return abs(t)


@numba.njit(cache=True)
def _px(X, I, J, i, j):
    if i < 0 or j < 0:
        return 0.0
    return X[i * J + j]


@numba.njit(cache=True)
def _iso_term(X, I, J, i, j, beta):
    dv = X[i * J + j] - X[(i - 1) * J + j] if i > 0 else 0.0
    dh = X[i * J + j] - X[i * J + j - 1] if j > 0 else 0.0
    return np.sqrt(dv * dv + dh * dh + beta * beta) - beta


@numba.njit(cache=True)
def _sheet_term(X, I, J, i, j, c):
    d = _px(X, I, J, i, j) - _px(X, I, J, i - 1, j) - _px(X, I, J, i, j - 1) + _px(X, I, J, i - 1, j - 1)
    return np.log(c * c + d * d)


@numba.njit(cache=True)
def local_delta(kind, prm, X, I, J, k, new, dwt_indptr, dwt_indices, dwt_data, W):
    """G(x with x[k] = new) - G(x), touching only terms that involve pixel k.

    ``X`` is the flat image; it is modified temporarily for the iso-TV and
    sheet stencils and restored before returning.
    """
    old = X[k]
    if new == old:
        return 0.0
    i = k // J
    j = k - i * J
    on_bd = i == 0 or j == 0 or i == I - 1 or j == J - 1
    if kind == BESOV:
        scale, beta = prm[0], prm[1]
        step = new - old
        acc = 0.0
        for q in range(dwt_indptr[k], dwt_indptr[k + 1]):
            w = W[dwt_indices[q]]
            acc += _nabs(w + step * dwt_data[q], beta) - _nabs(w, beta)
        return scale * acc
    if kind == GAUSSIAN or kind == TV:
        acc = 0.0
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ni = i + di
            nj = j + dj
            if ni < 0 or nj < 0 or ni >= I or nj >= J:
                continue
            nb = X[ni * J + nj]
            if kind == GAUSSIAN:
                acc += (new - nb) ** 2 - (old - nb) ** 2
            else:
                acc += _nabs(new - nb, prm[2]) - _nabs(old - nb, prm[2])
        if kind == GAUSSIAN:
            out = acc * prm[0]
            if on_bd:
                out += (new * new - old * old) * prm[1]
            return out
        out = acc * prm[0]
        if on_bd:
            out += (_nabs(new, prm[2]) - _nabs(old, prm[2])) * prm[1]
        return out
    if kind == TV_ISO:
        alpha, alpha_bd, beta = prm[0], prm[1], prm[2]
        before = _iso_term(X, I, J, i, j, beta)
        if i + 1 < I:
            before += _iso_term(X, I, J, i + 1, j, beta)
        if j + 1 < J:
            before += _iso_term(X, I, J, i, j + 1, beta)
        X[k] = new
        after = _iso_term(X, I, J, i, j, beta)
        if i + 1 < I:
            after += _iso_term(X, I, J, i + 1, j, beta)
        if j + 1 < J:
            after += _iso_term(X, I, J, i, j + 1, beta)
        X[k] = old
        out = alpha * (after - before)
        if on_bd:
            out += (_nabs(new, beta) - _nabs(old, beta)) * alpha_bd
        return out
    if kind == CAUCHY:
        c2 = prm[0] * prm[0]
        up = _px(X, I, J, i - 1, j)
        left = _px(X, I, J, i, j - 1)
        acc = np.log((c2 + (new - up) ** 2) / (c2 + (old - up) ** 2))
        acc += np.log((c2 + (new - left) ** 2) / (c2 + (old - left) ** 2))
        if i + 1 < I:
            down = X[(i + 1) * J + j]
            acc += np.log((c2 + (down - new) ** 2) / (c2 + (down - old) ** 2))
        if j + 1 < J:
            right = X[i * J + j + 1]
            acc += np.log((c2 + (right - new) ** 2) / (c2 + (right - old) ** 2))
        return acc
    # CAUCHY_SHEET
    c = prm[0]
    before = 0.0
    after = 0.0
    for di in (0, 1):
        for dj in (0, 1):
            if i + di < I and j + dj < J:
                before += _sheet_term(X, I, J, i + di, j + dj, c)
    X[k] = new
    for di in (0, 1):
        for dj in (0, 1):
            if i + di < I and j + dj < J:
                after += _sheet_term(X, I, J, i + di, j + dj, c)
    X[k] = old
    return after - before


_EMPTY_I = np.zeros(1, dtype=np.int32)
_EMPTY_F = np.zeros(1)


class PriorModel:
    """One of the four priors bound to a grid shape.

    Energies are exact up to the parameters' normalizing constants, which are
    dropped; samplers and optimizers only use differences.
    """

    def __init__(self, params, shape):
        self.params = params
        self.shape = (int(shape[0]), int(shape[1]))
        self.dwt = None
        if isinstance(params, GaussianPriorParams):
            self.kind = GAUSSIAN
        elif isinstance(params, TvPriorParams):
            self.kind = TV_ISO if params.isotropic else TV
        elif isinstance(params, BesovPriorParams):
            self.kind = BESOV
            self.dwt = _dwt_for(params, self.shape)
        elif isinstance(params, CauchyPriorParams):
            self.kind = CAUCHY if params.formulation == "walk" else CAUCHY_SHEET
        else:
            raise TypeError(f"unsupported prior parameters {type(params).__name__}")

    @property
    def name(self) -> str:
        return PRIOR_NAMES[self.kind]

    @property
    def smoothing_beta(self) -> float:
        return getattr(self.params, "smoothing_beta", 0.0)

    def _img(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.size != self.shape[0] * self.shape[1]:
            raise ValueError(f"expected {self.shape} image, got {x.size} values")
        return x.reshape(self.shape)

    def energy(self, x) -> float:
        X = self._img(x)
        p = self.params
        if self.kind == GAUSSIAN:
            return gaussian_energy(p, X)
        if self.kind in (TV, TV_ISO):
            return tv_energy(p, X)
        if self.kind == BESOV:
            return besov_energy(p, X, self.dwt)
        return cauchy_energy(p, X)

    def gradient(self, x) -> np.ndarray:
        X = self._img(x)
        p = self.params
        if self.kind == GAUSSIAN:
            g = gaussian_grad(p, X)
        elif self.kind in (TV, TV_ISO):
            g = tv_grad(p, X)
        elif self.kind == BESOV:
            g = besov_grad(p, X, self.dwt)
        else:
            g = cauchy_grad(p, X)
        return g.ravel()

    def with_smoothing(self, beta: float) -> "PriorModel":
        """Copy with a different Charbonnier scale (TV and Besov only)."""
        if self.kind in (TV, TV_ISO, BESOV):
            from dataclasses import replace

            return PriorModel(replace(self.params, smoothing_beta=beta), self.shape)
        return self

    def kernel_params(self) -> np.ndarray:
        p = self.params
        if self.kind == GAUSSIAN:
            return np.array([1.0 / p.sigma_pr**2, 1.0 / p.sigma_boundary**2])
        if self.kind in (TV, TV_ISO):
            return np.array([p.alpha, p.alpha_boundary, p.smoothing_beta])
        if self.kind == BESOV:
            return np.array([p.scale, p.smoothing_beta])
        return np.array([p.width])

    def dwt_arrays(self):
        if self.dwt is None:
            return _EMPTY_I, _EMPTY_I, _EMPTY_F
        m = self.dwt.matrix
        return m.indptr.astype(np.int32), m.indices.astype(np.int32), m.data

    def coefficients(self, x) -> np.ndarray:
        """Fresh Haar coefficients (the cache Besov deltas read from)."""
        if self.dwt is None:
            return _EMPTY_F.copy()
        return self.dwt.forward(x)

    def delta_energy(self, x, pixel, new_value: float, coeffs=None) -> float:
        """G(x') - G(x) where x' equals x except at ``pixel``.

        ``pixel`` is a flat index or an ``(i, j)`` pair.  For Besov,
        ``coeffs`` is the cached ``D @ x``; computed fresh when omitted.
        """
        X = np.array(x, dtype=np.float64).ravel()
        I, J = self.shape
        if X.size != I * J:
            raise ValueError(f"expected {I * J} values, got {X.size}")
        if isinstance(pixel, (tuple, list)):
            i, j = pixel
            if not (0 <= i < I and 0 <= j < J):
                raise IndexError(f"pixel {pixel} outside {self.shape} grid")
            k = i * J + j
        else:
            k = int(pixel)
            if not 0 <= k < I * J:
                raise IndexError(f"pixel {k} outside grid of {I * J}")
        if self.kind == BESOV and coeffs is None:
            coeffs = self.coefficients(X)
        W = _EMPTY_F if coeffs is None else np.asarray(coeffs, dtype=np.float64)
        ip, ix, dd = self.dwt_arrays()
        return local_delta(self.kind, self.kernel_params(), X, I, J, k, float(new_value), ip, ix, dd, W)

    def update_coefficients(self, coeffs, pixel: int, step: float) -> None:
        """In-place cache update after pixel ``pixel`` moved by ``step``."""
        if self.dwt is not None:
            rows, vals = self.dwt.column(pixel)
            coeffs[rows] += step * vals


def make_prior(name: str, shape, pixel_size: float = 1.0, **kw) -> PriorModel:
    """Build a prior from its config name and named numeric parameters.

    Unset boundary weights are tied to the main weight.
    """
    if name == "gaussian":
        s = kw["sigma_pr"]
        params = GaussianPriorParams(s, kw.get("sigma_boundary") or s)
    elif name in ("tv", "tv_iso"):
        a = kw["alpha"]
        params = TvPriorParams(a, kw.get("alpha_boundary") or a, name == "tv_iso",
                               kw.get("smoothing_beta", 0.0))
    elif name == "besov":
        params = BesovPriorParams(kw.get("levels"), kw.get("scale", 1.0), kw.get("smoothing_beta", 0.0))
    elif name in ("cauchy", "cauchy_sheet"):
        params = CauchyPriorParams(kw["lam"], kw.get("h", pixel_size),
                                   "walk" if name == "cauchy" else "sheet")
    else:
        raise ValueError(f"unknown prior {name!r}; expected one of {', '.join(PRIOR_NAMES)}")
    return PriorModel(params, shape)


# main tunable parameter of each prior, used by grid search
MAIN_PARAMETER = {
    "gaussian": "sigma_pr",
    "tv": "alpha",
    "tv_iso": "alpha",
    "besov": "scale",
    "cauchy": "lam",
    "cauchy_sheet": "lam",
}
