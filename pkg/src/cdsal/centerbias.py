"""Dataset-level gaze prior and the bias-corrected normalisation behind NSS'."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .core import minmax_normalize
from .errors import DegenerateInputError, FitError, ParameterError, ParseError

MIN_FIT_POINTS = 100


@dataclass(frozen=True, eq=False)
class CenterBiasModel:
    """2-D Gaussian over normalised frame coordinates ``[0, 1]^2``."""

    mean: tuple
    covariance: tuple
    sample_count: int = 0

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=np.float64).reshape(2)
        c = np.asarray(self.covariance, dtype=np.float64).reshape(2, 2)
        if not (np.isfinite(m).all() and np.isfinite(c).all()):
            raise ParameterError("center-bias parameters must be finite")
        if not ((0 <= m) & (m <= 1)).all():
            raise ParameterError(f"center-bias mean {m.tolist()} outside [0, 1]^2")
        if abs(c[0, 1] - c[1, 0]) > 1e-12:
            raise ParameterError("covariance is not symmetric")
        if not (c[0, 0] > 0 and np.linalg.det(c) > 0):
            raise ParameterError("covariance is not positive definite")
        object.__setattr__(self, "mean", tuple(float(v) for v in m))
        object.__setattr__(self, "covariance", tuple(tuple(float(v) for v in row) for row in c))

    def __eq__(self, other):
        if not isinstance(other, CenterBiasModel):
            return NotImplemented
        return (self.mean == other.mean and self.covariance == other.covariance
                and self.sample_count == other.sample_count)

    def __hash__(self):
        return hash((self.mean, self.covariance, self.sample_count))

    def density(self, dims) -> np.ndarray:
        return evaluate_F(self, dims)

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "covariance": [list(r) for r in self.covariance],
                "sample_count": self.sample_count}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CenterBiasModel":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read center-bias model: {exc}", path) from exc
        extra = set(obj) - {"mean", "covariance", "sample_count"}
        if extra:
            raise ParseError(f"unknown key(s): {', '.join(sorted(extra))}", path)
        try:
            return cls(obj["mean"], obj["covariance"], int(obj.get("sample_count", 0)))
        except (KeyError, ParameterError, ValueError) as exc:
            raise ParseError(f"invalid center-bias model: {exc}", path) from exc


def fit_center_bias(samples) -> CenterBiasModel:
    """Maximum-likelihood Gaussian fit to gaze pooled across sequences.

    ``samples`` is an iterable of ``(points, (width, height))`` pairs where
    ``points`` is ``(n, 2)`` in that sequence's pixel coordinates; each set is
    divided by its own dimensions before pooling.  Sums use :func:`math.fsum`
    so the fit does not depend on point order.
    """
    parts = []
    for pts, (w, h) in samples:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        parts.append(pts / np.array([w, h], dtype=np.float64))
    if not parts:
        raise FitError("no gaze points to fit")
    u = np.concatenate(parts)
    n = len(u)
    if n < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} gaze points, got {n}")
    mx = math.fsum(u[:, 0]) / n
    my = math.fsum(u[:, 1]) / n
    dx, dy = u[:, 0] - mx, u[:, 1] - my
    sxx = math.fsum(dx * dx) / n
    syy = math.fsum(dy * dy) / n
    sxy = math.fsum(dx * dy) / n
    det = sxx * syy - sxy * sxy
    if not (sxx > 0 and syy > 0) or det <= 1e-12 * max(sxx, syy) ** 2:
        raise FitError("gaze points are degenerate (singular covariance)")
    try:
        return CenterBiasModel((mx, my), ((sxx, sxy), (sxy, syy)), n)
    except ParameterError as exc:
        raise FitError(str(exc)) from exc


@lru_cache(maxsize=16)
def _density(mean, cov, width, height) -> np.ndarray:
    u = (np.arange(width) + 0.5) / width - mean[0]
    v = (np.arange(height) + 0.5) / height - mean[1]
    inv = np.linalg.inv(np.array(cov))
    q = (inv[0, 0] * u[None, :] ** 2 + 2 * inv[0, 1] * u[None, :] * v[:, None]
         + inv[1, 1] * v[:, None] ** 2)
    f = np.exp(-0.5 * (q - q.min()))
    f /= f.sum()
    f.setflags(write=False)
    return f


def evaluate_F(model: CenterBiasModel, dims) -> np.ndarray:
    """Prior density on a ``(width, height)`` pixel grid, summing to 1."""
    w, h = int(dims[0]), int(dims[1])
    return _density(model.mean, model.covariance, w, h)


def weighted_moments(S, F, variant: str = "printed"):
    """``(mu, sigma)`` of the bias-weighted normalisation.

    ``printed``:   mu = sum(F*S)/N,  sigma^2 = sum((F*S - mu)^2)/(N-1)
    ``residual``:  same mu,          sigma^2 = sum((F*(S - mu))^2)/(N-1)

    ``N`` is the pixel count.  Note that ``mu`` is not an F-weighted mean
    (F already sums to one); the division by ``N`` is kept as written.
    """
    S = np.asarray(S, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if S.shape != F.shape:
        raise ParameterError(f"map shape {S.shape} != prior shape {F.shape}")
    n = S.size
    fs = F * S
    mu = fs.sum() / n
    if variant == "printed":
        dev = fs - mu
    elif variant == "residual":
        dev = F * (S - mu)
    else:
        raise ParameterError(f"unknown variant {variant!r}")
    sigma = math.sqrt(float(np.dot(dev.ravel(), dev.ravel())) / (n - 1)) if n > 1 else 0.0
    return mu, sigma


def weighted_normalize(S, F, variant: str = "printed") -> np.ndarray:
    """``(S - mu) / sigma`` with the moments of :func:`weighted_moments`."""
    mu, sigma = weighted_moments(S, F, variant)
    if not sigma > 0:
        raise DegenerateInputError("weighted standard deviation is zero")
    return (np.asarray(S, dtype=np.float64) - mu) / sigma


def nss_prime(S, F, gaze, radius_px: float, variant: str = "printed") -> float:
    """NSS with the bias-weighted normalisation.

    The map is first rescaled to [0, 1]: the weighted normalisation is only
    scale-equivariant, so without this step adding a constant to ``S`` would
    change the score.
    """
    from .metrics import gather_gaze_values

    Sn = minmax_normalize(S)
    Sp = weighted_normalize(Sn, F, variant)
    return float(np.mean(gather_gaze_values(Sp, gaze, radius_px)))
