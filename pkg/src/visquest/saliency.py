"""Saliency maps, Otsu thresholding, and salient-region scoring.

The built-in saliency provider uses a border prior: each pixel's saliency is
the Euclidean distance between its color and the mean color of the image
border ring, normalized to [0, 1]. An externally computed map (8-bit
grayscale) can be substituted through load_external_map.

The region score is sum(I(p) for p in region if I(p) >= theta) multiplied
by the fraction of region pixels at or above theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .images import ensure_image, load_grayscale
from .regions import Region

OTSU_BINS = 256


@dataclass(frozen=True)
class OtsuResult:
    theta: float
    degenerate: bool = False


@dataclass(frozen=True)
class SaliencyScore:
    region: Region
    theta: float
    s_salient: int
    s_region: int
    i_region: float


def compute_saliency(image: np.ndarray, border_width: int | None = None) -> np.ndarray:
    """Border-prior saliency: color distance to the border-ring mean.

    A constant image yields an all-zero map.
    """
    img = ensure_image(image).astype(np.float64)
    h, w = img.shape[:2]
    if border_width is None:
        border_width = max(1, min(h, w) // 32)
    bw = min(border_width, (min(h, w) + 1) // 2)

    ring = np.zeros((h, w), dtype=bool)
    ring[:bw, :] = True
    ring[-bw:, :] = True
    ring[:, :bw] = True
    ring[:, -bw:] = True
    border_mean = img[ring].mean(axis=0)

    dist = np.sqrt(((img - border_mean) ** 2).sum(axis=2))
    peak = dist.max()
    if peak == 0.0:
        return np.zeros((h, w), dtype=np.float64)
    return dist / peak


def load_external_map(path, image: np.ndarray) -> np.ndarray:
    """Load a grayscale saliency map and check it matches the image size."""
    img = ensure_image(image)
    sal = load_grayscale(path)
    if sal.shape != img.shape[:2]:
        raise InvalidInputError(
            f"saliency map shape {sal.shape} does not match image {img.shape[:2]}")
    return sal


def _validate_map(saliency: np.ndarray) -> np.ndarray:
    sal = np.asarray(saliency, dtype=np.float64)
    if sal.ndim != 2 or sal.size == 0:
        raise InvalidInputError("saliency map must be a nonempty 2-D array")
    if not np.isfinite(sal).all() or sal.min() < 0.0 or sal.max() > 1.0:
        raise InvalidInputError("saliency values must be finite and within [0, 1]")
    return sal


def saliency_histogram(saliency: np.ndarray) -> np.ndarray:
    """256 uniform bins over [0, 1]; the value 1.0 falls in the top bin."""
    sal = _validate_map(saliency)
    bins = np.minimum((sal.ravel() * OTSU_BINS).astype(np.int64), OTSU_BINS - 1)
    return np.bincount(bins, minlength=OTSU_BINS)


def otsu_threshold(saliency: np.ndarray) -> OtsuResult:
    """Threshold maximizing between-class variance over the 256-bin histogram.

    Comparisons use exact integer arithmetic so the winning split never
    depends on floating-point rounding; ties resolve to the lowest split.
    A map whose values all fall in one bin is degenerate and returns the
    minimum value unchanged.
    """
    sal = _validate_map(saliency)
    hist = saliency_histogram(sal).tolist()
    n = sum(hist)
    total = sum(i * h for i, h in enumerate(hist))

    best_k = None
    best_num = 0  # (cs*N - S*cw)^2 for the best split
    best_den = 1  # cw*(N - cw)
    cw = 0
    cs = 0
    for k in range(OTSU_BINS - 1):
        cw += hist[k]
        cs += k * hist[k]
        if cw == 0 or cw == n:
            continue
        num = (cs * n - total * cw) ** 2
        den = cw * (n - cw)
        # Exact fraction comparison: num/den > best_num/best_den.
        if best_k is None or num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    if best_k is None:
        return OtsuResult(theta=float(sal.min()), degenerate=True)
    return OtsuResult(theta=(best_k + 1) / OTSU_BINS, degenerate=False)


def region_saliency(region: Region, saliency: np.ndarray, theta: float) -> SaliencyScore:
    sal = _validate_map(saliency)
    h, w = sal.shape
    if region.x_br > w or region.y_br > h:
        raise InvalidInputError(f"region {region.as_tuple()} outside {w}x{h} map")
    window = sal[region.y_tl:region.y_br, region.x_tl:region.x_br]
    mask = window >= theta
    s_salient = int(mask.sum())
    s_region = region.area
    i_region = float(window[mask].sum() * (s_salient / s_region))
    return SaliencyScore(region=region, theta=theta, s_salient=s_salient,
                         s_region=s_region, i_region=i_region)


def mask_image(image: np.ndarray, saliency: np.ndarray, theta: float) -> np.ndarray:
    """Blacken pixels whose saliency falls below theta."""
    img = ensure_image(image)
    sal = _validate_map(saliency)
    if sal.shape != img.shape[:2]:
        raise InvalidInputError("saliency map does not match image dimensions")
    out = img.copy()
    out[sal < theta] = 0
    return out


def select_target(scored: list) -> Region | None:
    """Pick the unknown-flagged region with the highest saliency score.

    ``scored`` holds (Region, SaliencyScore, UnknownVerdict) triples. Ties
    break toward larger area, then lower x_tl; with a degenerate constant
    map every score collapses, so the largest unknown region wins naturally.
    Returns None when nothing is unknown.
    """
    best = None
    best_key = None
    for region, score, verdict in scored:
        if not verdict.is_unknown:
            continue
        key = (score.i_region, score.s_region, -region.x_tl)
        if best_key is None or key > best_key:
            best, best_key = region, key
    return best
