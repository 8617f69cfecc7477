"""Central moments, seven rotation/scale/translation invariants, inertia axis.

Works on binarized character crops (foreground = ink). Central moments
are evaluated in an integer-scaled form: with raw integer moments
``M_pq = sum(x^p y^q)`` over foreground pixels,

    mu_pq = sum((x*M00 - M10)^p * (y*M00 - M01)^q) / M00^(p+q)

which equals the usual centroid-relative sum but keeps the per-pixel
terms translation-invariant integers, so mu is bitwise stable under
padding and exactly reproducible by an integer reference loop. Sums use
``math.fsum`` (exactly rounded, order-independent).

Pixel coordinates are taken at integer centers, x in {0..w-1}, y in
{0..h-1}, with y growing downward as in image space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MOMENT_ORDERS: tuple[tuple[int, int], ...] = (
    (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3),
)


class EmptyGlyphError(ValueError):
    """Raised when a moment computation is asked for a patch with no ink."""


def otsu_threshold(gray: np.ndarray) -> int:
    """Otsu's threshold over an 8-bit histogram; -1 if no split exists."""
    hist = np.bincount(gray.reshape(-1).astype(np.uint8), minlength=256).astype(np.float64)
    total = hist.sum()
    omega = np.cumsum(hist)
    mu = np.cumsum(hist * np.arange(256))
    mu_t = mu[-1]
    # between-class variance for thresholds t = 0..254 (class0 = values <= t)
    w0 = omega[:-1]
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return -1
    num = (mu[:-1] * total - mu_t * w0) ** 2
    den = w0 * w1
    sigma = np.where(valid, num / np.where(den == 0, 1, den), -1.0)
    return int(np.argmax(sigma))


def binarize(crop: np.ndarray) -> np.ndarray:
    """Binarize a grayscale crop; foreground (True) is the darker side.

    Constant-valued crops have no ink by convention and come back all
    background.
    """
    if crop.size == 0:
        raise ValueError("cannot binarize an empty crop")
    gray = np.asarray(crop)
    if gray.dtype != np.uint8:
        gray = np.clip(np.round(gray), 0, 255).astype(np.uint8)
    t = otsu_threshold(gray)
    if t < 0:
        return np.zeros(gray.shape, dtype=bool)
    return gray <= t


def central_moments(patch: np.ndarray) -> dict[tuple[int, int], float]:
    """Central moments mu_pq for p+q <= 3 of a binary patch.

    mu10 and mu01 are exactly 0.0 by construction. Raises EmptyGlyphError
    when the patch has no foreground pixel.
    """
    mask = np.asarray(patch, dtype=bool)
    ys, xs = np.nonzero(mask)
    m00 = int(xs.size)
    if m00 == 0:
        raise EmptyGlyphError("empty glyph: no foreground pixels")
    xs = xs.astype(np.int64)
    ys = ys.astype(np.int64)
    m10 = int(xs.sum())
    m01 = int(ys.sum())

    ux = (xs * m00 - m10).astype(np.float64)
    uy = (ys * m00 - m01).astype(np.float64)
    ux2 = ux * ux
    ux3 = ux2 * ux
    uy2 = uy * uy
    uy3 = uy2 * uy
    pow_x = {0: None, 1: ux, 2: ux2, 3: ux3}
    pow_y = {0: None, 1: uy, 2: uy2, 3: uy3}

    a = float(m00)
    denom = {0: 1.0, 1: a, 2: a * a, 3: a * a * a}

    mu: dict[tuple[int, int], float] = {(0, 0): a}
    for p, q in MOMENT_ORDERS[1:]:
        fx = pow_x[p]
        fy = pow_y[q]
        if fx is None:
            terms = fy
        elif fy is None:
            terms = fx
        else:
            terms = fx * fy
        mu[(p, q)] = math.fsum(terms.tolist()) / denom[p + q]
    return mu


def normalized_moments(mu: dict[tuple[int, int], float]) -> dict[tuple[int, int], float]:
    """eta_pq = mu_pq / mu00^gamma with gamma = (p+q+2)/2, for p+q in {2,3}."""
    mu00 = mu[(0, 0)]
    if mu00 <= 0:
        raise EmptyGlyphError("mu00 must be positive")
    eta = {}
    for (p, q), v in mu.items():
        if p + q < 2:
            continue
        gamma = (p + q + 2) / 2.0
        eta[(p, q)] = v / mu00**gamma
    return eta


def hu_moments(mu: dict[tuple[int, int], float]) -> np.ndarray:
    """The seven invariants phi1..phi7 from central moments."""
    eta = normalized_moments(mu)
    n20, n02, n11 = eta[(2, 0)], eta[(0, 2)], eta[(1, 1)]
    n30, n21, n12, n03 = eta[(3, 0)], eta[(2, 1)], eta[(1, 2)], eta[(0, 3)]

    s30 = n30 + n12
    s03 = n21 + n03
    phi1 = n20 + n02
    phi2 = (n20 - n02) ** 2 + 4.0 * n11**2
    phi3 = (n30 - 3.0 * n12) ** 2 + (3.0 * n21 - n03) ** 2
    phi4 = s30**2 + s03**2
    phi5 = (n30 - 3.0 * n12) * s30 * (s30**2 - 3.0 * s03**2) + (3.0 * n21 - n03) * s03 * (
        3.0 * s30**2 - s03**2
    )
    phi6 = (n20 - n02) * (s30**2 - s03**2) + 4.0 * n11 * s30 * s03
    phi7 = (3.0 * n21 - n03) * s30 * (s30**2 - 3.0 * s03**2) - (n30 - 3.0 * n12) * s03 * (
        3.0 * s30**2 - s03**2
    )
    return np.array([phi1, phi2, phi3, phi4, phi5, phi6, phi7], dtype=np.float64)


def is_isotropic(mu: dict[tuple[int, int], float]) -> bool:
    return mu[(2, 0)] == mu[(0, 2)] and mu[(1, 1)] == 0.0


def inertia_axis(mu: dict[tuple[int, int], float]) -> float:
    """Principal-axis angle of [[mu20, mu11], [mu11, mu02]], in [-pi/2, pi/2).

    Angle is measured in image coordinates (x right, y down). Isotropic
    patches (mu20 == mu02, mu11 == 0) return 0.0 by convention; callers
    can detect that case with is_isotropic.
    """
    if mu[(0, 0)] <= 0:
        raise EmptyGlyphError("mu00 must be positive")
    if is_isotropic(mu):
        return 0.0
    angle = 0.5 * math.atan2(2.0 * mu[(1, 1)], mu[(2, 0)] - mu[(0, 2)])
    if angle >= math.pi / 2:
        angle -= math.pi
    elif angle < -math.pi / 2:
        angle += math.pi
    return angle


@dataclass
class MomentSet:
    """Full per-glyph moment description; `empty` marks the no-ink sentinel."""

    mu: dict[tuple[int, int], float] = field(default_factory=dict)
    eta: dict[tuple[int, int], float] = field(default_factory=dict)
    hu: np.ndarray = field(default_factory=lambda: np.zeros(7))
    inertia_angle: float = 0.0
    empty: bool = False
    isotropic: bool = False


def analyze_patch(patch: np.ndarray) -> MomentSet:
    """MomentSet of a binary patch; all-zero sentinel when the patch has no ink.

    Noisy OCR boxes over whitespace are expected in real pages, so an
    empty crop degrades to the sentinel instead of raising.
    """
    mask = np.asarray(patch, dtype=bool)
    if not mask.any():
        zero = {pq: 0.0 for pq in MOMENT_ORDERS}
        return MomentSet(mu=zero, eta={}, hu=np.zeros(7), inertia_angle=0.0, empty=True, isotropic=True)
    mu = central_moments(mask)
    return MomentSet(
        mu=mu,
        eta=normalized_moments(mu),
        hu=hu_moments(mu),
        inertia_angle=inertia_axis(mu),
        empty=False,
        isotropic=is_isotropic(mu),
    )
