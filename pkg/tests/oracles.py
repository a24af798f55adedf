"""Independent reference computations used to freeze expected values.

Nothing here imports the package under test. The scalar BI-AWGN density
evolution uses plain saturating arrays and an exact pairwise lookup table for
the check node (the classic discretized DE), and the GEXIT / entropy oracles
use one-dimensional Gauss-Hermite quadrature.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, roots_hermitenorm

LN2 = np.log(2.0)


class TableDE:
    """Discretized DE for a regular (dl, dr) ensemble over a binary symmetric channel."""

    def __init__(self, step: float = 25.0 / 640, llr_max: float = 25.0):
        self.step = step
        self.k = int(round(llr_max / step))
        self.x = np.arange(-self.k, self.k + 1) * step
        n = self.x.size
        t = np.tanh(self.x / 2.0)
        prod = np.clip(np.outer(t, t), -1 + 1e-16, 1 - 1e-16)
        out = 2.0 * np.arctanh(prod)
        self.table = (np.clip(np.rint(out / step), -self.k, self.k) + self.k).astype(np.int64).ravel()
        self.n = n

    def gaussian(self, mean: float) -> np.ndarray:
        edges = (np.arange(-self.k, self.k + 2) - 0.5) * self.step
        edges[0], edges[-1] = -np.inf, np.inf
        return np.diff(ndtr((edges - mean) / np.sqrt(2.0 * mean)))

    def var(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        c = np.convolve(a, b)
        k = self.k
        out = c[k : 3 * k + 1].copy()
        out[0] += c[:k].sum()
        out[-1] += c[3 * k + 1 :].sum()
        return out / out.sum()

    def chk(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        w = np.outer(a, b).ravel()
        out = np.bincount(self.table, weights=w, minlength=self.n)
        return out / out.sum()

    def error(self, a: np.ndarray) -> float:
        return float(a[: self.k].sum() + 0.5 * a[self.k])

    def run(self, sigma: float, dl: int = 3, dr: int = 6, max_iters: int = 3000, eps: float = 1e-7):
        c = self.gaussian(2.0 / sigma**2)
        a = c
        for it in range(max_iters):
            x = a
            for _ in range(dr - 2):
                x = self.chk(x, a)
            v = c
            for _ in range(dl - 1):
                v = self.var(v, x)
            a = v
            if self.error(a) < eps:
                return True, it
        return False, max_iters

    def threshold(self, lo: float, hi: float, tol: float = 2e-4, **kw) -> float:
        """Largest sigma for which DE converges (bisection)."""
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.run(mid, **kw)[0]:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def bawgn_entropy(sigma: float, n: int = 200) -> float:
    """H(X|Y) in bits of BPSK with noise std ``sigma`` per real dimension scaled so LLR ~ N(2/s2, 4/s2)."""
    z, w = roots_hermitenorm(n)
    w = w / w.sum()
    m = 2.0 / sigma**2
    llr = m + np.sqrt(2.0 * m) * z
    return float(np.dot(w, np.logaddexp(0.0, -llr)) / LN2)


def bawgn_extrinsic_entropy(sigma: float, values: np.ndarray, probs: np.ndarray, n: int = 200) -> float:
    """H(B | channel LLR, extrinsic LLR) when the extrinsic LLR has the given discrete law."""
    z, w = roots_hermitenorm(n)
    w = w / w.sum()
    m = 2.0 / sigma**2
    llr = m + np.sqrt(2.0 * m) * z
    tot = llr[:, None] + values[None, :]
    return float(w @ (np.logaddexp(0.0, -tot) / LN2) @ probs)


def bawgn_gexit(sigma: float, values: np.ndarray, probs: np.ndarray, h: float = 1e-4) -> float:
    """dH(B|Y,V)/dH(B|Y) for the scalar BI-AWGN channel, by central differences."""
    s1, s2 = sigma * (1 - h), sigma * (1 + h)
    num = bawgn_extrinsic_entropy(s2, values, probs) - bawgn_extrinsic_entropy(s1, values, probs)
    den = bawgn_entropy(s2) - bawgn_entropy(s1)
    return num / den


def bisect_bawgn_sigma(h_target: float) -> float:
    lo, hi = 0.05, 50.0
    for _ in range(100):
        mid = np.sqrt(lo * hi)
        if bawgn_entropy(mid) < h_target:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def bawgn_area_threshold(dl: int = 3, dr: int = 6, alphas=None, tde: TableDE | None = None):
    """Area threshold (sigma, alpha) of a regular ensemble over BI-AWGN.

    BP fixed points come from ``TableDE`` warm-started down a sigma sweep; the
    GEXIT value at each point uses the extrinsic law of ``dl`` check messages
    and ``bawgn_gexit``. The curve is closed with ``(1, 1)`` and the area is
    accumulated from the top with the trapezoid rule.
    """
    tde = tde or TableDE()
    if alphas is None:
        alphas = np.arange(0.98, 0.30, -0.01)
    rate = 1.0 - dl / dr

    def fixed_point(sigma, a):
        c = tde.gaussian(2.0 / sigma**2)
        a = c if a is None else a
        prev = None
        for _ in range(5000):
            x = a
            for _ in range(dr - 2):
                x = tde.chk(x, a)
            v = c
            for _ in range(dl - 1):
                v = tde.var(v, x)
            a = v
            e = tde.error(a)
            if e < 1e-9:
                return a, x, True
            if prev is not None and abs(prev - e) < 1e-11:
                break
            prev = e
        return a, x, False

    pts = [(1.0, 1.0)]
    a = None
    for al in alphas:
        sigma = bisect_bawgn_sigma(al)
        a, x, trivial = fixed_point(sigma, a)
        if trivial:
            pts.append((al, 0.0))
            break
        ext = x
        for _ in range(dl - 1):
            ext = tde.var(ext, x)
        keep = ext > 1e-15
        pts.append((al, bawgn_gexit(sigma, tde.x[keep], ext[keep] / ext[keep].sum())))
    acc = 0.0
    for (a1, g1), (a0, g0) in zip(pts[:-1], pts[1:]):
        seg = 0.5 * (g0 + g1) * (a1 - a0)
        if acc + seg >= rate:
            need = rate - acc
            slope = (g1 - g0) / (a1 - a0)
            d = need / g1 if abs(slope) < 1e-14 else (g1 - np.sqrt(g1 * g1 - 2 * slope * need)) / slope
            al = a1 - d
            return bisect_bawgn_sigma(al), al, pts
        acc += seg
    raise RuntimeError("curve area below the design rate")
