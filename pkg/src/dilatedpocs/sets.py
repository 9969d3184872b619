"""Convex constraint sets with exact projections, dilation, and erosion.

Each family supports a parametric dilation: enlarging the set by a global
parameter ``eps`` scaled by the set's own ``rate``. A rate of zero marks a
hard constraint that never grows. Erosion is the parametric inverse and is
only defined while the shrunken parameter stays valid.

Slab-like families measure membership in residual units (``|r.x - y|``),
not Euclidean distance; Euclidean behaviour is recovered by setting
``rate = ||r||`` on each set (see ``normalize_rows`` in the solvers).
"""

from abc import ABC, abstractmethod

import numpy as np

from .linalg import as_vector


class ErosionError(ValueError):
    """Raised when erosion would shrink a set parameter below zero."""


def _check_rate(rate):
    rate = float(rate)
    if not np.isfinite(rate) or rate < 0:
        raise ValueError(f"dilation rate must be finite and >= 0, got {rate}")
    return rate


def _check_eps(eps):
    eps = float(eps)
    if not np.isfinite(eps) or eps < 0:
        raise ValueError(f"dilation parameter must be finite and >= 0, got {eps}")
    return eps


class ConvexSet(ABC):
    """A closed convex set with an exact Euclidean projection.

    ``violation(w)`` is the set's native distance measure: zero inside,
    positive outside (residual units for affine/slab, Euclidean distance
    for ball/point, largest per-coordinate excess for boxes, largest
    coefficient excess for bandlimit sets). Dilating by ``eps`` moves the
    boundary outward by ``rate * eps`` in those same units.
    """

    rate = 1.0

    @property
    @abstractmethod
    def dim(self):
        """Ambient dimension."""

    @abstractmethod
    def project(self, w):
        """Nearest point of the set to ``w`` in the Euclidean norm."""

    @abstractmethod
    def violation(self, w):
        """Native-unit distance of ``w`` to the set; 0 if ``w`` is a member."""

    @abstractmethod
    def dilate(self, eps):
        """The set enlarged by ``rate * eps``."""

    @abstractmethod
    def erode(self, eps):
        """The set shrunk by ``rate * eps``; raises ErosionError if invalid."""

    def project_dilated(self, w, eps):
        """Projection onto the set dilated by ``rate * eps``."""
        eps = _check_eps(eps)
        if eps == 0.0:
            return self.project(w)
        return self.dilate(eps).project(w)

    def violation_dilated(self, w, eps):
        return max(self.violation(w) - self.rate * _check_eps(eps), 0.0)

    def contains(self, w, eps=0.0, tol=1e-9):
        """Membership in the ``eps``-dilated set, up to slack ``tol``."""
        eps = _check_eps(eps)
        if tol < 0:
            raise ValueError("tol must be >= 0")
        return bool(self.violation(w) <= self.rate * eps + tol)

    def _check_dim(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: set has dim {self.dim}, point has shape {w.shape}")
        return w


class AffineSet(ConvexSet):
    """Hyperplane ``r . x = y`` (a linear variety)."""

    def __init__(self, r, y, rate=1.0):
        self.r = as_vector(r, "normal")
        self._nrm2 = float(np.dot(self.r, self.r))
        if self._nrm2 == 0.0:
            raise ValueError("zero normal vector")
        self.y = float(y)
        if not np.isfinite(self.y):
            raise ValueError("offset must be finite")
        self.rate = _check_rate(rate)

    @property
    def dim(self):
        return self.r.size

    def project(self, w):
        w = self._check_dim(w)
        return w - self.r * ((np.dot(self.r, w) - self.y) / self._nrm2)

    def project_dilated(self, w, eps):
        # Closed form: project onto the nearest face of the rate*eps slab,
        # or keep w if the residual already lies within the slab.
        eps = _check_eps(eps)
        w = self._check_dim(w)
        half = self.rate * eps
        t = np.dot(self.r, w) - self.y
        if t < -half:
            return w - self.r * ((t + half) / self._nrm2)
        if t > half:
            return w - self.r * ((t - half) / self._nrm2)
        return w.copy()

    def violation(self, w):
        w = self._check_dim(w)
        return abs(float(np.dot(self.r, w)) - self.y)

    def dilate(self, eps):
        return SlabSet(self.r, self.y, self.rate * _check_eps(eps), rate=self.rate)

    def erode(self, eps):
        if _check_eps(eps) == 0.0 or self.rate == 0.0:
            return self
        raise ErosionError("a hyperplane has zero width and cannot be eroded")


class SlabSet(ConvexSet):
    """All points with ``lo <= r . x <= hi`` (residual-unit bounds).

    The symmetric form ``|r . x - y| <= halfwidth`` is the constructor;
    asymmetric bounds come from :meth:`from_bounds`.
    """

    def __init__(self, r, y, halfwidth, rate=1.0):
        halfwidth = float(halfwidth)
        if not np.isfinite(halfwidth) or halfwidth < 0:
            raise ValueError(f"halfwidth must be finite and >= 0, got {halfwidth}")
        y = float(y)
        self._init_bounds(r, y - halfwidth, y + halfwidth, rate)

    @classmethod
    def from_bounds(cls, r, lo, hi, rate=1.0):
        s = cls.__new__(cls)
        s._init_bounds(r, float(lo), float(hi), rate)
        return s

    def _init_bounds(self, r, lo, hi, rate):
        self.r = as_vector(r, "normal")
        self._nrm2 = float(np.dot(self.r, self.r))
        if self._nrm2 == 0.0:
            raise ValueError("zero normal vector")
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("slab bounds must be finite")
        if lo > hi:
            raise ValueError(f"empty slab: lo={lo} > hi={hi}")
        self.lo = lo
        self.hi = hi
        self.rate = _check_rate(rate)

    @property
    def y(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def halfwidth(self):
        return 0.5 * (self.hi - self.lo)

    @property
    def dim(self):
        return self.r.size

    def project(self, w):
        w = self._check_dim(w)
        t = float(np.dot(self.r, w))
        if t < self.lo:
            return w + self.r * ((self.lo - t) / self._nrm2)
        if t > self.hi:
            return w + self.r * ((self.hi - t) / self._nrm2)
        return w.copy()

    def violation(self, w):
        w = self._check_dim(w)
        t = float(np.dot(self.r, w))
        return max(self.lo - t, t - self.hi, 0.0)

    def dilate(self, eps):
        grow = self.rate * _check_eps(eps)
        return SlabSet.from_bounds(self.r, self.lo - grow, self.hi + grow, rate=self.rate)

    def erode(self, eps):
        shrink = self.rate * _check_eps(eps)
        lo, hi = self.lo + shrink, self.hi - shrink
        if lo > hi:
            raise ErosionError(f"erosion by {shrink} exceeds slab width {self.hi - self.lo}")
        return SlabSet.from_bounds(self.r, lo, hi, rate=self.rate)


class BoxSet(ConvexSet):
    """Per-coordinate bounds ``lo <= x <= hi``; infinite bounds are allowed."""

    def __init__(self, lo, hi, rate=1.0):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lo and hi must be equal-length 1-D arrays")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("box bounds may not be NaN")
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")
        self.lo = lo
        self.hi = hi
        self.rate = _check_rate(rate)

    @property
    def dim(self):
        return self.lo.size

    def project(self, w):
        w = self._check_dim(w)
        return np.clip(w, self.lo, self.hi)

    def violation(self, w):
        w = self._check_dim(w)
        below = np.max(self.lo - w, initial=0.0, where=np.isfinite(self.lo))
        above = np.max(w - self.hi, initial=0.0, where=np.isfinite(self.hi))
        return float(max(below, above, 0.0))

    def dilate(self, eps):
        grow = self.rate * _check_eps(eps)
        return BoxSet(self.lo - grow, self.hi + grow, rate=self.rate)

    def erode(self, eps):
        shrink = self.rate * _check_eps(eps)
        lo, hi = self.lo + shrink, self.hi - shrink
        if np.any(lo > hi):
            raise ErosionError(f"erosion by {shrink} empties the box")
        return BoxSet(lo, hi, rate=self.rate)


class BallSet(ConvexSet):
    """Euclidean ball of given center and radius."""

    def __init__(self, center, radius, rate=1.0):
        self.center = as_vector(center, "center")
        self.radius = float(radius)
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"radius must be finite and >= 0, got {radius}")
        self.rate = _check_rate(rate)

    @property
    def dim(self):
        return self.center.size

    def project(self, w):
        w = self._check_dim(w)
        d = w - self.center
        n = float(np.linalg.norm(d))
        if n <= self.radius:
            return w.copy()
        return self.center + d * (self.radius / n)

    def violation(self, w):
        w = self._check_dim(w)
        return max(float(np.linalg.norm(w - self.center)) - self.radius, 0.0)

    def dilate(self, eps):
        return BallSet(self.center, self.radius + self.rate * _check_eps(eps), rate=self.rate)

    def erode(self, eps):
        r = self.radius - self.rate * _check_eps(eps)
        if r < 0:
            raise ErosionError(f"erosion would give negative radius {r}")
        return BallSet(self.center, r, rate=self.rate)


class PointSet(ConvexSet):
    """Degenerate single-point set."""

    def __init__(self, p, rate=1.0):
        self.p = as_vector(p, "point")
        self.rate = _check_rate(rate)

    @property
    def dim(self):
        return self.p.size

    def project(self, w):
        self._check_dim(w)
        return self.p.copy()

    def violation(self, w):
        w = self._check_dim(w)
        return float(np.linalg.norm(w - self.p))

    def dilate(self, eps):
        return BallSet(self.p, self.rate * _check_eps(eps), rate=self.rate)

    def erode(self, eps):
        if _check_eps(eps) == 0.0 or self.rate == 0.0:
            return self
        raise ErosionError("a point cannot be eroded")


class BandlimitSet(ConvexSet):
    """Signals whose out-of-band DFT magnitudes stay below a bound.

    For odd length ``n`` and bandwidth index ``b``, the set holds real
    signals with ``|X[k]| <= bound`` for all frequency indices ``|k| > b``,
    where X is the orthonormally scaled DFT (forward transform divided by
    sqrt(n)). The orthonormal scaling makes coefficient clipping an exact
    Euclidean projection (Parseval); with the conventional unscaled DFT the
    same set corresponds to a bound multiplied by sqrt(n).

    ``bound`` may be a scalar or a per-bin array of length ``n``; per-bin
    bounds must be symmetric in frequency (bound at +k equals bound at -k)
    so that projections of real signals stay real. ``bound = 0`` gives the
    ideal bandlimited subspace. Enlarging ``bandwidth`` itself also
    enlarges the set, but dilation here acts on the magnitude bound only.
    """

    def __init__(self, n, bandwidth, bound=0.0, rate=1.0):
        n = int(n)
        if n < 1 or n % 2 == 0:
            raise ValueError(f"signal length must be odd and >= 1, got {n}")
        bandwidth = int(bandwidth)
        if not 0 <= bandwidth <= (n - 1) // 2:
            raise ValueError(f"bandwidth must lie in [0, {(n - 1) // 2}], got {bandwidth}")
        self.n = n
        self.bandwidth = bandwidth
        signed = ((np.arange(n) + n // 2) % n) - n // 2
        self._out_mask = np.abs(signed) > bandwidth
        self.bound = self._validate_bound(bound)
        self.rate = _check_rate(rate)

    def _validate_bound(self, bound):
        b = np.asarray(bound, dtype=np.float64)
        if b.ndim == 0:
            if not np.isfinite(b) or b < 0:
                raise ValueError(f"bound must be finite and >= 0, got {bound}")
            return float(b)
        if b.shape != (self.n,):
            raise ValueError(f"per-bin bound must have length {self.n}, got shape {b.shape}")
        if not np.all(np.isfinite(b[self._out_mask])) or np.any(b[self._out_mask] < 0):
            raise ValueError("out-of-band bounds must be finite and >= 0")
        mirrored = b[(-np.arange(self.n)) % self.n]
        if np.any(np.abs(b[self._out_mask] - mirrored[self._out_mask]) > 1e-12):
            raise ValueError("per-bin bounds must be symmetric in frequency")
        return b.copy()

    @property
    def dim(self):
        return self.n

    def _bound_out(self):
        if np.isscalar(self.bound):
            return np.full(int(self._out_mask.sum()), self.bound)
        return self.bound[self._out_mask]

    def project(self, w):
        w = self._check_dim(w)
        if not self._out_mask.any():
            return w.copy()
        X = np.fft.fft(w) / np.sqrt(self.n)
        out = X[self._out_mask]
        mags = np.abs(out)
        b = self._bound_out()
        over = mags > b
        scale = np.ones_like(mags)
        scale[over] = b[over] / mags[over]
        X[self._out_mask] = out * scale
        return np.real(np.fft.ifft(X) * np.sqrt(self.n))

    def violation(self, w):
        w = self._check_dim(w)
        if not self._out_mask.any():
            return 0.0
        X = np.fft.fft(w) / np.sqrt(self.n)
        excess = np.abs(X[self._out_mask]) - self._bound_out()
        return max(float(excess.max()), 0.0)

    def dilate(self, eps):
        grow = self.rate * _check_eps(eps)
        return BandlimitSet(self.n, self.bandwidth, self.bound + grow, rate=self.rate)

    def erode(self, eps):
        shrink = self.rate * _check_eps(eps)
        b = self.bound - shrink
        small = b < 0 if np.isscalar(b) else np.any(b[self._out_mask] < 0)
        if small:
            raise ErosionError(f"erosion by {shrink} drives a magnitude bound below zero")
        return BandlimitSet(self.n, self.bandwidth, b, rate=self.rate)


_FAMILIES = ("affine", "slab", "box", "ball", "point", "bandlimit")


def set_to_dict(s):
    """JSON-ready description of a set, inverse of :func:`set_from_dict`."""
    if isinstance(s, AffineSet):
        d = {"type": "affine", "r": s.r.tolist(), "y": s.y}
    elif isinstance(s, SlabSet):
        # lo/hi round-trips exactly; y/halfwidth may lose an ulp
        d = {"type": "slab", "r": s.r.tolist(), "lo": s.lo, "hi": s.hi}
    elif isinstance(s, BoxSet):
        lo = [v if np.isfinite(v) else None for v in s.lo]
        hi = [v if np.isfinite(v) else None for v in s.hi]
        d = {"type": "box", "lo": lo, "hi": hi}
    elif isinstance(s, BallSet):
        d = {"type": "ball", "center": s.center.tolist(), "radius": s.radius}
    elif isinstance(s, PointSet):
        d = {"type": "point", "p": s.p.tolist()}
    elif isinstance(s, BandlimitSet):
        b = s.bound if np.isscalar(s.bound) else s.bound.tolist()
        d = {"type": "bandlimit", "n": s.n, "bandwidth": s.bandwidth, "bound": b}
    else:
        raise ValueError(f"unknown set class {type(s).__name__}")
    d["rate"] = s.rate
    return d


def _box_bound(values, fill):
    return [fill if v is None else float(v) for v in values]


def set_from_dict(d):
    """Build a set from its JSON description; unknown keys are rejected."""
    if not isinstance(d, dict) or "type" not in d:
        raise ValueError("set description must be an object with a 'type' key")
    kind = d["type"]
    if kind not in _FAMILIES:
        raise ValueError(f"unknown set type {kind!r}; expected one of {_FAMILIES}")
    allowed = {
        "affine": {"r", "y"},
        "slab": {"r", "y", "halfwidth", "lo", "hi"},
        "box": {"lo", "hi"},
        "ball": {"center", "radius"},
        "point": {"p"},
        "bandlimit": {"n", "bandwidth", "bound"},
    }[kind]
    extra = set(d) - allowed - {"type", "rate"}
    if extra:
        raise ValueError(f"unknown keys {sorted(extra)} for set type {kind!r}")
    rate = d.get("rate", 1.0)
    if kind == "affine":
        return AffineSet(d["r"], d["y"], rate=rate)
    if kind == "slab":
        if "halfwidth" in d:
            if "lo" in d or "hi" in d:
                raise ValueError("slab takes either y/halfwidth or lo/hi, not both")
            return SlabSet(d["r"], d.get("y", 0.0), d["halfwidth"], rate=rate)
        if "lo" in d and "hi" in d:
            return SlabSet.from_bounds(d["r"], d["lo"], d["hi"], rate=rate)
        raise ValueError("slab requires y/halfwidth or lo/hi")
    if kind == "box":
        return BoxSet(_box_bound(d["lo"], -np.inf), _box_bound(d["hi"], np.inf), rate=rate)
    if kind == "ball":
        return BallSet(d["center"], d["radius"], rate=rate)
    if kind == "point":
        return PointSet(d["p"], rate=rate)
    return BandlimitSet(d["n"], d["bandwidth"], np.asarray(d["bound"], dtype=np.float64)
                        if isinstance(d["bound"], list) else d["bound"], rate=rate)
