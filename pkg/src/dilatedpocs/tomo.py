"""Parallel-beam CT: forward model, reconstructors, and corruption models.

The scanner model is a flat image of n x n unit pixels centered on the
origin, viewed by parallel rays at equally spaced angles over [0, 180)
degrees. Each detector bin is one pixel wide and is represented by the
zero-width central ray of the beam; the path matrix stores exact
ray/pixel intersection lengths, so ``A @ image.ravel()`` evaluates the
line integrals of the image (a sinogram).

Reconstructors: sequential row projections (ART), per-angle simultaneous
updates (SART), ramp-filtered back-projection (FBP), and a dilated
variant that projects onto per-ray intervals widened vertically for noise
and horizontally for lateral motion instead of onto the measured values.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .engine import PocsOptions
from .linalg import SparseMatrix
from .search import BracketingError, ProbeResult, bisect_feasible

# Modified Shepp-Logan ellipses: (value, semi-axis a, semi-axis b,
# center x, center y, rotation in degrees). High-contrast variant.
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)


def default_bins(n):
    """Detector bins per angle: 1.45 per pixel of image side, rounded."""
    return int(round(1.45 * n))


@dataclass(frozen=True)
class Geometry:
    """Scan layout: image side, view count over 180 degrees, bins per view."""

    n: int
    angles: int
    bins: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("image side must be >= 1")
        if self.angles < 1:
            raise ValueError("need at least one view angle")
        if self.bins < math.ceil(self.n * math.sqrt(2.0)):
            raise ValueError(
                f"bins={self.bins} cannot cover the image diagonal "
                f"(need >= {math.ceil(self.n * math.sqrt(2.0))})")

    @classmethod
    def create(cls, n, angles, bins=None):
        return cls(n, angles, default_bins(n) if bins is None else bins)

    @property
    def rays(self):
        return self.angles * self.bins

    def theta(self, a):
        return math.pi * a / self.angles

    def to_dict(self):
        return {"n": self.n, "angles": self.angles, "bins": self.bins}


@dataclass
class Sinogram:
    """Line integrals indexed by (angle, detector bin)."""

    geometry: Geometry
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expect = (self.geometry.angles, self.geometry.bins)
        if self.values.shape != expect:
            raise ValueError(f"sinogram shape {self.values.shape} != geometry {expect}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sinogram contains non-finite values")


@dataclass
class BoxDilationSpec:
    """Sinogram interval widths: vertical for noise, horizontal in bins.

    ``adaptive`` searches for the smallest feasible noise width by
    interval halving while the lateral window stays fixed.
    """

    epsilon_noise: float = 0.0
    max_shift: int = 0
    adaptive: bool = False

    def __post_init__(self):
        if self.epsilon_noise < 0:
            raise ValueError("epsilon_noise must be >= 0")
        if self.max_shift < 0 or int(self.max_shift) != self.max_shift:
            raise ValueError("max_shift must be a nonnegative integer")
        self.max_shift = int(self.max_shift)


def shepp_logan(n):
    """Modified Shepp-Logan phantom on an n x n grid, clamped to [0, 1]."""
    if n < 16:
        raise ValueError("phantom needs n >= 16")
    # pixel centers on [-1, 1]^2, row 0 at the top (y = +1)
    c = (np.arange(n) + 0.5) * 2.0 / n - 1.0
    x = c[None, :]
    y = -c[:, None]
    img = np.zeros((n, n))
    for value, a, b, x0, y0, phi_deg in SHEPP_LOGAN_ELLIPSES:
        phi = math.radians(phi_deg)
        dx, dy = x - x0, y - y0
        u = dx * math.cos(phi) + dy * math.sin(phi)
        v = -dx * math.sin(phi) + dy * math.cos(phi)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += value
    return np.clip(img, 0.0, 1.0)


def _ray_segments(n, p0x, p0y, dx, dy):
    """Sorted crossing parameters of a unit-speed ray with the n x n grid."""
    h = 0.5 * n
    eps = 1e-12
    lo, hi = -np.inf, np.inf
    planes = np.arange(n + 1) - h
    crossings = [np.array([]), np.array([])]
    for axis, (p, d) in enumerate(((p0x, dx), (p0y, dy))):
        if abs(d) > eps:
            s1, s2 = (-h - p) / d, (h - p) / d
            lo = max(lo, min(s1, s2))
            hi = min(hi, max(s1, s2))
            crossings[axis] = (planes - p) / d
        elif not -h <= p <= h:
            return None
    if hi - lo <= eps:
        return None
    s = np.concatenate(([lo, hi], crossings[0], crossings[1]))
    s = np.sort(s[(s >= lo) & (s <= hi)])
    keep = np.diff(s) > eps
    return s[:-1][keep], s[1:][keep]


def build_path_matrix(geom):
    """Exact ray/pixel intersection lengths as a sparse (rays x n^2) matrix.

    Ray (a, b) has detector offset t = b - (bins - 1) / 2 along the unit
    vector u = (cos theta_a, sin theta_a) and travels perpendicular to u.
    Pixels are unit squares indexed row-major with row 0 at the top. Rays
    that miss the image square produce all-zero rows.
    """
    n = geom.n
    h = 0.5 * n
    offsets = np.arange(geom.bins) - 0.5 * (geom.bins - 1)
    ri, ci, vi = [], [], []
    for a in range(geom.angles):
        theta = geom.theta(a)
        ux, uy = math.cos(theta), math.sin(theta)
        dx, dy = -uy, ux
        for b, t in enumerate(offsets):
            seg = _ray_segments(n, t * ux, t * uy, dx, dy)
            if seg is None:
                continue
            s0, s1 = seg
            mids = 0.5 * (s0 + s1)
            px = np.clip(np.floor(t * ux + mids * dx + h), 0, n - 1).astype(np.int64)
            py = np.clip(np.floor(h - (t * uy + mids * dy)), 0, n - 1).astype(np.int64)
            ri.append(np.full(mids.size, a * geom.bins + b, dtype=np.int64))
            ci.append(py * n + px)
            vi.append(s1 - s0)
    if ri:
        i = np.concatenate(ri)
        j = np.concatenate(ci)
        v = np.concatenate(vi)
    else:
        i = j = v = np.array([])
    return SparseMatrix.from_triplets(geom.rays, n * n, i, j, v)


def forward_project(A, img, geom):
    """Sinogram of an image under the path matrix."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (geom.n, geom.n):
        raise ValueError(f"image shape {img.shape} does not match geometry n={geom.n}")
    if A.shape != (geom.rays, geom.n * geom.n):
        raise ValueError(f"matrix shape {A.shape} does not match geometry")
    return Sinogram(geom, A.matvec(img.ravel()).reshape(geom.angles, geom.bins))


def make_rng(seed):
    """The package-wide random generator: PCG64 seeded deterministically."""
    return np.random.Generator(np.random.PCG64(seed))


def split_seeds(seed, count):
    """Independent child seeds for the stages of one experiment."""
    return np.random.SeedSequence(seed).spawn(count)


def add_gaussian_noise(sino, sigma, seed):
    """I.i.d. zero-mean Gaussian noise on every sample."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    noise = make_rng(seed).normal(0.0, sigma, sino.values.shape) if sigma > 0 else 0.0
    return Sinogram(sino.geometry, sino.values + noise)


def add_uniform_noise(sino, amplitude, seed):
    """I.i.d. noise uniform on [-amplitude, amplitude]."""
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if amplitude == 0:
        return Sinogram(sino.geometry, sino.values.copy())
    noise = make_rng(seed).uniform(-amplitude, amplitude, sino.values.shape)
    return Sinogram(sino.geometry, sino.values + noise)


def apply_lateral_shift(sino, max_shift, seed):
    """Shift every view by an integer bin offset drawn from [-max_shift, max_shift].

    Values falling off the detector are lost; vacated bins are zero-filled
    (air outside the detector).
    """
    if max_shift < 0 or int(max_shift) != max_shift:
        raise ValueError("max_shift must be a nonnegative integer")
    max_shift = int(max_shift)
    shifts = make_rng(seed).integers(-max_shift, max_shift + 1, size=sino.geometry.angles)
    out = np.zeros_like(sino.values)
    bins = sino.geometry.bins
    for a, s in enumerate(shifts):
        if s >= 0:
            out[a, s:] = sino.values[a, :bins - s] if s else sino.values[a]
        else:
            out[a, :s] = sino.values[a, -s:]
    return Sinogram(sino.geometry, out)


def _check_relax(relax):
    if not 0.0 < relax < 2.0:
        raise ValueError(f"relaxation must lie in (0, 2), got {relax}")


def art(A, sino, iters=10, relax=1.0, x0=None):
    """Sequential row projections (Kaczmarz sweeps), clamped to [0, 1].

    One iteration projects onto every ray hyperplane in turn, then onto the
    [0, 1] pixel box. Empty rays are skipped.
    """
    _check_relax(relax)
    n = sino.geometry.n
    y = sino.values.ravel()
    x = np.zeros(n * n) if x0 is None else np.asarray(x0, dtype=np.float64).ravel().copy()
    indptr, indices, data = A.row_ptr, A.col_idx, A.values
    nrm2 = A.row_norms_sq()
    rows = np.flatnonzero(nrm2 > 0)
    for _ in range(iters):
        for i in rows:
            lo, hi = indptr[i], indptr[i + 1]
            idx = indices[lo:hi]
            vals = data[lo:hi]
            resid = y[i] - vals @ x[idx]
            x[idx] += (relax * resid / nrm2[i]) * vals
        np.clip(x, 0.0, 1.0, out=x)
    return x.reshape(n, n)


class _AngleBlocks:
    """Per-angle submatrices with SART row/column weight sums."""

    def __init__(self, A, geom):
        if A.shape != (geom.rays, geom.n * geom.n):
            raise ValueError(f"matrix shape {A.shape} does not match geometry")
        self.geom = geom
        self.blocks = []
        m = A.scipy
        for a in range(geom.angles):
            sub = m[a * geom.bins:(a + 1) * geom.bins]
            row_sums = np.asarray(sub.sum(axis=1)).reshape(-1)
            col_sums = np.asarray(sub.sum(axis=0)).reshape(-1)
            row_ok = row_sums > 0
            col_ok = col_sums > 0
            inv_rows = np.where(row_ok, 1.0 / np.where(row_ok, row_sums, 1.0), 0.0)
            inv_cols = np.where(col_ok, 1.0 / np.where(col_ok, col_sums, 1.0), 0.0)
            self.blocks.append((sub, inv_rows, inv_cols))


def sart(A, sino, iters=10, relax=1.0, x0=None, blocks=None):
    """Per-angle simultaneous updates with inverse-sum weighting.

    Each view's rays are projected simultaneously; residuals are averaged
    with the standard row-sum/column-sum weights. The pixel box [0, 1] is
    applied after every block update, so iterates never leave it.
    """
    _check_relax(relax)
    n = sino.geometry.n
    blocks = blocks or _AngleBlocks(A, sino.geometry)
    x = np.zeros(n * n) if x0 is None else np.asarray(x0, dtype=np.float64).ravel().copy()
    for _ in range(iters):
        for a, (sub, inv_rows, inv_cols) in enumerate(blocks.blocks):
            resid = (sino.values[a] - sub @ x) * inv_rows
            x += relax * inv_cols * (sub.T @ resid)
            np.clip(x, 0.0, 1.0, out=x)
    return x.reshape(n, n)


def _ramp_response(size):
    """DFT of the discrete ramp kernel (band-limited |f| response)."""
    kernel = np.zeros(size)
    kernel[0] = 0.25
    odd = np.arange(1, size // 2 + 1, 2)
    kernel[odd] = -1.0 / (np.pi * odd) ** 2
    kernel[-odd] = -1.0 / (np.pi * odd) ** 2
    return 2.0 * np.real(np.fft.fft(kernel))


def fbp(sino, window=None):
    """Filtered back-projection: ramp filter per view, then interpolation.

    ``window`` may be None (pure ramp), "cosine" (raised-cosine
    apodization) or "hann". Output is scaled by pi / (2 * angles) and
    clamped to [0, 1].
    """
    geom = sino.geometry
    if geom.angles < 2:
        raise ValueError("filtered back-projection needs at least 2 angles")
    n, bins = geom.n, geom.bins
    pad = max(64, 2 ** math.ceil(math.log2(2 * bins)))
    filt = _ramp_response(pad)
    freq = np.fft.fftfreq(pad)
    if window == "cosine":
        filt *= np.cos(np.pi * freq)
    elif window == "hann":
        filt *= 0.5 * (1.0 + np.cos(2.0 * np.pi * freq))
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    spectra = np.fft.fft(sino.values, n=pad, axis=1) * filt
    filtered = np.real(np.fft.ifft(spectra, axis=1))[:, :bins]

    c = np.arange(n) + 0.5 - 0.5 * n
    xg = c[None, :]
    yg = -c[:, None]
    center = 0.5 * (bins - 1)
    detector = np.arange(bins, dtype=np.float64)
    out = np.zeros((n, n))
    for a in range(geom.angles):
        theta = geom.theta(a)
        t = xg * math.cos(theta) + yg * math.sin(theta) + center
        out += np.interp(t.ravel(), detector, filtered[a], left=0.0, right=0.0).reshape(n, n)
    out *= np.pi / (2.0 * geom.angles)
    return np.clip(out, 0.0, 1.0)


def ray_interval_bounds(sino, spec):
    """Per-ray [lo, hi] target intervals for the dilated reconstruction.

    The horizontal window takes the min/max of each view over bins within
    ``max_shift`` (out-of-range bins count as zero, matching zero-filled
    shifts); the vertical noise width is then added on both sides.
    """
    v = sino.values
    if spec.max_shift > 0:
        size = 2 * spec.max_shift + 1
        wmin = minimum_filter1d(v, size=size, axis=1, mode="constant", cval=0.0)
        wmax = maximum_filter1d(v, size=size, axis=1, mode="constant", cval=0.0)
    else:
        wmin = wmax = v
    return (wmin - spec.epsilon_noise).ravel(), (wmax + spec.epsilon_noise).ravel()


@dataclass
class DilatedResult:
    """Reconstruction from interval constraints plus the search record."""

    image: np.ndarray
    epsilon_noise: float
    max_shift: int
    feasible: bool
    max_violation: float
    probes: int
    passes: int
    bracket_history: list


def _interval_violation(t, lo, hi, mask):
    v = np.maximum(lo - t, t - hi)
    return float(np.max(v[mask], initial=0.0))


def _interval_probe(A, blocks, sino, lo, hi, mask, x_start, opts, relax):
    """Drive the image into the ray intervals by clipped SART updates.

    The residual of each ray is measured to the nearest interval face
    (zero inside), so every block update is a weighted simultaneous step
    toward the dilated constraints; the [0, 1] pixel box is enforced after
    each block. Feasible when the worst interval violation drops below
    ``opts.residual_tol`` (confirmed on the final iterate, since per-block
    measurements go stale within a pass); displacement stagnation with
    violations left declares the interval set unreachable.
    """
    geom = sino.geometry
    bins = geom.bins
    lo2 = lo.reshape(geom.angles, bins)
    hi2 = hi.reshape(geom.angles, bins)
    mask2 = mask.reshape(geom.angles, bins)
    x = np.clip(np.asarray(x_start, dtype=np.float64).ravel(), 0.0, 1.0)

    def exact_violation(z):
        return _interval_violation(A.matvec(z), lo, hi, mask)

    worst = exact_violation(x)
    if worst <= opts.residual_tol:
        return True, x, worst, 0
    stagnant = 0
    for it in range(1, opts.max_iters + 1):
        x_prev = x.copy()
        worst = 0.0
        for a, (sub, inv_rows, inv_cols) in enumerate(blocks.blocks):
            t = sub @ x
            target = np.clip(t, lo2[a], hi2[a])
            viol = np.abs(target - t)[mask2[a]]
            if viol.size:
                worst = max(worst, float(viol.max()))
            x += relax * inv_cols * (sub.T @ ((target - t) * inv_rows))
            np.clip(x, 0.0, 1.0, out=x)
        if worst <= opts.residual_tol:
            worst = exact_violation(x)
            if worst <= opts.residual_tol:
                return True, x, worst, it
        disp = float(np.linalg.norm(x - x_prev))
        if disp <= opts.step_tol * (1.0 + float(np.linalg.norm(x))):
            stagnant += 1
            if stagnant >= opts.stagnation_window:
                return False, x, worst, it
        else:
            stagnant = 0
    worst = exact_violation(x)
    return worst <= opts.residual_tol, x, worst, opts.max_iters


def dilated_reconstruct(A, sino, spec, opts=None, x0=None, relax=1.0,
                        bracket_tol=None, blocks=None):
    """Reconstruct by projecting onto per-ray intervals instead of values.

    Builds the interval bounds from ``spec``, then runs simultaneous
    clipped projections with the [0, 1] pixel box held hard. When
    ``spec.adaptive`` the vertical noise width is the smallest feasible
    one, found by interval halving with the lateral window fixed; the
    reported width always comes with a witness image that satisfies every
    interval within ``opts.residual_tol``.
    """
    _check_relax(relax)
    opts = opts or PocsOptions(max_iters=500, step_tol=1e-7, residual_tol=1e-3)
    geom = sino.geometry
    blocks = blocks or _AngleBlocks(A, geom)
    mask = np.asarray(A.scipy.sum(axis=1)).reshape(-1) > 0
    x_start = (np.zeros(geom.n * geom.n) if x0 is None
               else np.asarray(x0, dtype=np.float64).ravel())

    def bounds_at(eps_noise):
        probe_spec = BoxDilationSpec(eps_noise, spec.max_shift, False)
        return ray_interval_bounds(sino, probe_spec)

    if not spec.adaptive:
        lo, hi = bounds_at(spec.epsilon_noise)
        ok, x, worst, passes = _interval_probe(
            A, blocks, sino, lo, hi, mask, x_start, opts, relax)
        return DilatedResult(x.reshape(geom.n, geom.n), spec.epsilon_noise,
                             spec.max_shift, ok, worst, 1, passes, [])

    total_passes = 0
    total_probes = 0

    def probe(eps_noise, start):
        nonlocal total_passes, total_probes
        lo, hi = bounds_at(eps_noise)
        ok, x, _, passes = _interval_probe(A, blocks, sino, lo, hi, mask, start, opts, relax)
        total_passes += passes
        total_probes += 1
        return ProbeResult(ok, x)

    # any clamped start is feasible once the noise width covers its own
    # worst interval violation, giving a trivially feasible upper end
    x_clamped = np.clip(x_start, 0.0, 1.0)
    lo0, hi0 = bounds_at(0.0)
    t0 = A.matvec(x_clamped)
    eps_hi = _interval_violation(t0, lo0, hi0, mask) + opts.residual_tol
    p_hi = probe(eps_hi, x_clamped)
    if not p_hi.feasible:
        raise BracketingError("initial noise width estimate was not feasible")
    if bracket_tol is None:
        bracket_tol = max(1e-4 * eps_hi, 1e-12)
    eps_star, witness, history, _ = bisect_feasible(probe, 0.0, eps_hi, p_hi.x, bracket_tol)
    lo, hi = bounds_at(eps_star)
    worst = _interval_violation(A.matvec(witness), lo, hi, mask)
    return DilatedResult(witness.reshape(geom.n, geom.n), eps_star, spec.max_shift,
                         True, worst, total_probes, total_passes, history)


def image_metrics(img, reference):
    """(rmse, max abs deviation) between two equally shaped images."""
    img = np.asarray(img, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if img.shape != reference.shape:
        raise ValueError(f"shape mismatch {img.shape} vs {reference.shape}")
    d = img - reference
    return float(np.sqrt(np.mean(d * d))), float(np.max(np.abs(d)))


def sino_metrics(A, img, sino):
    """(l2, linf) residuals of the image's sinogram against a given one."""
    img = np.asarray(img, dtype=np.float64)
    if A.cols != img.size:
        raise ValueError(f"image with {img.size} pixels does not match matrix cols {A.cols}")
    r = A.matvec(img.ravel()) - sino.values.ravel()
    return float(np.linalg.norm(r)), float(np.max(np.abs(r)))
