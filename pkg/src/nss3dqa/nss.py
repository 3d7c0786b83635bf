"""Statistical summaries of feature domains and feature-vector assembly.

Each feature domain is reduced to 11 scalars: mean, standard deviation,
histogram entropy, GGD (shape, variance) fitted on the raw values, AGGD
(eta, shape, left/right scale) and Gamma (shape, rate) fitted on the
normalized values.  A colored point cloud yields 8 domains x 11 = 88
features, a colored mesh 7 x 11 = 77.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .color_features import rgb_to_lab
from .errors import DegenerateDistributionError
from .mesh_features import project_mesh_geometry
from .model_io import ColoredMesh, ColoredPointCloud, Model
from .pc_features import project_pc_geometry

NORMALIZATION_C = 1e-6
DEFAULT_BINS = 256
MIN_FIT_SAMPLES = 16

PC_DOMAINS = ("Cur", "Ani", "Lin", "Pla", "Sph", "L", "A", "B")
MESH_DOMAINS = ("Cur", "Dih", "Far", "Fan", "L", "A", "B")
PC_FEATURE_COUNT = len(PC_DOMAINS) * 11
MESH_FEATURE_COUNT = len(MESH_DOMAINS) * 11

# Shape grid shared by the GGD and AGGD moment-ratio inversions.
_GRID_ALPHA = None
_GRID_RHO = None


def _shape_grid():
    global _GRID_ALPHA, _GRID_RHO
    if _GRID_ALPHA is None:
        alpha = np.arange(0.2, 10.0 + 1e-9, 0.001)
        rho = np.exp(2.0 * gammaln(2.0 / alpha)
                     - gammaln(1.0 / alpha) - gammaln(3.0 / alpha))
        _GRID_ALPHA, _GRID_RHO = alpha, rho
    return _GRID_ALPHA, _GRID_RHO


def _invert_shape(rho_hat):
    """Nearest shape value on the grid for a moment ratio estimate."""
    alpha, rho = _shape_grid()
    # rho is strictly increasing in alpha.
    j = np.searchsorted(rho, rho_hat)
    if j <= 0:
        return float(alpha[0])
    if j >= len(alpha):
        return float(alpha[-1])
    if abs(rho[j] - rho_hat) < abs(rho_hat - rho[j - 1]):
        return float(alpha[j])
    return float(alpha[j - 1])


def _gamma_ratio_sqrt(shape):
    """sqrt(Gamma(1/shape) / Gamma(3/shape))."""
    return float(np.exp(0.5 * (gammaln(1.0 / shape) - gammaln(3.0 / shape))))


@dataclass
class GgdParams:
    alpha: float
    sigma2: float


@dataclass
class AggdParams:
    eta: float
    nu: float
    sigma_l2: float
    sigma_r2: float
    degenerate: bool = False


@dataclass
class GammaParams:
    alpha: float
    beta: float


def normalize(values):
    """Center and scale a domain: (x - mean) / (std + C), population std."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise ValueError("domain must have at least 2 values")
    return (x - x.mean()) / (x.std() + NORMALIZATION_C)


def entropy(values, bins=DEFAULT_BINS):
    """Shannon entropy in bits of the histogram over uniform bins.

    The bins span [min, max] of the values; a constant domain has
    entropy 0.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    x = np.asarray(values, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / x.size
    return float(-(p * np.log2(p)).sum())


def fit_ggd(values) -> GgdParams:
    """Moment-ratio GGD fit on mean-centered values."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples")
    x = x - x.mean()
    e_abs = np.abs(x).mean()
    e_sq = (x * x).mean()
    if e_sq < 1e-24:
        raise DegenerateDistributionError("all centered values are zero")
    alpha = _invert_shape(e_abs * e_abs / e_sq)
    return GgdParams(alpha=alpha, sigma2=float(e_sq))


def fit_aggd(values) -> AggdParams:
    """BRISQUE-style moment-matching AGGD fit on a normalized domain."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples")
    left = x[x < 0]
    right = x[x >= 0]
    e_sq = (x * x).mean()
    if e_sq < 1e-24:
        raise DegenerateDistributionError("all values are zero")
    sigma_l2 = float((left * left).mean()) if left.size else 0.0
    sigma_r2 = float((right * right).mean()) if right.size else 0.0
    degenerate = left.size == 0 or right.size == 0
    sigma_l = np.sqrt(sigma_l2)
    sigma_r = np.sqrt(sigma_r2)
    if sigma_r > 0.0:
        gamma_hat = sigma_l / sigma_r
    else:
        gamma_hat = np.inf
    r_hat = np.abs(x).mean() ** 2 / e_sq
    if np.isfinite(gamma_hat):
        big_r = r_hat * (gamma_hat ** 3 + 1.0) * (gamma_hat + 1.0) \
            / (gamma_hat ** 2 + 1.0) ** 2
    else:
        big_r = r_hat
    nu = _invert_shape(big_r)
    ratio = _gamma_ratio_sqrt(nu)
    beta_l = sigma_l * ratio
    beta_r = sigma_r * ratio
    return AggdParams(eta=float(beta_r - beta_l), nu=nu,
                      sigma_l2=sigma_l2, sigma_r2=sigma_r2,
                      degenerate=degenerate)


def fit_gamma(values) -> GammaParams:
    """Method-of-moments Gamma fit after shifting the data to positive."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} samples")
    shifted = x - x.min() + 1e-6
    mean = shifted.mean()
    var = shifted.var()
    if var < 1e-12:
        raise DegenerateDistributionError("variance too small for a Gamma fit")
    return GammaParams(alpha=float(mean * mean / var), beta=float(mean / var))


# Degeneracy flag bits within one domain summary.
FLAG_GGD = 1
FLAG_AGGD = 2
FLAG_GAMMA = 4


@dataclass
class DomainSummary:
    """The 11 statistical parameters of one feature domain."""

    mean: float
    std: float
    entropy: float
    ggd: GgdParams
    aggd: AggdParams
    gamma: GammaParams
    flags: int = 0

    def mean_std(self):
        return [self.mean, self.std]

    def ggd_values(self):
        return [self.ggd.alpha, self.ggd.sigma2]

    def aggd_values(self):
        return [self.aggd.eta, self.aggd.nu, self.aggd.sigma_l2,
                self.aggd.sigma_r2]

    def gamma_values(self):
        return [self.gamma.alpha, self.gamma.beta]


def summarize_domain(values, bins=DEFAULT_BINS) -> DomainSummary:
    """Reduce one feature domain to its 11 statistical parameters.

    Mean, std, and the GGD fit act on the raw values; entropy, the AGGD
    fit, and the Gamma fit act on the normalized values.  Degenerate or
    undersized fits yield zero parameters plus a flag bit instead of
    aborting.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise ValueError("domain must have at least 2 values")
    if not np.all(np.isfinite(x)):
        raise ValueError("domain contains non-finite values")
    hat = normalize(x)
    flags = 0
    try:
        ggd = fit_ggd(x)
    except (DegenerateDistributionError, ValueError):
        ggd = GgdParams(0.0, 0.0)
        flags |= FLAG_GGD
    try:
        aggd = fit_aggd(hat)
        if aggd.degenerate:
            flags |= FLAG_AGGD
    except (DegenerateDistributionError, ValueError):
        aggd = AggdParams(0.0, 0.0, 0.0, 0.0, degenerate=True)
        flags |= FLAG_AGGD
    try:
        gamma = fit_gamma(hat)
    except (DegenerateDistributionError, ValueError):
        gamma = GammaParams(0.0, 0.0)
        flags |= FLAG_GAMMA
    return DomainSummary(
        mean=float(x.mean()), std=float(x.std()),
        entropy=entropy(hat, bins=bins),
        ggd=ggd, aggd=aggd, gamma=gamma, flags=flags,
    )


@dataclass
class ExtractionConfig:
    """Knobs of the feature extraction pipeline."""

    knn_k: int = 10
    entropy_bins: int = DEFAULT_BINS
    curvature_radius_frac: float = 0.01
    include_self: bool = False
    radius_measure: str = "diagonal"


@dataclass
class QualityFeatureVector:
    """Assembled per-model feature vector in fixed block order."""

    values: np.ndarray
    kind: str  # "pointcloud" | "mesh"
    degenerate_mask: int = 0
    domains: tuple = field(default=())

    def __len__(self):
        return len(self.values)


def _assemble(summaries, domain_names, kind):
    values = []
    for s in summaries:
        values.extend(s.mean_std())
    for s in summaries:
        values.append(s.entropy)
    for s in summaries:
        values.extend(s.ggd_values())
    for s in summaries:
        values.extend(s.aggd_values())
    for s in summaries:
        values.extend(s.gamma_values())
    mask = 0
    for di, s in enumerate(summaries):
        mask |= s.flags << (3 * di)
    return QualityFeatureVector(values=np.asarray(values, dtype=np.float64),
                                kind=kind, degenerate_mask=mask,
                                domains=tuple(domain_names))


def assemble_features(model: Model,
                      config: ExtractionConfig | None = None
                      ) -> QualityFeatureVector:
    """Extract the full quality feature vector of one model.

    Point clouds produce 88 values over (Cur, Ani, Lin, Pla, Sph, L, A,
    B); meshes produce 77 over (Cur, Dih, Far, Fan, L, A, B).  Blocks
    are ordered mean/std, entropy, GGD, AGGD, Gamma.
    """
    cfg = config or ExtractionConfig()
    if isinstance(model, ColoredPointCloud):
        geo = project_pc_geometry(model, k=cfg.knn_k,
                                  include_self=cfg.include_self)
        lab = rgb_to_lab(model.colors)
        domains = {**geo.as_dict(), **lab.as_dict()}
        names = PC_DOMAINS
        kind = "pointcloud"
    elif isinstance(model, ColoredMesh):
        geo = project_mesh_geometry(
            model, radius_frac=cfg.curvature_radius_frac,
            radius_measure=cfg.radius_measure)
        lab = rgb_to_lab(model.vertex_colors)
        domains = {**geo.as_dict(), **lab.as_dict()}
        names = MESH_DOMAINS
        kind = "mesh"
    else:
        raise TypeError(f"cannot extract features from {type(model)}")
    summaries = [summarize_domain(domains[name], bins=cfg.entropy_bins)
                 for name in names]
    return _assemble(summaries, names, kind)


def feature_csv_header():
    return ["model_id", "kind"] + [f"f{i}" for i in range(1, PC_FEATURE_COUNT + 1)]


def write_features_csv(rows, fh):
    """Write (model_id, QualityFeatureVector) pairs as CSV.

    Mesh rows (77 features) pad the trailing point-cloud-only columns
    with empty cells.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(feature_csv_header())
    for model_id, vec in rows:
        cells = [repr(float(v)) for v in vec.values]
        cells += [""] * (PC_FEATURE_COUNT - len(cells))
        writer.writerow([model_id, vec.kind] + cells)


def features_csv_to_string(rows):
    buf = io.StringIO()
    write_features_csv(rows, buf)
    return buf.getvalue()


def read_features_csv(fh):
    """Read a feature CSV back into (model_id, QualityFeatureVector) pairs."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or header[:2] != ["model_id", "kind"]:
        raise ValueError("feature CSV missing its header row")
    out = []
    for row in reader:
        if not row:
            continue
        model_id, kind = row[0], row[1]
        cells = [c for c in row[2:] if c != ""]
        values = np.array([float(c) for c in cells])
        expected = PC_FEATURE_COUNT if kind == "pointcloud" else MESH_FEATURE_COUNT
        if len(values) != expected:
            raise ValueError(
                f"row {model_id!r}: expected {expected} features, "
                f"got {len(values)}")
        out.append((model_id, QualityFeatureVector(values=values, kind=kind)))
    return out
