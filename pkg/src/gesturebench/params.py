"""Tunable pipeline parameters and the key=value config file parser.

Defaults are the experimentally tuned operating point: combination
weights alpha=0.17 / beta=1.0, normalized mask width 100, 20 sampled
contour points, 5x12 log-polar bins, 32 distance bins, 36 orientation
bins.
"""

from dataclasses import dataclass, replace

from .errors import GestureBenchError


class ConfigError(GestureBenchError):
    """Bad config file: unknown key or unparsable value."""


@dataclass(frozen=True)
class Params:
    alpha: float = 0.17            # weight of the contour-matching cost
    beta: float = 1.0              # weight of the appearance distance
    target_width: int = 100        # normalized mask width (w_M)
    sample_points: int = 20        # contour points kept for matching (M_SC)
    sc_radial_bins: int = 5
    sc_angular_bins: int = 12
    sc_r_inner: float = 0.125      # radial range, in units of mean pairwise distance
    sc_r_outer: float = 2.0
    dt_bins: int = 32
    orient_bins: int = 36

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("weights must be non-negative with alpha + beta > 0")
        if self.target_width < 8:
            raise ValueError("target_width must be >= 8")
        if self.sample_points < 4:
            raise ValueError("sample_points must be >= 4")


# config-file key -> (Params field, parser); the whitelist of overridable keys
CONFIG_KEYS = {
    "alpha": ("alpha", float),
    "beta": ("beta", float),
    "w_m": ("target_width", int),
    "m_sc": ("sample_points", int),
    "sc_radial_bins": ("sc_radial_bins", int),
    "sc_angular_bins": ("sc_angular_bins", int),
    "dt_bins": ("dt_bins", int),
    "orient_bins": ("orient_bins", int),
}


def load_config(path, base=None):
    """Parse a key=value config file into a Params object.

    Lines starting with '#' and blank lines are ignored. Keys outside
    CONFIG_KEYS are rejected.
    """
    params = base or Params()
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            if key not in CONFIG_KEYS:
                allowed = ", ".join(sorted(CONFIG_KEYS))
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r} (allowed: {allowed})")
            field, parse = CONFIG_KEYS[key]
            try:
                overrides[field] = parse(value.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    try:
        return replace(params, **overrides)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
