"""Experiment configuration: one TOML document per experiment."""

from dataclasses import asdict, dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..bases import KINDS
from ..channel import LargeScaleParams, SystemDims

SCENARIOS = (
    "lsfc_vs_spacing",
    "lsfc_vs_M",
    "em_vs_proposed",
    "ssfc_vs_snr_order",
    "theory_mse_surface",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` lists every offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    dims: SystemDims = field(default_factory=lambda: SystemDims(M=100, K=8, T=8))
    large_scale: LargeScaleParams = field(default_factory=LargeScaleParams)
    antennas: tuple = (100,)
    spacings: tuple = (0.5,)
    angle_spreads_deg: tuple = (15.0,)
    pas_kind: str = "uniform"
    aoa_limit_deg: float = 60.0
    snr_db: tuple = (10.0,)
    modeling_orders: tuple = (100,)
    basis_kinds: tuple = ("dct2",)
    j_blocks: tuple = (1,)
    em_iters: int = 20
    theory_aoas_deg: tuple = tuple(range(-60, 61, 10))
    aoa_grid_points: int = 181
    aoa_refine_iters: int = 40
    n_trials: int = 1000
    trials_per_drop: int = 50
    seed: int = 0
    workers: int = 1

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        validate(cfg)
        return cfg

    def to_dict(self):
        return asdict(self)


_SECTIONS = {
    "dims": ("M", "K", "T", "J"),
    "large_scale": ("alpha", "sigma_s_db", "cell_radius", "min_distance"),
    "spatial": ("spacings", "angle_spreads_deg", "pas_kind", "aoa_limit_deg", "theory_aoas_deg"),
    "sweep": ("antennas", "snr_db", "modeling_orders", "basis_kinds", "j_blocks", "em_iters"),
    "run": ("n_trials", "trials_per_drop", "seed", "workers", "aoa_grid_points", "aoa_refine_iters"),
}
_TOP = ("scenario",)


def _as_tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def validate(cfg):
    problems = []
    if cfg.scenario not in SCENARIOS:
        problems.append(f"scenario: unknown scenario {cfg.scenario!r} (expected one of {', '.join(SCENARIOS)})")
    for name in ("antennas", "spacings", "angle_spreads_deg", "snr_db", "modeling_orders",
                 "basis_kinds", "j_blocks", "theory_aoas_deg"):
        if len(getattr(cfg, name)) == 0:
            problems.append(f"{name}: sweep list must be non-empty")
    if cfg.n_trials < 1:
        problems.append("n_trials: must be >= 1")
    if cfg.trials_per_drop < 1:
        problems.append("trials_per_drop: must be >= 1")
    if cfg.workers < 1:
        problems.append("workers: must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        problems.append("seed: must be a 64-bit unsigned integer")
    if cfg.em_iters < 0:
        problems.append("em_iters: must be >= 0")
    if cfg.aoa_grid_points < 16:
        problems.append("aoa_grid_points: must be >= 16")
    if cfg.aoa_refine_iters < 0:
        problems.append("aoa_refine_iters: must be >= 0")
    if cfg.pas_kind not in ("uniform", "scm_subpaths"):
        problems.append(f"pas_kind: unknown PAS kind {cfg.pas_kind!r}")
    if not 0 <= cfg.aoa_limit_deg <= 90:
        problems.append("aoa_limit_deg: must lie in [0, 90]")
    if any(s < 0 for s in cfg.spacings):
        problems.append("spacings: must be non-negative")
    if any(a < 0 for a in cfg.angle_spreads_deg):
        problems.append("angle_spreads_deg: must be non-negative")
    if any(j < 0 for j in cfg.j_blocks):
        problems.append("j_blocks: must be >= 0 (0 means known LSFCs)")
    bad_kinds = [k for k in cfg.basis_kinds if k not in KINDS]
    if bad_kinds:
        problems.append(f"basis_kinds: unknown kinds {bad_kinds}")
    for M in cfg.antennas:
        if M < cfg.dims.T:
            problems.append(f"antennas: M={M} is smaller than T={cfg.dims.T}")
        if any(not 1 <= m <= M for m in cfg.modeling_orders) and cfg.scenario in (
            "ssfc_vs_snr_order", "theory_mse_surface"
        ):
            problems.append(f"modeling_orders: every order must lie in [1, {M}]")
    if problems:
        raise ConfigError(problems)
    return cfg


def config_from_dict(doc):
    problems = []
    known = set(_TOP) | set(_SECTIONS)
    for key in doc:
        if key not in known:
            problems.append(f"{key}: unknown top-level key")
    if "scenario" not in doc:
        problems.append("scenario: required")

    flat = {}
    dims_kw, ls_kw = {}, {}
    for section, keys in _SECTIONS.items():
        body = doc.get(section, {})
        if not isinstance(body, dict):
            problems.append(f"{section}: must be a table")
            continue
        for key, value in body.items():
            if key not in keys:
                problems.append(f"{section}.{key}: unknown key")
            elif section == "dims":
                dims_kw[key] = value
            elif section == "large_scale":
                ls_kw[key] = value
            else:
                flat[key] = value
    if problems:
        raise ConfigError(problems)

    base = ExperimentConfig(scenario=doc["scenario"])
    try:
        dims = SystemDims(**{**asdict(base.dims), **dims_kw})
    except (TypeError, ValueError) as exc:
        problems.append(f"dims: {exc}")
        dims = base.dims
    try:
        ls = LargeScaleParams(**{**asdict(base.large_scale), **ls_kw})
    except (TypeError, ValueError) as exc:
        problems.append(f"large_scale: {exc}")
        ls = base.large_scale
    if problems:
        raise ConfigError(problems)

    tuple_fields = {"antennas", "spacings", "angle_spreads_deg", "snr_db", "modeling_orders",
                    "basis_kinds", "j_blocks", "theory_aoas_deg"}
    kw = {k: (_as_tuple(v) if k in tuple_fields else v) for k, v in flat.items()}
    kw.setdefault("antennas", (dims.M,))
    cfg = replace(base, dims=dims, large_scale=ls, **kw)
    return validate(cfg)


def load_config(path):
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"<file>: not valid TOML ({exc})"]) from exc
    return config_from_dict(doc)
