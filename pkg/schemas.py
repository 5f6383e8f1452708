"""
Pydantic Schemas for the Random Digraph Cutoff Lab
Validation models for experiment configs, acceptance settings and reports

Configs are read from TOML files, overridden by CLI flags and validated here
before any simulation starts; reports are the JSON documents the CLI writes.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigError

SEED_LIMIT = 2 ** 64


class DegreeGroup(BaseModel):
    """
    One block of identical vertices
    Accepted as an object or in the compact [count, d_minus, d_plus] form
    """
    model_config = ConfigDict(extra="forbid")

    count: int = Field(..., ge=1, description="Number of vertices in the block")
    d_minus: int = Field(..., description="In-degree of every vertex in the block")
    d_plus: int = Field(..., description="Out-degree of every vertex in the block")

    @model_validator(mode="before")
    @classmethod
    def accept_triples(cls, value: Any) -> Any:
        """Turn [count, d_minus, d_plus] into keyword form"""
        if isinstance(value, (list, tuple)):
            if len(value) != 3:
                raise ValueError("A degree group must have exactly 3 entries: [count, d_minus, d_plus]")
            count, d_minus, d_plus = value
            return {"count": count, "d_minus": d_minus, "d_plus": d_plus}
        return value

    def as_triple(self) -> list[int]:
        return [self.count, self.d_minus, self.d_plus]


class ExperimentConfig(BaseModel):
    """
    Everything a CLI run depends on
    Two runs with equal configs write byte-identical result files
    """
    model_config = ConfigDict(extra="forbid")

    # Degree sequence: at most one of the two (every command but verify needs one)
    groups: Optional[list[DegreeGroup]] = Field(None, description="Compact degree sequence")
    degree_file: Optional[Path] = Field(None, description="Degree file ('n m' then 'd_minus d_plus' lines)")

    # Randomness
    seed: int = Field(..., ge=0, lt=SEED_LIMIT, description="Root seed (mandatory)")
    n_env: int = Field(1, ge=1, description="Environments per experiment")
    resample_cap: int = Field(100, ge=1, description="Attempts allowed to draw a strongly connected environment")

    # Distance profiles
    start_policy: Literal["auto", "full", "sampled"] = "auto"
    start_sample: int = Field(50, ge=1)
    start_lowest: int = Field(10, ge=0)
    full_threshold: int = Field(2000, ge=1)
    t_max: int = Field(30, ge=1)
    target: Literal["proxy", "exact"] = "proxy"
    window_half_width: float = Field(4.0, gt=0, description="Half width of the window grid in w* units")
    emit_matrix: bool = Field(False, description="Also write the per-start t,start,tv matrix")

    # Equilibrium solver
    equilibrium_tol: float = Field(1e-12, gt=0)
    max_iters: int = Field(100_000, ge=1)

    # Sampling sizes
    mc_samples: int = Field(100_000, ge=1)
    pool_size: int = Field(100_000, ge=1000)
    pool_iterations: int = Field(50, ge=1)
    trees: int = Field(100_000, ge=1)
    tree_depth: int = Field(12, ge=0)
    node_budget: float = Field(1e8, gt=0)
    collision_k: int = Field(50, ge=1)
    hist_bin_width: float = Field(0.02, gt=0)

    # Execution only, excluded from the config hash
    out_dir: Path = Field(Path("out"), description="Output directory")
    jobs: int = Field(1, ge=1, description="Worker processes (speed only)")

    @field_validator("seed", mode="before")
    @classmethod
    def seed_must_be_integer(cls, v):
        """Reject floats and strings that merely look like seeds"""
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError("seed must be an integer")
        return v

    @model_validator(mode="after")
    def at_most_one_sequence(self) -> "ExperimentConfig":
        """Validate that the degree sequence is not given twice"""
        if self.groups is not None and self.degree_file is not None:
            raise ValueError("Give only one of 'groups' or 'degree_file'")
        if self.groups is not None and not self.groups:
            raise ValueError("'groups' must not be empty")
        return self


class AcceptanceSettings(BaseModel):
    """
    Constants of the acceptance suite
    Defaults are the full suite; tests run the same code at reduced scale
    """
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(20240917, ge=0, lt=SEED_LIMIT)

    # 1. path-sum oracle
    oracle_envs: int = 100
    oracle_max_n: int = 6
    oracle_max_m: int = 12
    oracle_max_t: int = 4
    oracle_tol: float = 1e-12

    # 2. equilibrium vs dense solve
    equilibrium_envs: int = 50
    equilibrium_max_n: int = 8
    equilibrium_max_m: int = 16
    equilibrium_tol: float = 1e-9

    # 3-5. Three-class mixture on sampled environments
    mixture_n: int = 15000
    mixture_seeds: int = 20
    required_seeds: int = 19
    bound_t_max: int = 30
    bound_slack: float = 0.05
    cutoff_width: float = Field(3.0, description="Half width of the cutoff location check in w* units")
    early_tv: float = 0.9
    late_tv: float = 0.1
    start_sample: int = 50
    start_lowest: int = 10
    window_half_width: float = 4.0
    window_tol: float = 0.15
    proxy_tol: float = 0.05
    resample_cap: int = 100

    # 6. martingale
    martingale_trees: int = 100_000
    martingale_t_max: int = 10
    se_band: float = 3.0

    # 7. population dynamics and W1
    rde_pool: int = 100_000
    rde_iterations: int = 50
    m_star_samples: int = 100_000
    w1_sizes: list[int] = Field(default_factory=lambda: [2000, 4000, 8000, 15000])
    w1_seeds: int = 5
    w1_final: float = 0.1
    rde_w1_tol: float = 0.01
    noise_factor: float = 2.0

    # 8. collisions
    collision_seeds: int = 10_000
    collision_cases: list[tuple[str, int]] = Field(default_factory=lambda: [("mixture", 50), ("regular", 10)])

    # 9. annealed CLT
    clt_t: int = 200
    clt_cs: list[float] = Field(default_factory=lambda: [-1.0, 0.0, 1.0])
    clt_tol: float = 0.02
    clt_samples: int = 100_000

    @model_validator(mode="after")
    def seeds_must_fit(self) -> "AcceptanceSettings":
        if self.required_seeds > self.mixture_seeds:
            raise ValueError("required_seeds cannot exceed mixture_seeds")
        return self


# Reports


class StatsReport(BaseModel):
    """Closed-form statistics of a degree sequence plus the window diagnostic"""
    n: int
    m: int
    sparse_ok: bool
    mu: float
    sigma2: float
    rho: float
    gamma: float
    t_star: float
    w_star: float
    delta: int
    delta_max: int
    window_lhs: float = Field(..., description="sigma^2 ln n")
    window_rhs: float = Field(..., description="(ln ln n)^2")
    window_flagged: bool
    proxy_horizon: Optional[int] = None


class EnvironmentReport(BaseModel):
    """Structural summary of one sampled environment"""
    index: int
    seed: str
    rejections: int
    strongly_connected: bool
    collision_k: int
    collisions: int
    collision_bound: float
    v_star_size: int
    v_star_fraction: float


class RunManifest(BaseModel):
    """What a command wrote, under which config"""
    command: str
    config_hash: str
    seed: int
    files: list[str] = Field(default_factory=list)
    rejections: list[int] = Field(default_factory=list)
    details: dict[str, Any] = Field(default_factory=dict)


class CriterionResult(BaseModel):
    name: str
    primary: bool = True
    passed: bool
    measured: Any = None
    threshold: Any = None
    detail: str = ""


class VerifyReport(BaseModel):
    """Outcome of the acceptance suite; passed iff every primary criterion passed"""
    seed: int
    passed: bool
    criteria: list[CriterionResult]


def load_config(path: Optional[Path], overrides: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    """
    Read a TOML config file, apply CLI overrides and validate

    Args:
        path: TOML file, or None to build the config from overrides alone
        overrides: Values that replace file values (None entries are ignored)

    Returns:
        ExperimentConfig: Validated config

    Raises:
        ConfigError: unreadable file, bad TOML or failed validation
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Invalid TOML in {path}: {exc}")

        # relative degree files are resolved against the config's directory
        if "degree_file" in data:
            degree_file = Path(data["degree_file"])
            if not degree_file.is_absolute():
                data["degree_file"] = str(Path(path).parent / degree_file)

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "config"
        raise ConfigError(f"Invalid config ({where}): {first['msg']}")
