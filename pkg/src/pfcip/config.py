"""Run configuration: a flat JSON schema with strict key checking."""

import json
from dataclasses import asdict, dataclass, field


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    lx: float = 32.0
    ly: float = 32.0
    nx: int = 64
    ny: int = 64
    eps: float = 0.025
    alpha: float = 20.0
    # exactly one of tau / tau_factor must resolve; tau wins if both set
    tau: float | None = None
    tau_factor: float | None = 0.05
    t_final: float = 1.0
    ic_preset: str = "benchmark"   # constant | benchmark | grain_growth
    ic_constant: float = 0.07
    ic_crystallites: list = field(default_factory=list)  # [[cx,cy],r,angle]
    ic_background: float = 0.285
    ic_amplitude: float = 0.446
    ic_wavenumber: float = 1.0
    ic_ramp_width: float = 1.0
    ic_projection: str = "ritz"    # ritz | interpolate
    newton_tol_rel: float = 1e-10
    newton_tol_abs: float = 1e-12
    newton_max_iter: int = 50
    quadrature_degree: int = 6
    edge_quadrature_degree: int = 5
    output_dir: str = "out"
    snapshot_every: int = 0        # 0 disables intermediate snapshots

    @property
    def h(self) -> float:
        import math
        return math.hypot(self.lx / self.nx, self.ly / self.ny)

    def resolved_tau(self) -> float:
        if self.tau is not None:
            return float(self.tau)
        if self.tau_factor is not None:
            # the mesh-size reporting convention is h = L/N, not the diagonal
            return float(self.tau_factor) * self.lx / self.nx
        raise ConfigError("neither tau nor tau_factor is set")

    def validate(self):
        if self.lx <= 0 or self.ly <= 0 or self.nx < 1 or self.ny < 1:
            raise ConfigError("invalid domain or mesh parameters")
        if self.eps >= 1:
            raise ConfigError(f"eps must be < 1, got {self.eps}")
        if self.alpha < 1:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")
        if self.t_final <= 0:
            raise ConfigError(f"t_final must be positive, got {self.t_final}")
        if self.resolved_tau() <= 0:
            raise ConfigError("time step must resolve to a positive value")
        if self.ic_preset not in ("constant", "benchmark", "grain_growth"):
            raise ConfigError(f"unknown ic_preset {self.ic_preset!r}")
        if self.ic_projection not in ("ritz", "interpolate"):
            raise ConfigError(f"unknown ic_projection {self.ic_projection!r}")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as f:
            return cls.from_json(f.read())


def benchmark_preset(**overrides) -> RunConfig:
    cfg = RunConfig(lx=32.0, ly=32.0, nx=64, ny=64, eps=0.025, alpha=20.0,
                    tau_factor=0.05, t_final=1.0, ic_preset="benchmark")
    for k, v in overrides.items():
        if k not in cfg.__dataclass_fields__:
            raise ConfigError(f"unknown config key {k!r}")
        setattr(cfg, k, v)
    return cfg.validate()


def grain_growth_preset(**overrides) -> RunConfig:
    cfg = RunConfig(lx=201.0, ly=201.0, nx=402, ny=402, eps=0.25, alpha=20.0,
                    tau=1.0, tau_factor=None, t_final=500.0,
                    ic_preset="grain_growth", ic_projection="interpolate",
                    ic_crystallites=[[[50.0, 50.0], 20.0, 0.0],
                                     [[145.0, 60.0], 20.0, 0.5],
                                     [[90.0, 145.0], 20.0, 1.0]])
    for k, v in overrides.items():
        if k not in cfg.__dataclass_fields__:
            raise ConfigError(f"unknown config key {k!r}")
        setattr(cfg, k, v)
    return cfg.validate()
