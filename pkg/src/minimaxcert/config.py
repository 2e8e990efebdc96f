"""Tolerances, sample counts and caps shared by all condition checks."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class CheckConfig:
    # activity / condition tolerances
    tol_act: float = 1e-8
    tol_kkt: float = 1e-8
    tol_licq: float = 1e-8
    tol_sc: float = 1e-8
    tol_pd: float = 1e-8
    tol_mfcq: float = 1e-8
    tol_newton: float = 1e-10
    # Newton / FD
    newton_max_iter: int = 30
    slack_floor: float = 1e-12  # epsilon_w for squared-slack initialization
    fd_step: float = 1e-5
    fd_hess_step: float = 1e-3
    # sampling
    seed: int = 0
    cone_samples: int = 128
    sosc_cone_samples: int = 256
    beta_grid_resolution: int = 5
    refine_rounds: int = 20
    # caps
    selector_cap: int = 16  # max |beta| for B-selector enumeration
    clarke_grid_cap: int = 4096
    vertex_enum_cap: int = 12  # n1 + |I| bound for vertex enumeration
    # condition-number warning for K(x)
    cond_warn: float = 1e12
    # oracle defaults
    oracle_delta0: float = 0.1
    oracle_step: float = 1e-3
    oracle_eta_factor: float = 2.0
    oracle_tol: float = 1e-9
    run_oracle: bool = False

    def __post_init__(self):
        for f in fields(self):
            if f.name.startswith("tol_") and getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")
        for name in ("newton_max_iter", "cone_samples", "sosc_cone_samples",
                     "beta_grid_resolution", "selector_cap", "clarke_grid_cap",
                     "vertex_enum_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def replace(self, **kw) -> "CheckConfig":
        data = self.as_dict()
        data.update(kw)
        return CheckConfig(**data)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_file(cls, path: str) -> "CheckConfig":
        """key=value lines; '#' comments; values typed per field annotation."""
        overrides = {}
        valid = {f.name: f.type for f in fields(cls)}
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                if key not in valid:
                    raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
                overrides[key] = _coerce(value, valid[key])
        return cls(**overrides)


def _coerce(text: str, annotation) -> object:
    name = str(annotation)
    if "bool" in name:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean from {text!r}")
    if "int" in name:
        return int(text)
    return float(text)
