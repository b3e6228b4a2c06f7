"""Physical parameters of the driven two-mode ring resonator.

All rates and frequencies are dimensionless numbers in a common unit (the
figures of interest quote everything in units of the dissipation).  A single
``unit_scale`` converts to physical frequency for reporting only.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

EOM_CONVENTIONS = ("appendix_b", "main_text")

# Shorthand keys accepted by ``ModelParams.from_mapping`` that set both modes.
_SHARED_KEYS = {"u": ("u_a", "u_b"), "f_in": ("f_a", "f_b"), "f": ("f_a", "f_b")}


@dataclass(frozen=True)
class ModelParams:
    """Rotating-frame parameters; immutable so sweeps can share one instance."""

    delta: float = 0.0
    epsilon: float = 0.0
    u_a: float = 0.0
    u_b: float = 0.0
    v: float = 0.0
    j_re: float = 0.0
    j_im: float = 0.0
    kappa: float = 1.0
    gamma: float = 1.0
    f_a: float = 0.0
    f_b: float = 0.0
    n_th: float = 0.0
    gamma_phi: float = 0.0
    omega0: float | None = None
    omega_d: float | None = None
    eom_convention: str = "appendix_b"
    unit_scale: float = 1.0

    @property
    def j(self) -> complex:
        return complex(self.j_re, self.j_im)

    @property
    def epsilon_eff(self) -> float:
        """Mode splitting as it enters the equations of motion.

        ``main_text`` counts the splitting twice (once inside the bare mode
        frequency and once explicitly); ``appendix_b`` counts it once.
        """
        return 2.0 * self.epsilon if self.eom_convention == "main_text" else self.epsilon

    def replace(self, **changes: Any) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def with_drive(self, f_in: float) -> "ModelParams":
        return dataclasses.replace(self, f_a=f_in, f_b=f_in)

    def with_kerr(self, u: float) -> "ModelParams":
        return dataclasses.replace(self, u_a=u, u_b=u)

    def to_si(self, value: float) -> float:
        """Convert a dimensionless rate or frequency to physical units."""
        return value * self.unit_scale

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "ModelParams":
        """Build from loosely typed key/value pairs (config files, CLI overrides).

        ``u`` and ``f_in`` set both modes; per-mode keys given alongside win.
        ``delta`` is derived from ``omega0 - omega_d`` when it is absent.
        """
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, value in values.items():
            key = key.strip().lower()
            if key in _SHARED_KEYS:
                for target in _SHARED_KEYS[key]:
                    kwargs.setdefault(target, _coerce(target, value))
            elif key in known:
                kwargs[key] = _coerce(key, value)
            else:
                raise KeyError(f"unknown model parameter {key!r}")
        # explicit per-mode values override shared shorthands
        for key, value in values.items():
            key = key.strip().lower()
            if key in known:
                kwargs[key] = _coerce(key, value)
        if "delta" not in kwargs and kwargs.get("omega0") is not None and kwargs.get("omega_d") is not None:
            kwargs["delta"] = detuning_from_frequencies(kwargs["omega0"], kwargs["omega_d"])
        return cls(**kwargs)


def _coerce(key: str, value: Any) -> Any:
    if key == "eom_convention":
        return str(value).strip()
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return None
    return float(value)


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(params: ModelParams) -> ValidationResult:
    """Check the parameter invariants without raising."""
    problems = []
    for name in ("kappa", "gamma", "n_th", "gamma_phi"):
        value = getattr(params, name)
        if not value >= 0:
            problems.append(f"{name} >= 0")
    for f in dataclasses.fields(params):
        value = getattr(params, f.name)
        if isinstance(value, float) and not math.isfinite(value):
            problems.append(f"{f.name} finite")
    if params.eom_convention not in EOM_CONVENTIONS:
        problems.append(f"eom_convention in {EOM_CONVENTIONS}")
    if params.omega0 is not None and params.omega_d is not None:
        expected = detuning_from_frequencies(params.omega0, params.omega_d)
        if not math.isclose(params.delta, expected, rel_tol=1e-12, abs_tol=1e-12):
            problems.append("delta == omega0 - omega_d")
    if not params.unit_scale > 0:
        problems.append("unit_scale > 0")
    return ValidationResult(tuple(problems))


def detuning_from_frequencies(omega0: float, omega_d: float) -> float:
    return omega0 - omega_d
