"""Core types and parameter containers for the cat-state memory simulator.

All rates are dimensionless: time is measured in units of the inverse total
optical damping rate, so gamma_o = 1 by construction.  The optomechanical
system is an optical cavity mode coupled to a mechanical mode through a
switchable beam-splitter interaction; the input field carries an even cat
state in a single exponential-sinh temporal mode.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SystemParams",
    "DerivedRates",
    "CatParams",
    "ProtocolSchedule",
    "WeightedSample",
    "PhaseSpaceState",
    "TrajectoryResult",
    "GridAxis",
    "GridField",
    "derive_rates",
    "mechanical_rate_from_hz",
    "parse_storage_time",
]

# Relative slack used when checking closure relations between floats that are
# supposed to agree exactly up to rounding.
_REL_TOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """Dimensionless system rates.

    gamma_o is the total optical damping and must equal gamma_ext + gamma_int.
    n_th_mech is the mechanical bath occupation driving the Langevin noise;
    n_init_mech is the occupation of the initial mechanical thermal state,
    which may differ (a pre-cooled oscillator in a warm bath).
    """

    gamma_o: float
    gamma_ext: float
    gamma_int: float
    gamma_m: float
    g_eff: float
    n_th_mech: float = 0.0
    n_init_mech: float = 0.0

    def __post_init__(self):
        if self.gamma_ext < 0 or self.gamma_int < 0:
            raise ValueError("damping channel rates must be non-negative")
        if abs(self.gamma_o - (self.gamma_ext + self.gamma_int)) > _REL_TOL * max(self.gamma_o, 1.0):
            raise ValueError("gamma_o must equal gamma_ext + gamma_int")
        if not 0 <= self.gamma_m < self.gamma_o:
            raise ValueError("gamma_m must satisfy 0 <= gamma_m < gamma_o")
        if self.g_eff < 0:
            raise ValueError("g_eff must be non-negative")
        if self.n_th_mech < 0 or self.n_init_mech < 0:
            raise ValueError("thermal occupations must be non-negative")

    @classmethod
    def make(cls, gamma_ext: float, gamma_int: float = 0.0, *, gamma_m: float,
             g_eff: float, n_th_mech: float = 0.0, n_init_mech: float = 0.0) -> "SystemParams":
        """Build params with gamma_o closed from the channel rates."""
        return cls(gamma_o=gamma_ext + gamma_int, gamma_ext=gamma_ext,
                   gamma_int=gamma_int, gamma_m=gamma_m, g_eff=g_eff,
                   n_th_mech=n_th_mech, n_init_mech=n_init_mech)


@dataclass(frozen=True)
class DerivedRates:
    """Rates derived from the damping asymmetry and the coupling.

    m_rate is sqrt(gamma_minus^2 - g_eff^2) on the principal branch: it is
    real non-negative for weak coupling and purely imaginary with positive
    imaginary part in the oscillatory strong-coupling regime.  gamma_bar is
    the slow retrieval rate gamma_plus - m_rate; only its real part sets the
    pulse duration when m_rate is imaginary.
    """

    gamma_plus: float
    gamma_minus: float
    m_rate: complex
    gamma_bar: complex


def derive_rates(params: SystemParams) -> DerivedRates:
    """Combine damping rates and coupling into the mode-function rates."""
    gp = 0.5 * (params.gamma_o + params.gamma_m)
    gm = 0.5 * (params.gamma_o - params.gamma_m)
    m = np.sqrt(complex(gm * gm - params.g_eff * params.g_eff))
    # principal branch: non-negative real part, and non-negative imaginary
    # part when purely imaginary; numpy's sqrt already lands there for the
    # real inputs produced above, the assert guards against regressions
    assert m.real >= 0 and (m.real > 0 or m.imag >= 0)
    return DerivedRates(gamma_plus=gp, gamma_minus=gm, m_rate=complex(m),
                        gamma_bar=complex(gp - m))


@dataclass(frozen=True)
class CatParams:
    """Even cat state (|alpha0> + |-alpha0>)/sqrt(norm) on the input mode."""

    alpha0: complex
    norm: float

    def __post_init__(self):
        if abs(self.alpha0) == 0:
            raise ValueError("alpha0 must be nonzero")
        expected = 2.0 * (1.0 + math.exp(-2.0 * abs(self.alpha0) ** 2))
        if abs(self.norm - expected) > 1e-9:
            raise ValueError("norm inconsistent with alpha0")

    @classmethod
    def make(cls, alpha0: complex) -> "CatParams":
        a = complex(alpha0)
        return cls(alpha0=a, norm=2.0 * (1.0 + math.exp(-2.0 * abs(a) ** 2)))


@dataclass(frozen=True)
class ProtocolSchedule:
    """Write/store/read timing on a uniform integration grid.

    The write window is [-t_write, 0], storage (0, t_store), read
    [t_store, t_store + t_read].  All durations are integer multiples of dt;
    use ``make`` to snap requested durations onto the grid.
    """

    t_write: float
    t_store: float
    t_read: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt > 0.5:
            # Shannon-style guard in units of 1/gamma_o
            raise ValueError("dt must not exceed 1/(2 gamma_o)")
        if self.t_write <= 0 or self.t_read <= 0 or self.t_store < 0:
            raise ValueError("window durations must be positive (storage may be zero)")
        if self.t_read != self.t_write:
            raise ValueError("read window must mirror the write window")
        for name in ("t_write", "t_store", "t_read"):
            value = getattr(self, name)
            steps = value / self.dt
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                raise ValueError(f"{name} must be an integer multiple of dt")

    @classmethod
    def make(cls, t_write: float, t_store: float, dt: float) -> "ProtocolSchedule":
        """Snap durations to the grid; the read window mirrors the write."""
        n_w = max(1, round(t_write / dt))
        n_s = max(0, round(t_store / dt))
        return cls(t_write=n_w * dt, t_store=n_s * dt, t_read=n_w * dt, dt=dt)

    @property
    def n_write(self) -> int:
        return round(self.t_write / self.dt)

    @property
    def n_store(self) -> int:
        return round(self.t_store / self.dt)

    @property
    def n_read(self) -> int:
        return round(self.t_read / self.dt)

    @property
    def t_final(self) -> float:
        return self.t_store + self.t_read


# branch labels, in stratified sampling order
BRANCHES = ("++", "--", "+-", "-+")


@dataclass(frozen=True)
class WeightedSample:
    """One importance-sampled input: phase-space pair plus weight.

    Diagonal branches (++/--) keep alpha_in_plus = conj(alpha_in); the
    off-diagonal branches (+-/-+) carry alpha_in_plus = -conj(alpha_in) and a
    weight suppressed by the cat overlap.
    """

    alpha_in: complex
    alpha_in_plus: complex
    weight: float
    branch: str

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"unknown branch {self.branch!r}")
        if self.weight <= 0:
            raise ValueError("weight must be positive")


@dataclass
class PhaseSpaceState:
    """Doubled phase-space point (alpha, alpha+, beta, beta+).

    The plus variables are independent of the unplussed ones in general; they
    coincide with complex conjugates only on diagonal-branch trajectories.
    """

    alpha: complex
    alpha_plus: complex
    beta: complex
    beta_plus: complex

    def scaled(self, c: float) -> "PhaseSpaceState":
        return PhaseSpaceState(c * self.alpha, c * self.alpha_plus,
                               c * self.beta, c * self.beta_plus)

    def shifted(self, other: "PhaseSpaceState", c: float = 1.0) -> "PhaseSpaceState":
        return PhaseSpaceState(self.alpha + c * other.alpha,
                               self.alpha_plus + c * other.alpha_plus,
                               self.beta + c * other.beta,
                               self.beta_plus + c * other.beta_plus)


@dataclass(frozen=True)
class TrajectoryResult:
    """Projected output-mode amplitudes for one trajectory."""

    alpha_out: complex
    alpha_out_plus: complex
    weight: float
    branch: str = ""


@dataclass(frozen=True)
class GridAxis:
    """Uniform axis for gridded output fields."""

    start: float
    stop: float
    step: float
    tag: str  # semantic label, e.g. "x_quadrature", "re_alpha"

    def points(self) -> np.ndarray:
        n = round((self.stop - self.start) / self.step) + 1
        return self.start + self.step * np.arange(n)

    @property
    def size(self) -> int:
        return round((self.stop - self.start) / self.step) + 1


@dataclass
class GridField:
    """Values sampled on a 1-D or 2-D uniform grid, with diagnostics in meta."""

    axes: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(ax.size for ax in self.axes)
        if tuple(self.values.shape) != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")

    def to_csv(self, path) -> None:
        """Write rows of axis coordinates plus value; '.' decimal, ',' separator."""
        path = Path(path)
        coords = [ax.points() for ax in self.axes]
        with path.open("w", newline="", encoding="utf-8") as fh:
            if "manifest_sha256" in self.meta:
                fh.write(f"# manifest_sha256 = {self.meta['manifest_sha256']}\n")
            writer = csv.writer(fh)
            writer.writerow([ax.tag for ax in self.axes] + ["value"])
            if len(self.axes) == 1:
                for x, v in zip(coords[0], self.values):
                    writer.writerow([repr(float(x)), repr(float(v))])
            elif len(self.axes) == 2:
                for i, x in enumerate(coords[0]):
                    for j, y in enumerate(coords[1]):
                        writer.writerow([repr(float(x)), repr(float(y)),
                                         repr(float(self.values[i, j]))])
            else:
                raise ValueError("only 1-D and 2-D fields are serialised")

    def to_json(self, path) -> None:
        payload = {
            "axes": [dataclasses.asdict(ax) for ax in self.axes],
            "values": np.asarray(self.values, dtype=float).ravel().tolist(),
            "meta": {k: v for k, v in self.meta.items()},
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "GridField":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        axes = tuple(GridAxis(**ax) for ax in payload["axes"])
        shape = tuple(ax.size for ax in axes)
        values = np.array(payload["values"], dtype=float).reshape(shape)
        return cls(axes=axes, values=values, meta=payload.get("meta", {}))


def mechanical_rate_from_hz(gamma_m_hz: float, gamma_o_hz: float) -> float:
    """Nondimensionalise a mechanical linewidth against the optical one."""
    if gamma_o_hz <= 0:
        raise ValueError("optical rate must be positive")
    return gamma_m_hz / gamma_o_hz


def parse_storage_time(text: str, gamma_m: float) -> float:
    """Parse a storage time given either as raw dimensionless tau or 'x/Gm'."""
    s = str(text).strip()
    for suffix in ("/Gm", "/gm", "/Gamma_m", "/gamma_m"):
        if s.endswith(suffix):
            if gamma_m <= 0:
                raise ValueError("storage time in 1/Gamma_m units needs gamma_m > 0")
            return float(s[: -len(suffix)]) / gamma_m
    return float(s)
