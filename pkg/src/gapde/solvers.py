"""Reference solvers for the four benchmark PDEs, plus noise and sampling.

KdV and Burgers are periodic and solved with a Fourier pseudospectral
discretization and fourth-order Runge-Kutta time stepping.  The wave and
Chaffee-Infante problems use the explicit finite-difference updates

    wave:  u[i,j+1] = r (u[i-1,j] + u[i+1,j]) + (2 - 2r) u[i,j] - u[i,j-1],
           r = A dt^2 / dx^2
    CI:    u[i,j+1] = (1 - 2r) u[i,j] + r (u[i-1,j] + u[i+1,j])
                      + lam (u[i,j]^3 - u[i,j]) dt,      r = dt / dx^2

Field files
-----------
``Field.save`` writes a little-endian binary file::

    8 bytes   magic b"GAPDEFLD"
    4 bytes   uint32 header length H
    H bytes   UTF-8 JSON header {"kind", "coefficients", "nx", "nt", "version"}
    8*nx      float64 x nodes
    8*nt      float64 t nodes
    8*nx*nt   float64 values, row-major with shape (nx, nt)
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DivergenceError, StructuralError

KINDS = ("kdv", "burgers", "wave", "chaffee_infante")

_MAGIC = b"GAPDEFLD"
_FIELD_VERSION = 1


@dataclass
class Field:
    """Solution values ``u[i, j] = u(x_i, t_j)`` on a tensor grid."""

    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    kind: str = ""
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.x.size, self.t.size):
            raise StructuralError(
                f"values shape {self.values.shape} does not match axes "
                f"({self.x.size}, {self.t.size})"
            )
        if np.any(np.diff(self.x) <= 0) or np.any(np.diff(self.t) <= 0):
            raise StructuralError("axes must be strictly increasing")

    @property
    def size(self) -> int:
        return self.values.size

    def points(self) -> np.ndarray:
        """All grid points as an ``(nx*nt, 3)`` array of ``(x, t, u)`` rows."""
        xx, tt = np.meshgrid(self.x, self.t, indexing="ij")
        return np.column_stack([xx.ravel(), tt.ravel(), self.values.ravel()])

    def save(self, path) -> None:
        header = json.dumps(
            {
                "version": _FIELD_VERSION,
                "kind": self.kind,
                "coefficients": self.coefficients,
                "nx": int(self.x.size),
                "nt": int(self.t.size),
            },
            sort_keys=True,
        ).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(self.x.astype("<f8").tobytes())
            fh.write(self.t.astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(self.values).astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Field":
        raw = Path(path).read_bytes()
        if raw[:8] != _MAGIC:
            raise StructuralError(f"{path}: not a field file")
        (hlen,) = struct.unpack("<I", raw[8:12])
        header = json.loads(raw[12 : 12 + hlen].decode("utf-8"))
        nx, nt = header["nx"], header["nt"]
        payload = np.frombuffer(raw[12 + hlen :], dtype="<f8")
        if payload.size != nx + nt + nx * nt:
            raise StructuralError(f"{path}: truncated payload")
        x = payload[:nx].copy()
        t = payload[nx : nx + nt].copy()
        values = payload[nx + nt :].reshape(nx, nt).copy()
        return cls(x, t, values, header["kind"], header["coefficients"])

    def to_csv(self, path) -> None:
        np.savetxt(path, self.points(), delimiter=",", header="x,t,u", comments="")


# Defaults reproduce the reference datasets: 512x201, 161x321, 256x201, 301x200.
_DEFAULTS = {
    "kdv": dict(
        coefficient=0.0025, n_x=512, x_min=-1.0, x_max=1.0, t_final=1.0,
        record_interval=0.005, inner_dt=1e-4, scheme="ifrk4",
    ),
    "burgers": dict(
        coefficient=0.1, n_x=256, x_min=-8.0, x_max=8.0, t_final=10.0,
        record_interval=0.05, inner_dt=1e-4, scheme="rk4",
    ),
    "wave": dict(
        coefficient=1.0, n_x=160, x_min=0.0, x_max=math.pi, t_final=2 * math.pi,
        n_steps=320, record_every=1,
    ),
    "chaffee_infante": dict(
        coefficient=1.0, n_x=300, x_min=0.0, x_max=3.0, t_final=0.5,
        n_steps=80000, record_every=320, t_start=0.1,
    ),
}


@dataclass
class ProblemSpec:
    """One reference problem.

    ``coefficient`` is b (KdV), a (Burgers), A (wave) or lambda
    (Chaffee-Infante).  ``n_x`` is the number of Fourier modes for the
    periodic problems and the number of intervals M for the finite-difference
    ones.  ``refine`` divides every inner time step by that factor while
    keeping the recorded grid unchanged.
    """

    kind: str
    coefficient: float | None = None
    kdv_sign: float = -1.0
    n_x: int | None = None
    x_min: float | None = None
    x_max: float | None = None
    t_final: float | None = None
    record_interval: float | None = None
    inner_dt: float | None = None
    scheme: str | None = None
    n_steps: int | None = None
    record_every: int | None = None
    t_start: float | None = None
    refine: int = 1
    seed: int = 0

    def resolved(self) -> "ProblemSpec":
        """Copy with per-kind defaults filled in."""
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown problem kind {self.kind!r}")
        values = dataclasses.asdict(self)
        for key, default in _DEFAULTS[self.kind].items():
            if values.get(key) is None:
                values[key] = default
        return ProblemSpec(**values)

    def validate(self) -> None:
        spec = self.resolved()
        if spec.refine < 1:
            raise ConfigurationError("refine must be >= 1")
        if spec.kind in ("kdv", "burgers"):
            if spec.n_x & (spec.n_x - 1):
                raise ConfigurationError("mode count must be a power of two")
            if spec.scheme not in ("rk4", "ifrk4"):
                raise ConfigurationError(f"unknown scheme {spec.scheme!r}")
        else:
            r = spec.stability_ratio()
            limit = 1.0 if spec.kind == "wave" else 0.5
            if r > limit * (1 + 1e-12):
                raise ConfigurationError(
                    f"{spec.kind}: stability ratio r={r:.6g} exceeds {limit}"
                )

    def stability_ratio(self) -> float:
        spec = self.resolved()
        dx = (spec.x_max - spec.x_min) / spec.n_x
        dt = spec.t_final / (spec.n_steps * spec.refine)
        if spec.kind == "wave":
            return spec.coefficient * dt**2 / dx**2
        if spec.kind == "chaffee_infante":
            return dt / dx**2
        raise ConfigurationError(f"{spec.kind} has no explicit stability ratio")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def solve_reference_problem(spec: ProblemSpec) -> Field:
    """Integrate the problem described by ``spec`` and return the recorded field."""
    spec.validate()
    spec = spec.resolved()
    solver = {
        "kdv": _solve_spectral,
        "burgers": _solve_spectral,
        "wave": _solve_wave,
        "chaffee_infante": _solve_chaffee_infante,
    }[spec.kind]
    x, t, values = solver(spec)
    coeffs = {"coefficient": spec.coefficient}
    if spec.kind == "kdv":
        coeffs["kdv_sign"] = spec.kdv_sign
    return Field(x, t, values, spec.kind, coeffs)


def _check_finite(u, step):
    if not np.all(np.isfinite(u)):
        raise DivergenceError(f"non-finite solution at step {step}", step=step)


def _solve_spectral(spec):
    n = spec.n_x
    length = spec.x_max - spec.x_min
    x = spec.x_min + length * np.arange(n) / n
    k = 2 * np.pi * np.fft.rfftfreq(n, d=length / n)
    ik = 1j * k
    if spec.kind == "kdv":
        u0 = np.cos(np.pi * x)
        linear = spec.kdv_sign * spec.coefficient * ik**3
    else:
        u0 = -np.sin(np.pi * x / 8)
        linear = -spec.coefficient * k**2

    n_records = int(round(spec.t_final / spec.record_interval))
    per_record = int(round(spec.record_interval / spec.inner_dt)) * spec.refine
    dt = spec.record_interval / per_record

    def nonlinear(vh):
        # -u u_x = -(u^2/2)_x
        u = np.fft.irfft(vh, n)
        return -0.5 * ik * np.fft.rfft(u * u)

    uh = np.fft.rfft(u0)
    out = np.empty((n, n_records + 1))
    out[:, 0] = u0
    step = 0
    if spec.scheme == "ifrk4":
        half = np.exp(linear * dt / 2)
        full = half * half
        for j in range(n_records):
            for _ in range(per_record):
                k1 = nonlinear(uh)
                k2 = nonlinear(half * (uh + 0.5 * dt * k1))
                k3 = nonlinear(half * uh + 0.5 * dt * k2)
                k4 = nonlinear(full * uh + dt * half * k3)
                uh = full * uh + dt / 6 * (full * k1 + 2 * half * (k2 + k3) + k4)
            step += per_record
            out[:, j + 1] = np.fft.irfft(uh, n)
            _check_finite(out[:, j + 1], step)
    else:
        def rhs(vh):
            return nonlinear(vh) + linear * vh

        for j in range(n_records):
            for _ in range(per_record):
                k1 = rhs(uh)
                k2 = rhs(uh + 0.5 * dt * k1)
                k3 = rhs(uh + 0.5 * dt * k2)
                k4 = rhs(uh + dt * k3)
                uh = uh + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            step += per_record
            out[:, j + 1] = np.fft.irfft(uh, n)
            _check_finite(out[:, j + 1], step)
    t = spec.record_interval * np.arange(n_records + 1)
    return x, t, out


def wave_initial_condition(x):
    return np.where(x < np.pi / 2, np.sin(2 * x) / 2, 0.0)


def _solve_wave(spec):
    m = spec.n_x
    n_steps = spec.n_steps * spec.refine
    x = np.linspace(spec.x_min, spec.x_max, m + 1)
    r = spec.stability_ratio()
    u_prev = wave_initial_condition(x)
    u_prev[0] = u_prev[-1] = 0.0
    # zero initial velocity: u[1] = u[0] + (r/2) * second difference
    u_curr = u_prev.copy()
    u_curr[1:-1] += 0.5 * r * (u_prev[:-2] - 2 * u_prev[1:-1] + u_prev[2:])
    every = spec.record_every * spec.refine
    records = [u_prev.copy()]
    if every == 1:
        records.append(u_curr.copy())
    for j in range(2, n_steps + 1):
        u_next = np.zeros_like(u_curr)
        u_next[1:-1] = (
            r * (u_curr[:-2] + u_curr[2:]) + (2 - 2 * r) * u_curr[1:-1] - u_prev[1:-1]
        )
        u_prev, u_curr = u_curr, u_next
        if j % every == 0:
            _check_finite(u_curr, j)
            records.append(u_curr.copy())
    t = np.linspace(0.0, spec.t_final, n_steps // every + 1)
    return x, t, np.array(records).T


def wave_discrete_energy(u_prev, u_curr, dx, dt, coefficient=1.0):
    """Conserved energy of the leapfrog wave scheme between two time levels."""
    kinetic = np.sum(((u_curr - u_prev) / dt) ** 2)
    potential = coefficient * np.sum(np.diff(u_curr) * np.diff(u_prev)) / dx**2
    return 0.5 * dx * (kinetic + potential)


def _solve_chaffee_infante(spec):
    m = spec.n_x
    n_steps = spec.n_steps * spec.refine
    dt = spec.t_final / n_steps
    lam = spec.coefficient
    x = np.linspace(spec.x_min, spec.x_max, m + 1)
    r = spec.stability_ratio()
    u = x * np.sin(x)
    u[0] = u[-1] = 0.0
    every = spec.record_every * spec.refine
    first = int(round(spec.t_start / dt))
    records, times = [], []
    for j in range(1, n_steps + 1):
        nxt = np.empty_like(u)
        nxt[1:-1] = (
            (1 - 2 * r) * u[1:-1]
            + r * (u[:-2] + u[2:])
            + lam * (u[1:-1] ** 3 - u[1:-1]) * dt
        )
        nxt[0] = nxt[-1] = 0.0
        u = nxt
        if j > first and (j - first) % every == 0:
            _check_finite(u, j)
            records.append(u.copy())
            times.append(j * dt)
    return x, np.array(times), np.array(records).T


def add_noise(field_: Field, delta: float, seed: int) -> Field:
    """Multiplicative noise ``u * (1 + delta * e)`` with ``e ~ U[-1, 1]``."""
    if delta < 0:
        raise ConfigurationError("noise level must be non-negative")
    if delta == 0:
        return Field(field_.x.copy(), field_.t.copy(), field_.values.copy(),
                     field_.kind, dict(field_.coefficients))
    rng = np.random.default_rng(seed)
    e = rng.uniform(-1.0, 1.0, size=field_.values.shape)
    return Field(field_.x.copy(), field_.t.copy(), field_.values * (1 + delta * e),
                 field_.kind, dict(field_.coefficients))


def sample_training_data(field_: Field, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` distinct grid points uniformly; rows are ``(x, t, u)``."""
    total = field_.size
    if not 1 <= n <= total:
        raise StructuralError(f"sample count {n} outside [1, {total}]")
    rng = np.random.default_rng(seed)
    idx = rng.choice(total, size=n, replace=False)
    return field_.points()[idx]
