"""
Precursor transport in a cylindrical cross-flow ALD reactor.

Reduced model: 1-D plug flow along the reactor axis, quasi-steady gas-phase
density, irreversible first-order Langmuir chemisorption on the wall.

    dTheta/dt = a * c * (1 - Theta)
    u dc/dx   = -b * c * (1 - Theta)

In the co-moving time tau = t - x/u the system has the Bohart-Adams closed
form

    Theta = (e^A - 1) / (e^A + e^B - 1),     c/c0 = e^A / (e^A + e^B - 1)

with A = a*c0*tau and B = b*x/u.  ``profile_numeric`` integrates the same
system by method of lines and serves as an independent cross-check.

Units are SI throughout (m, s, Pa, K) except molar mass (amu) and growth per
cycle (nm/cycle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

K_B = 1.380649e-23  # J/K
AMU = 1.66053906660e-27  # kg

_STABILITY_SLACK = 1e-6


class NumericalInstabilityError(RuntimeError):
    """Raised when the numerical integrator leaves the physical range."""


@dataclass(frozen=True)
class ReactorGeometry:
    length: float = 0.4
    radius: float = 0.025
    gas_velocity: float = 2.0

    def __post_init__(self):
        for name in ("length", "radius", "gas_velocity"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class ProcessConditions:
    partial_pressure: float  # Pa
    molar_mass: float  # amu
    temperature: float  # K
    sticking_probability: float
    growth_per_cycle: float  # nm/cycle
    site_density: float  # sites/m^2

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.sticking_probability > 1:
            raise ValueError("sticking_probability must be <= 1")


@dataclass(frozen=True)
class DerivedRates:
    thermal_velocity: float  # m/s
    inlet_density: float  # molecules/m^3
    adsorption_rate: float  # m^3/s per site
    depletion_rate: float  # 1/s
    gas_velocity: float  # m/s

    @property
    def exposure_rate(self) -> float:
        """a*c0: inverse time constant of inlet Langmuir uptake."""
        return self.adsorption_rate * self.inlet_density

    @property
    def depletion_per_length(self) -> float:
        """b/u: inverse decay length of the density on a bare surface."""
        return self.depletion_rate / self.gas_velocity


@dataclass(frozen=True)
class CoverageProfile:
    positions: np.ndarray
    coverage: np.ndarray
    time: float


def derive_rates(cond: ProcessConditions, geom: ReactorGeometry) -> DerivedRates:
    """Kinetic-theory closure for the reduced transport model."""
    mass = cond.molar_mass * AMU
    v_th = math.sqrt(8.0 * K_B * cond.temperature / (math.pi * mass))
    c0 = cond.partial_pressure / (K_B * cond.temperature)
    beta = cond.sticking_probability
    return DerivedRates(
        thermal_velocity=v_th,
        inlet_density=c0,
        adsorption_rate=beta * v_th / (4.0 * cond.site_density),
        depletion_rate=beta * v_th / (2.0 * geom.radius),
        gas_velocity=geom.gas_velocity,
    )


def _exponents(rates: DerivedRates, x, t):
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(x < 0) or np.any(t < 0):
        raise ValueError("x and t must be non-negative")
    tau = np.maximum(0.0, t - x / rates.gas_velocity)
    return rates.exposure_rate * tau, rates.depletion_per_length * x


def _closed_form(A, B):
    # Divide through by e^max(A, B) so that neither exponential overflows.
    M = np.maximum(A, B)
    num = np.exp(A - M) * -np.expm1(-A)
    den = num + np.exp(B - M)
    return num, den


def coverage_from_exponents(A, B):
    num, den = _closed_form(np.asarray(A, float), np.asarray(B, float))
    return num / den


def density_from_exponents(A, B):
    A = np.asarray(A, float)
    num, den = _closed_form(A, np.asarray(B, float))
    # rounding in den can push the ratio a few ulp above 1
    return np.minimum(np.exp(A - np.maximum(A, B)) / den, 1.0)


def coverage_analytic(rates: DerivedRates, x, t):
    """Surface coverage at axial position ``x`` (m) and time ``t`` (s)."""
    A, B = _exponents(rates, x, t)
    out = coverage_from_exponents(A, B)
    return float(out) if out.ndim == 0 else out


def density_analytic(rates: DerivedRates, x, t):
    """Gas-phase density normalized by the inlet density."""
    A, B = _exponents(rates, x, t)
    out = density_from_exponents(A, B)
    return float(out) if out.ndim == 0 else out


def _check_positions(positions, length=None) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 1 or positions.size == 0:
        raise ValueError("positions must be a non-empty 1-D array")
    if np.any(np.diff(positions) < 0):
        raise ValueError("positions must be sorted ascending")
    if positions[0] < 0 or (length is not None and positions[-1] > length):
        raise ValueError("positions must lie within the reactor")
    return positions


def profile_analytic(rates: DerivedRates, positions, t: float, length: float | None = None) -> CoverageProfile:
    positions = _check_positions(positions, length)
    if t < 0:
        raise ValueError("t must be non-negative")
    coverage = np.atleast_1d(coverage_analytic(rates, positions, t))
    return CoverageProfile(positions=positions, coverage=coverage, time=float(t))


def saturation_exponent(B, theta_sat: float):
    """Exposure A at which coverage reaches ``theta_sat`` at depletion exponent B.

    ln[(1 + theta (e^B - 1)) / (1 - theta)], rewritten to stay finite for large B.
    """
    B = np.asarray(B, dtype=np.float64)
    out = B + np.log(theta_sat + (1.0 - theta_sat) * np.exp(-B)) - math.log1p(-theta_sat)
    return float(out) if out.ndim == 0 else out


def saturation_time(rates: DerivedRates, x_max: float, theta_sat: float = 0.99) -> float:
    """First time at which coverage at ``x_max`` (and hence upstream of it) reaches ``theta_sat``."""
    if not 0.0 < theta_sat < 1.0:
        raise ValueError("theta_sat must lie in (0, 1)")
    if x_max < 0:
        raise ValueError("x_max must be non-negative")
    B = rates.depletion_per_length * x_max
    return x_max / rates.gas_velocity + saturation_exponent(B, theta_sat) / rates.exposure_rate


@numba.njit(cache=True)
def _rhs(theta, dx, a, c0, k, out):
    # c(x) = c0 exp(-k * int_0^x (1 - theta)), trapezoidal cumulative integral
    integral = 0.0
    out[0] = a * c0 * (1.0 - theta[0])
    for i in range(1, theta.size):
        integral += 0.5 * ((1.0 - theta[i]) + (1.0 - theta[i - 1])) * dx[i - 1]
        out[i] = a * c0 * math.exp(-k * integral) * (1.0 - theta[i])


@numba.njit(cache=True)
def _rk4_step(theta, dx, a, c0, k, h, k1, k2, k3, k4, tmp):
    n = theta.size
    _rhs(theta, dx, a, c0, k, k1)
    for i in range(n):
        tmp[i] = theta[i] + 0.5 * h * k1[i]
    _rhs(tmp, dx, a, c0, k, k2)
    for i in range(n):
        tmp[i] = theta[i] + 0.5 * h * k2[i]
    _rhs(tmp, dx, a, c0, k, k3)
    for i in range(n):
        tmp[i] = theta[i] + h * k3[i]
    _rhs(tmp, dx, a, c0, k, k4)
    for i in range(n):
        theta[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


class _LineIntegrator:
    """RK4 integration of coverage on fixed nodes, in co-moving time."""

    def __init__(self, rates: DerivedRates, nodes: np.ndarray, dt_factor: float):
        self.nodes = nodes
        self.dx = np.diff(nodes)
        self.a = rates.adsorption_rate
        self.c0 = rates.inlet_density
        self.k = rates.depletion_per_length
        self.dt = dt_factor / rates.exposure_rate
        self.dt_factor = dt_factor
        self.theta = np.zeros_like(nodes)
        self.tau = 0.0
        self._work = [np.empty_like(nodes) for _ in range(5)]

    def copy(self) -> "_LineIntegrator":
        other = object.__new__(_LineIntegrator)
        other.__dict__.update(self.__dict__)
        other.theta = self.theta.copy()
        other._work = [np.empty_like(self.nodes) for _ in range(5)]
        return other

    def advance_to(self, target: float) -> None:
        while self.tau < target:
            h = min(self.dt, target - self.tau)
            _rk4_step(self.theta, self.dx, self.a, self.c0, self.k, h, *self._work)
            # land exactly on the target despite rounding in the accumulation
            self.tau = target if target - (self.tau + h) <= 1e-12 * target else self.tau + h
            lo, hi = self.theta.min(), self.theta.max()
            if not (lo >= -_STABILITY_SLACK and hi <= 1 + _STABILITY_SLACK):
                raise NumericalInstabilityError(
                    f"coverage left [0, 1] at tau={self.tau:.6g} s (min={lo:.3g}, max={hi:.3g}); "
                    f"reduce dt_factor={self.dt_factor}"
                )


def _line_nodes(rates: DerivedRates, positions: np.ndarray, grid: int) -> np.ndarray:
    x_max = positions[-1]
    if x_max == 0:
        return np.zeros(1)
    # at least `grid` cells, and no cell wider than 1/20 of the depletion length
    cells = max(grid, int(math.ceil(20.0 * rates.depletion_per_length * x_max)))
    return np.union1d(np.linspace(0.0, x_max, cells + 1), positions)


def profile_numeric(
    rates: DerivedRates,
    positions,
    t: float,
    grid: int = 400,
    dt_factor: float = 0.02,
) -> CoverageProfile:
    """Method-of-lines solution of the transport model.

    The axis [0, max(positions)] is split into at least ``grid`` uniform cells,
    refined so that each cell is under 1/20 of the bare-surface depletion
    length; requested positions are added as extra nodes.  Coverage is advanced
    in co-moving time with classical RK4, step ``dt_factor / (a c0)``, and the
    density is rebuilt from the current coverage by trapezoidal quadrature at
    every stage.  Each position is read out when the co-moving clock reaches
    ``t - x/u``.
    """
    positions = _check_positions(positions)
    if grid < 2:
        raise ValueError("grid must be >= 2")
    if not 0.0 < dt_factor <= 0.1:
        raise ValueError("dt_factor must lie in (0, 0.1]")
    if t < 0:
        raise ValueError("t must be non-negative")

    nodes = _line_nodes(rates, positions, grid)
    line = _LineIntegrator(rates, nodes, dt_factor)
    targets = np.maximum(0.0, t - positions / rates.gas_velocity)
    coverage = np.empty_like(positions)
    # increasing co-moving time means reading from the last position backwards
    for idx in np.argsort(targets, kind="stable"):
        line.advance_to(targets[idx])
        coverage[idx] = np.interp(positions[idx], nodes, line.theta)
    return CoverageProfile(positions=positions, coverage=np.clip(coverage, 0.0, 1.0), time=float(t))


def saturation_time_numeric(
    rates: DerivedRates,
    x_max: float,
    theta_sat: float = 0.99,
    grid: int = 200,
    dt_factor: float = 0.05,
    rtol: float = 1e-4,
    max_bisections: int = 200,
) -> float:
    """Saturation time from the numerical integrator, by bisection on the dose time.

    The integrator marches forward in full steps until coverage at ``x_max``
    first reaches ``theta_sat``; the crossing is then bisected inside that
    step, each trial re-integrating from the last full-step state.  A trial is
    therefore the same computation ``profile_numeric(rates, [x_max], t)`` does.
    """
    if not 0.0 < theta_sat < 1.0:
        raise ValueError("theta_sat must lie in (0, 1)")
    if x_max < 0:
        raise ValueError("x_max must be non-negative")
    positions = np.array([float(x_max)])
    line = _LineIntegrator(rates, _line_nodes(rates, positions, grid), dt_factor)
    transit = x_max / rates.gas_velocity

    while True:
        before = line.copy()
        line.advance_to(line.tau + line.dt)
        if line.theta[-1] >= theta_sat:
            break
    lo, hi = before.tau, line.tau
    for _ in range(max_bisections):
        if hi - lo < rtol * (transit + hi):
            return transit + 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        trial = before.copy()
        trial.advance_to(mid)
        if trial.theta[-1] >= theta_sat:
            hi = mid
        else:
            lo = mid
    raise RuntimeError(f"bisection did not converge after {max_bisections} steps")
