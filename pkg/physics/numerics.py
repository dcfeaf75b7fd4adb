"""
Shared numerical kernels: adaptive 1-D quadrature, ordered-simplex cubature,
fixed-step RK4 for non-Hermitian evolution, Hermite polynomials and seeded
random streams.
"""

from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from models.schemas import QuadratureConfig
from utils.config import get_settings
from utils.errors import (
    DomainError,
    NumericalInstabilityError,
    QuadratureConvergenceError,
    UnsupportedDimensionError,
)
from utils.logging import get_logger

logger = get_logger()

# (lo, hi, count): `count` ordered variables lo <= s_1 <= ... <= s_count <= hi
Chain = Tuple[float, float, int]


def _quad_part(f: Callable[[float], float], a: float, b: float, cfg: QuadratureConfig,
               points: Optional[Sequence[float]]) -> float:
    finite = np.isfinite(a) and np.isfinite(b)
    inner = None
    if points is not None and finite:
        inner = [p for p in points if a < p < b] or None
    out = integrate.quad(
        f, a, b,
        epsabs=cfg.abs_tol,
        epsrel=cfg.rel_tol,
        limit=cfg.max_subdivisions,
        points=inner,
        full_output=1,
    )
    value, abserr = float(out[0]), float(out[1])
    if len(out) > 3:
        tolerance = max(cfg.abs_tol, cfg.rel_tol * abs(value))
        if abserr > tolerance:
            raise QuadratureConvergenceError(f"quad on [{a}, {b}]: {out[3]}", value, abserr)
        logger.debug(f"quad reported '{out[3]}' but error {abserr:.2e} is within tolerance")
    return value


def quad_real(f: Callable[[float], float], a: float, b: float,
              cfg: Optional[QuadratureConfig] = None,
              points: Optional[Sequence[float]] = None) -> float:
    """Adaptive Gauss-Kronrod integral of a real function; infinite limits allowed."""
    cfg = cfg or QuadratureConfig.from_settings()
    if a == b:
        return 0.0
    if a > b:
        return -quad_real(f, b, a, cfg, points)
    return _quad_part(f, a, b, cfg, points)


def quad_1d(f: Callable[[float], complex], a: float, b: float,
            cfg: Optional[QuadratureConfig] = None,
            points: Optional[Sequence[float]] = None) -> complex:
    """
    Integrate a complex function of one real variable.

    Real and imaginary parts are integrated separately by scipy's adaptive
    quadrature; infinite limits are mapped by its built-in substitution.

    Raises:
        QuadratureConvergenceError: tolerance not met within max_subdivisions
    """
    cfg = cfg or QuadratureConfig.from_settings()
    re = quad_real(lambda x: complex(f(x)).real, a, b, cfg, points)
    im = quad_real(lambda x: complex(f(x)).imag, a, b, cfg, points)
    return complex(re, im)


def _collapse_chain(cols: Sequence[np.ndarray], lo: float, hi: float):
    """Map unit-cube columns onto an ordered chain in [lo, hi]; returns variables and Jacobian."""
    count = len(cols)
    values = [None] * count
    jacobian = np.full(cols[0].shape, hi - lo)
    values[count - 1] = lo + (hi - lo) * cols[count - 1]
    for i in range(count - 2, -1, -1):
        span = values[i + 1] - lo
        jacobian = jacobian * span
        values[i] = lo + span * cols[i]
    return values, jacobian


def quad_chains(f: Callable[..., np.ndarray], chains: Sequence[Chain],
                cfg: Optional[QuadratureConfig] = None,
                complex_valued: bool = True) -> complex:
    """
    Integrate a vectorized f over a product of ordered chains.

    Each chain (lo, hi, k) contributes k variables with lo <= s_1 <= ... <= s_k <= hi;
    f receives all variables, chain after chain, as equally shaped arrays. The region
    is collapsed onto the unit cube and integrated with scipy's adaptive cubature.

    Raises:
        UnsupportedDimensionError: more variables than settings.simplex_max_dim
        QuadratureConvergenceError: cubature did not converge
    """
    cfg = cfg or QuadratureConfig.from_settings()
    chains = [(float(lo), float(hi), int(k)) for lo, hi, k in chains if k > 0]
    ndim = sum(k for _, _, k in chains)
    max_dim = get_settings().simplex_max_dim
    if ndim > max_dim:
        raise UnsupportedDimensionError(f"{ndim} ordered variables exceed the maximum of {max_dim}")
    if any(hi <= lo for lo, hi, _ in chains):
        return 0j if complex_valued else 0.0
    if ndim == 0:
        value = complex(np.asarray(f()).reshape(-1)[0])
        return value if complex_valued else value.real

    def integrand(x: np.ndarray) -> np.ndarray:
        variables = []
        weight = np.ones(x.shape[0])
        column = 0
        for lo, hi, k in chains:
            values, jacobian = _collapse_chain([x[:, column + i] for i in range(k)], lo, hi)
            variables.extend(values)
            weight = weight * jacobian
            column += k
        value = np.broadcast_to(np.asarray(f(*variables)), weight.shape) * weight
        if complex_valued:
            return np.stack([value.real, value.imag], axis=-1)
        return np.real(value)

    rule = "genz-malik" if ndim >= 3 else "gk21"
    result = integrate.cubature(
        integrand,
        np.zeros(ndim),
        np.ones(ndim),
        rule=rule,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_subdivisions=cfg.max_subdivisions,
    )
    estimate = np.asarray(result.estimate)
    value = complex(estimate[0], estimate[1]) if complex_valued else float(estimate)
    if result.status != "converged":
        error = float(np.max(np.abs(result.error)))
        raise QuadratureConvergenceError(f"cubature over {ndim} ordered variables", value, error)
    return value


def quad_simplex(f: Callable[..., np.ndarray], n: int, window: Tuple[float, float],
                 cfg: Optional[QuadratureConfig] = None,
                 complex_valued: bool = True) -> complex:
    """
    Integrate f(t_1, ..., t_n) over window[0] <= t_1 <= ... <= t_n <= window[1].

    f must accept numpy arrays (one per variable) and return an array of the same shape.
    For symmetric f the result is the full-box integral divided by n!.
    """
    if n < 1:
        raise DomainError(f"simplex dimension must be positive, got {n}")
    return quad_chains(f, [(window[0], window[1], n)], cfg, complex_valued)


def hermite_poly(n: int, x):
    """Physicists' Hermite polynomial H_n(x), n <= 10."""
    if not 0 <= n <= 10:
        raise DomainError(f"Hermite order {n} outside 0..10")
    return special.eval_hermite(n, x)


Generator = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(generator: Generator, t: float, psi: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step of d psi/dt = -i H_eff(t) psi, where generator(t, psi) = H_eff(t) psi."""
    k1 = -1j * generator(t, psi)
    k2 = -1j * generator(t + 0.5 * h, psi + 0.5 * h * k1)
    k3 = -1j * generator(t + 0.5 * h, psi + 0.5 * h * k2)
    k4 = -1j * generator(t + h, psi + h * k3)
    return psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve_nonunitary(state: np.ndarray, generator: Generator, t0: float, t1: float, dt: float) -> np.ndarray:
    """
    Propagate state from t0 to t1 with fixed-step RK4.

    Args:
        state: Vector (or matrix of column vectors)
        generator: Callable (t, psi) -> H_eff(t) @ psi
        t0, t1: Start and end time
        dt: Step; must divide t1 - t0

    Raises:
        DomainError: dt does not divide the interval
        NumericalInstabilityError: NaN or overflow in the state
    """
    span = t1 - t0
    if dt <= 0:
        raise DomainError(f"step must be positive, got {dt}")
    n_steps = int(round(span / dt))
    if n_steps < 0 or abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise DomainError(f"dt={dt} does not divide the interval [{t0}, {t1}]")

    psi = np.array(state, dtype=complex)
    for step in range(n_steps):
        psi = rk4_step(generator, t0 + step * dt, psi, dt)
        if not np.all(np.isfinite(psi)):
            raise NumericalInstabilityError(f"non-finite state at t={t0 + (step + 1) * dt}")
    return psi


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Deterministic PCG64 stream; distinct stream ids give independent streams."""
    if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
        raise DomainError("seed and stream_id must be unsigned 64-bit integers")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id,))
    return np.random.Generator(np.random.PCG64(sequence))
