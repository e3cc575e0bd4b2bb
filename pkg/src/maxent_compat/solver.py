"""Fit ``H = sum_i c_i A_i`` so that ``exp(-H)/Tr exp(-H)`` reproduces targets.

The default optimizer is BFGS with a backtracking (Armijo) line search on
a central finite-difference gradient.  Plain gradient descent with the same
line search is available as ``optimizer="gradient-descent"``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from maxent_compat.errors import InvalidInstanceError, NumericalBreakdownError
from maxent_compat.operators import Observable, ObservableStack, gibbs_from_spectrum

log = logging.getLogger(__name__)

OPTIMIZERS = ("quasi-newton", "gradient-descent")
OBJECTIVES = ("squared", "cross-entropy")
RANGE_TOL = 1e-9
_LOG_FLOOR = 1e-300


class CompatibilityInstance:
    """Observables ``A_i`` on ``n_qubits`` and target expectations ``a_i``."""

    def __init__(self, n_qubits: int, observables: Sequence[Observable], targets):
        observables = tuple(observables)
        targets = np.asarray(targets, dtype=float).ravel()
        if not observables:
            raise InvalidInstanceError("instance needs at least one observable")
        if len(observables) != len(targets):
            raise InvalidInstanceError(f"{len(observables)} observables but {len(targets)} targets")
        if not np.all(np.isfinite(targets)):
            raise InvalidInstanceError("targets must be finite")
        for i, a in enumerate(observables):
            if a.n_qubits != n_qubits:
                raise InvalidInstanceError(f"observable {i} acts on {a.n_qubits} qubits, expected {n_qubits}")
        self.n_qubits = int(n_qubits)
        self.dim = 1 << self.n_qubits
        self.observables = observables
        self.targets = targets
        targets.setflags(write=False)
        self.stack = ObservableStack(observables)

    @property
    def m(self) -> int:
        return len(self.observables)

    def with_targets(self, targets) -> "CompatibilityInstance":
        new = object.__new__(CompatibilityInstance)
        new.__dict__.update(self.__dict__)
        t = np.array(targets, dtype=float).ravel()
        if t.shape != self.targets.shape:
            raise InvalidInstanceError("replacement targets have the wrong length")
        t.setflags(write=False)
        new.targets = t
        return new

    def out_of_range(self, tol: float = RANGE_TOL) -> list[tuple[int, float, float]]:
        """Targets outside their observable's spectrum: ``(i, lambda_min, lambda_max)``."""
        bounds = self.stack.spectral_bounds()
        bad = []
        for i, (lo, hi) in enumerate(bounds):
            if self.targets[i] < lo - tol or self.targets[i] > hi + tol:
                bad.append((i, float(lo), float(hi)))
        return bad


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-8
    max_iters: int = 2000
    fd_step: float = 1e-5
    restarts: int = 5
    optimizer: str = "quasi-newton"
    seed: int = 0
    coef_cap: float = 50.0
    objective: str = "squared"
    stall_window: int = 20
    stall_rtol: float = 1e-12
    # largest coordinate change per step; long unguarded quasi-Newton steps can
    # push a small Gibbs eigenvalue onto a plateau where the gradient vanishes
    max_step: float = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise InvalidInstanceError("epsilon must lie in (0, 1)")
        for name in ("max_iters", "fd_step", "restarts", "coef_cap", "stall_window", "max_step"):
            if getattr(self, name) <= 0:
                raise InvalidInstanceError(f"{name} must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise InvalidInstanceError(f"optimizer must be one of {OPTIMIZERS}")
        if self.objective not in OBJECTIVES:
            raise InvalidInstanceError(f"objective must be one of {OBJECTIVES}")

    def replace(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class MaxEntState:
    coefficients: np.ndarray
    rho: np.ndarray
    achieved: np.ndarray
    loss: float
    iterations: int
    converged: bool
    cap_saturated: bool = False
    restart: int = 0
    objective: str = "squared"
    loss_floor: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)
    eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def excess(self) -> float:
        """Objective value above its attainable minimum."""
        return self.loss - self.loss_floor


# -- objectives --------------------------------------------------------------


def squared_loss(targets, achieved) -> np.ndarray:
    d = np.asarray(achieved) - np.asarray(targets)
    return np.sum(d * d, axis=-1)


def cross_entropy(targets, achieved) -> np.ndarray:
    return -np.sum(np.asarray(targets) * np.log(np.maximum(achieved, _LOG_FLOOR)), axis=-1)


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def _objective(name, targets):
    if name == "squared":
        return squared_loss, 0.0
    if np.any(targets < -1e-10) or abs(targets.sum() - 1) > 1e-9:
        raise InvalidInstanceError("cross-entropy objective needs targets forming a probability vector")
    return cross_entropy, shannon_entropy(targets)


# -- evaluation --------------------------------------------------------------


def _gibbs_batch(instance, cs):
    hs = instance.stack.combine_many(cs)
    w, v = np.linalg.eigh(hs)
    p = np.exp(-(w - w[:, :1]))
    p /= p.sum(axis=1, keepdims=True)
    rhos = (v * p[:, None, :]) @ v.conj().transpose(0, 2, 1)
    return rhos, w


def achieved_many(instance, cs) -> np.ndarray:
    rhos, _ = _gibbs_batch(instance, cs)
    return instance.stack.expectations_many(rhos)


def _check_c(instance, c):
    c = np.asarray(c, dtype=float).ravel()
    if c.shape != (instance.m,):
        raise InvalidInstanceError(f"coefficient vector has length {c.size}, expected {instance.m}")
    return c


def gibbs_for(instance, c):
    """Gibbs state ``rho'(c)`` and the spectrum of ``H(c)``."""
    c = _check_c(instance, c)
    h = instance.stack.combine(c)
    w, v = np.linalg.eigh(h)
    return gibbs_from_spectrum(w, v), w


def loss(instance, c, objective: str = "squared") -> float:
    """Objective value at ``c`` (squared loss by default)."""
    c = _check_c(instance, c)
    fn, _ = _objective(objective, instance.targets)
    return float(fn(instance.targets, achieved_many(instance, c[None])[0]))


def gradient_fd(instance, c, h: float = 1e-5, objective: str = "squared") -> np.ndarray:
    """Central finite-difference gradient of the objective."""
    c = _check_c(instance, c)
    fn, _ = _objective(objective, instance.targets)
    return _fd_grad(lambda cs: fn(instance.targets, achieved_many(instance, cs)), c, h)


def _fd_grad(fbatch, c, h):
    m = len(c)
    e = np.eye(m) * h
    vals = fbatch(np.concatenate([c + e, c - e]))
    return (vals[:m] - vals[m:]) / (2 * h)


# -- optimizer ---------------------------------------------------------------


class _Run:
    """One optimizer trajectory from a given start."""

    def __init__(self, instance, config, fn, floor):
        self.instance = instance
        self.config = config
        self.fn = fn
        self.floor = floor
        self.targets = instance.targets

    def f_many(self, cs):
        vals = self.fn(self.targets, achieved_many(self.instance, cs))
        return vals

    def f(self, c):
        v = float(self.f_many(c[None])[0])
        if not np.isfinite(v):
            raise NumericalBreakdownError(f"objective is {v} at iterate c={np.array2string(c, precision=6)}")
        return v

    def grad(self, c):
        g = _fd_grad(self.f_many, c, self.config.fd_step)
        if not np.all(np.isfinite(g)):
            raise NumericalBreakdownError(f"gradient is not finite at iterate c={np.array2string(c, precision=6)}")
        return g

    def line_search(self, c, f, g, d):
        cap = self.config.coef_cap
        big = float(np.abs(d).max())
        alpha = min(1.0, self.config.max_step / big) if big > 0 else 1.0
        while alpha > 1e-20:
            trial = np.clip(c + alpha * d, -cap, cap)
            step = trial - c
            if not np.any(step):
                return None
            ft = self.f(trial)
            if ft <= f + 1e-4 * float(g @ step):
                return trial, ft
            alpha *= 0.5
        return None

    def run(self, c0, history_sink=None):
        cfg = self.config
        cap = cfg.coef_cap
        m = len(c0)
        c = np.clip(np.asarray(c0, dtype=float), -cap, cap)
        f = self.f(c)
        g = self.grad(c)
        hinv = np.eye(m)
        fresh = True
        history = [f]
        it = 0
        while it < cfg.max_iters:
            if f - self.floor <= cfg.epsilon:
                break
            if cfg.optimizer == "quasi-newton":
                d = -hinv @ g
                if g @ d >= 0:
                    hinv, fresh = np.eye(m), True
                    d = -g
            else:
                d = -g
            # freeze coordinates pinned at the cap that would leave the box
            pinned = (np.abs(c) >= cap) & (np.sign(d) == np.sign(c))
            d[pinned] = 0.0
            res = self.line_search(c, f, g, d)
            if res is None and not fresh:
                hinv, fresh = np.eye(m), True
                d = -g
                d[(np.abs(c) >= cap) & (np.sign(d) == np.sign(c))] = 0.0
                res = self.line_search(c, f, g, d)
            if res is None:
                break
            c_new, f_new = res
            g_new = self.grad(c_new)
            it += 1
            if cfg.optimizer == "quasi-newton":
                s, y = c_new - c, g_new - g
                sy = float(s @ y)
                if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                    if fresh:
                        hinv = np.eye(m) * (sy / float(y @ y))
                    rho = 1.0 / sy
                    v = np.eye(m) - rho * np.outer(s, y)
                    hinv = v @ hinv @ v.T + rho * np.outer(s, s)
                    fresh = False
            c, f, g = c_new, f_new, g_new
            history.append(f)
            w = cfg.stall_window
            if len(history) > w:
                ref = history[-w - 1]
                if ref - f <= cfg.stall_rtol * max(abs(ref - self.floor), 1e-300):
                    break
        return c, f, it, history


def _build_state(instance, c, it, history, config, fn, floor, restart):
    rho, w = gibbs_for(instance, c)
    achieved = instance.stack.expectations(rho)
    f = float(fn(instance.targets, achieved))
    return MaxEntState(
        coefficients=c,
        rho=rho,
        achieved=achieved,
        loss=f,
        iterations=it,
        converged=bool(f - floor <= config.epsilon),
        cap_saturated=bool(np.any(np.abs(c) >= config.coef_cap * (1 - 1e-12))),
        restart=restart,
        objective=config.objective,
        loss_floor=floor,
        history=history,
        eigenvalues=w,
    )


def initial_points(m: int, config: SolverConfig) -> np.ndarray:
    """Uniform ``[-1, 1]`` starts, one row per restart, from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    return rng.uniform(-1.0, 1.0, size=(config.restarts, m))


def solve(instance: CompatibilityInstance, config: SolverConfig | None = None) -> MaxEntState:
    """Best state over ``config.restarts`` seeded starts.

    Restarts stop early once one converges; otherwise the lowest objective
    wins, ties going to the earlier restart.
    """
    config = config or SolverConfig()
    fn, floor = _objective(config.objective, instance.targets)
    runner = _Run(instance, config, fn, floor)
    best = None
    for r, c0 in enumerate(initial_points(instance.m, config)):
        c, f, it, hist = runner.run(c0)
        log.debug("restart %d: objective %.3e after %d iterations", r, f, it)
        if best is None or f < best[1]:
            best = (c, f, it, hist, r)
        if f - floor <= config.epsilon:
            break
    c, f, it, hist, r = best
    return _build_state(instance, c, it, hist, config, fn, floor, r)
