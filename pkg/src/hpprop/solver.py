"""Alternating illumination/reflectance propagation with hybrid priors.

Each stage updates, in order: the auxiliary illumination (learned or
fallback descent direction), the illumination (linear solve + projection
onto [0, O]), the auxiliary reflectance (closed form), and the reflectance
(one backtracking projected-gradient step onto [0, 1]). The final output
is the reflectance times gamma-adjusted illumination.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import imagecore
from .denoiser import IdentityDescent, apply_descent
from .linsolve import IlluminationSystem, cg_solve
from .operators import grad, log_potential, log_potential_grad, project_box

PRIOR_MODES = ("hybrid", "knowledge_only", "data_only")

MAX_BACKTRACK = 20


@dataclass(frozen=True)
class SolverConfig:
    """Scalar hyperparameters and iteration policy for the propagation."""

    mu_I: float = 8.0
    lambda_I0: float = 1.0
    lambda_growth: float = 2.0
    mu_R: float = 0.5
    lambda_R0: float = 1.0
    theta: float = 10.0
    eta: float = 1.0
    gamma: float = 2.2
    t_max: int = 4
    step_R: float = 1.0
    backtrack_factor: float = 0.5
    eps_div: float = 1e-4
    cg_tol: float = 1e-6
    cg_max_iter: int = 500
    prior_mode: str = "hybrid"
    adjust_illumination: bool = True

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if self.eps_div <= 0:
            raise ValueError(f"eps_div must be positive, got {self.eps_div}")
        if min(self.mu_I, self.mu_R) < 0:
            raise ValueError("trade-off parameters must be nonnegative")
        if self.lambda_I0 <= 0 or self.lambda_R0 <= 0:
            raise ValueError("lambda_I0 and lambda_R0 must be positive")
        if self.lambda_growth < 1:
            raise ValueError(f"lambda_growth must be >= 1, got {self.lambda_growth}")
        if self.theta <= 0 or self.eta <= 0 or self.step_R <= 0:
            raise ValueError("theta, eta, and step_R must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError(
                f"backtrack_factor must be in (0,1), got {self.backtrack_factor}"
            )
        if self.cg_tol <= 0 or self.cg_max_iter < 1:
            raise ValueError("cg_tol must be positive and cg_max_iter >= 1")
        if self.prior_mode not in PRIOR_MODES:
            raise ValueError(
                f"prior_mode must be one of {PRIOR_MODES}, got {self.prior_mode!r}"
            )

    def lambda_I(self, t):
        return self.lambda_I0 * self.lambda_growth**t

    def lambda_R(self, t):
        return self.lambda_R0 * self.lambda_growth**t

    def effective(self):
        """Config with the mode's structural choices applied (data_only drops
        the explicit prior weights)."""
        if self.prior_mode == "data_only":
            return replace(self, mu_I=0.0, mu_R=0.0)
        return self


@dataclass
class StageTrace:
    stage: int
    fidelity: float
    smoothness: float
    potential: float
    total: float
    cg_iters: int
    backtrack_halvings: int

    TRACE_FIELDS = (
        "stage",
        "fidelity",
        "smoothness",
        "potential",
        "total",
        "cg_iters",
        "backtrack_halvings",
    )

    def as_row(self):
        return [getattr(self, name) for name in self.TRACE_FIELDS]


@dataclass
class PropagationState:
    I: np.ndarray
    R: np.ndarray
    I_tilde: np.ndarray
    R_tilde: np.ndarray
    t: int
    energy_trace: list = field(default_factory=list)


@dataclass
class EnhanceReport:
    enhanced: np.ndarray
    illumination: np.ndarray
    reflectance: np.ndarray
    trace: list
    wall_time: float


def energy_terms(I, R, O, cfg):
    """Explicit energy terms (fidelity, smoothness, log potential)."""
    if not (I.shape == R.shape == O.shape):
        raise ValueError(
            f"shape mismatch: I {I.shape}, R {R.shape}, O {O.shape}"
        )
    fidelity = 0.5 * float(np.sum(np.square(R * I - O)))
    gx, gy = grad(I)
    smoothness = 0.5 * cfg.mu_I * float(np.sum(np.square(gx) + np.square(gy)))
    potential = 0.5 * cfg.mu_R * log_potential(grad(R), cfg.theta)
    return fidelity, smoothness, potential


def energy(I, R, O, cfg):
    """Total explicit energy (the implicit data terms are not evaluable)."""
    return sum(energy_terms(I, R, O, cfg))


def step_I_tilde(state, d, cfg):
    """Auxiliary illumination update; knowledge_only forces the identity."""
    if cfg.prior_mode == "knowledge_only":
        d = IdentityDescent()
    return apply_descent(d, state.I)


def step_I(state, O, cfg):
    """Solve the illumination subproblem and project onto [0, O].

    Returns (I_next, cg_iterations).
    """
    lam = cfg.lambda_I(state.t)
    rhs = O / np.maximum(state.R, cfg.eps_div) + lam * state.I_tilde
    sys = IlluminationSystem(rhs=rhs, lambda_I=lam, mu_I=cfg.mu_I)
    I, iters, _ = cg_solve(sys, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter)
    return project_box(I, 0.0, O), iters


def step_R_tilde(state, O, cfg):
    """Closed-form auxiliary reflectance update (not projected)."""
    quotient = O / np.maximum(state.I_tilde, cfg.eps_div)
    return (cfg.eta * quotient + state.R) / (cfg.eta + 1.0)


def _g_value(R, I, O, R_tilde, lam_R, cfg):
    val = 0.5 * float(np.sum(np.square(R * I - O)))
    val += 0.5 * lam_R * float(np.sum(np.square(R_tilde - R)))
    if cfg.mu_R != 0.0:
        val += 0.5 * cfg.mu_R * log_potential(grad(R), cfg.theta)
    return val


def _g_grad(R, I, O, R_tilde, lam_R, cfg):
    G = I * (R * I - O) + lam_R * (R - R_tilde)
    if cfg.mu_R != 0.0:
        G = G + 0.5 * cfg.mu_R * log_potential_grad(R, cfg.theta)
    return G


def step_R(state, O, cfg):
    """One backtracking projected-gradient step on g, clamped to [0, 1].

    Returns (R_next, halvings); accepts the old iterate after MAX_BACKTRACK
    failed halvings, so the g-value never increases.
    """
    lam = cfg.lambda_R(state.t)
    g0 = _g_value(state.R, state.I, O, state.R_tilde, lam, cfg)
    G = _g_grad(state.R, state.I, O, state.R_tilde, lam, cfg)
    alpha = cfg.step_R
    for halvings in range(MAX_BACKTRACK + 1):
        cand = project_box(state.R - alpha * G, 0.0, 1.0)
        if _g_value(cand, state.I, O, state.R_tilde, lam, cfg) <= g0:
            return cand, halvings
        alpha *= cfg.backtrack_factor
    return state.R.copy(), MAX_BACKTRACK


_INVERT_GRID = float(2**32)


def _snap(plane):
    """Round onto a 2^-32 fixed-point grid.

    On this grid 1-v is computed exactly, so the photometric inversion used
    by the dehazing duality is an exact involution. The grid spacing is far
    below 8-bit output precision.
    """
    return np.round(plane * _INVERT_GRID) / _INVERT_GRID


def gamma_adjust(R, I, gamma):
    """Enhanced output R * I**(1/gamma), clamped to [0, 1]."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if gamma == 1.0:
        return np.clip(R * I, 0.0, 1.0)
    return np.clip(R * np.power(I, 1.0 / gamma), 0.0, 1.0)


def run(O, cfg, d=None):
    """Run the full propagation on a single plane O in [0, 1]."""
    start = time.perf_counter()
    O = imagecore.validate_plane(O)
    if d is None:
        d = IdentityDescent()
    eff = cfg.effective()

    state = PropagationState(
        I=O.copy(),
        R=np.zeros_like(O),
        I_tilde=O.copy(),
        R_tilde=np.zeros_like(O),
        t=0,
    )
    for t in range(eff.t_max):
        state.t = t
        state.I_tilde = step_I_tilde(state, d, eff)
        state.I, cg_iters = step_I(state, O, eff)
        state.R_tilde = step_R_tilde(state, O, eff)
        state.R, halvings = step_R(state, O, eff)
        fid, smooth, pot = energy_terms(state.I, state.R, O, eff)
        state.energy_trace.append(
            StageTrace(
                stage=t,
                fidelity=fid,
                smoothness=smooth,
                potential=pot,
                total=fid + smooth + pot,
                cg_iters=cg_iters,
                backtrack_halvings=halvings,
            )
        )

    if eff.adjust_illumination:
        enhanced = gamma_adjust(state.R, state.I, eff.gamma)
    else:
        enhanced = np.clip(state.R * state.I, 0.0, 1.0)
    return EnhanceReport(
        enhanced=_snap(enhanced),
        illumination=state.I,
        reflectance=state.R,
        trace=state.energy_trace,
        wall_time=time.perf_counter() - start,
    )


def enhance_color(img, cfg, d=None):
    """Enhance the V channel of an RGB image; H and S pass through unchanged."""
    img = imagecore.validate_color(img)
    h, s, v = imagecore.rgb_to_hsv(img)
    report = run(v, cfg, d)
    out = imagecore.hsv_to_rgb(h, s, report.enhanced)
    return EnhanceReport(
        enhanced=_snap(np.clip(out, 0.0, 1.0)),
        illumination=report.illumination,
        reflectance=report.reflectance,
        trace=report.trace,
        wall_time=report.wall_time,
    )


def dehaze(img, cfg, d=None):
    """Dehaze via the Retinex duality: invert, enhance, invert back."""
    img = imagecore.validate_color(img)
    report = enhance_color(1.0 - img, cfg, d)
    return EnhanceReport(
        enhanced=1.0 - report.enhanced,
        illumination=report.illumination,
        reflectance=report.reflectance,
        trace=report.trace,
        wall_time=report.wall_time,
    )
