"""Time-stepping schemes for the constrained gradient flow m_t = -P(m) mu.

Every step produces an on-sphere field via pointwise projection of the
predictor m-tilde, plus a record of the quantities the structure theory
controls: the pre-projection energy and minimum length, the post-projection
energy, and the unit-length deviation.

Schemes:
  * prk_step       -- the product IMEX-RK scheme: stage systems
                      (I - tau a_ii d_ii P(U^{i-1}) D_h) U^i = U^0 + tau mu_i
  * prk_alt_step   -- the variant that averages the projector instead of the
                      Laplacian, with transformed tableau Ahat = A D, G = D^{-1}
  * sip1_step      -- first-order semi-implicit predictor + projection
  * lm2_step       -- second-order Lagrange-multiplier scheme (beta = 0)
  * bdf4_reference -- fourth-order semi-implicit BDF reference integrator
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dataclass_field, replace

import numpy as np
import scipy.optimize
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from . import linalg
from .field import (VectorField, ProjectionParams, normalize, diagnostics,
                    projector_blocks, apply_blocks)
from .grid import laplacian, discrete_energy, inner_product
from .linalg import SolverConfig, solve, stage_template
from .tableau import PRKTableau, prk2_tableau, validate

__all__ = [
    "SchemeParams",
    "StepRecord",
    "RunTrace",
    "LM2State",
    "StepFailureError",
    "NoRealRootError",
    "prk_step",
    "prk_alt_step",
    "sip1_step",
    "lm2_step",
    "lm2_init",
    "bdf4_reference",
    "run",
    "make_stepper",
]

TRACE_COLUMNS = ("step", "t", "energy", "energy_pre_projection", "min_len_pre",
                 "max_unit_dev", "solver_iters_total", "wall_ms")


class StepFailureError(RuntimeError):
    """A step failed; carries the stage index (or None) and the underlying cause."""

    def __init__(self, stage, cause):
        super().__init__(f"step failed at stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


class NoRealRootError(RuntimeError):
    """The scalar multiplier equation has no real solution in the search bracket."""


@dataclass(frozen=True)
class SchemeParams:
    """Scheme selector plus the numerical parameters shared by all schemes."""

    scheme: str                      # prk | prk_alt | sip1 | lm2 | bdf4_ref
    tau: float
    projection: ProjectionParams
    tableau: PRKTableau = None
    theta: float = 1.0               # sip1 implicitness, 1/2 <= theta <= 1
    solver: SolverConfig = dataclass_field(default_factory=SolverConfig)
    lm2_direction: tuple = (1.0, 1.0, 1.0)
    lm2_bracket: float = 10.0
    lm2_lambda0: str = "field"       # "field": -m.Dm at t=0; "zero"

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.scheme not in ("prk", "prk_alt", "sip1", "lm2", "bdf4_ref"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "sip1" and not 0.5 <= self.theta <= 1.0:
            raise ValueError("sip1 requires 1/2 <= theta <= 1")
        if self.scheme in ("prk", "prk_alt"):
            tab = self.tableau if self.tableau is not None else prk2_tableau()
            object.__setattr__(self, "tableau", tab)
            bad = validate(tab)
            if bad:
                raise ValueError(f"tableau fails validation: {bad}")


@dataclass
class StepRecord:
    step: int
    t: float
    energy: float
    energy_pre_projection: float
    min_len_pre: float
    max_unit_dev: float
    solver_iters: tuple
    solver_residuals: tuple
    wall_ms: float
    lm2_lambda_min: float = np.nan
    lm2_lambda_max: float = np.nan
    lm2_eta: float = np.nan

    @property
    def solver_iters_total(self):
        return int(sum(self.solver_iters))


class RunTrace:
    """Per-step records in time order, with CSV-friendly row access."""

    def __init__(self):
        self.records = []
        self.failure = None          # (time, exception) when a run aborted

    def append(self, record):
        if self.records and record.t <= self.records[-1].t:
            raise ValueError("records must be appended in time order")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def rows(self):
        for r in self.records:
            yield (r.step, r.t, r.energy, r.energy_pre_projection, r.min_len_pre,
                   r.max_unit_dev, r.solver_iters_total, r.wall_ms)

    def energies(self):
        return np.array([r.energy for r in self.records])


def _laplacian_apply(lap, comps):
    out = np.empty_like(comps)
    for l in range(3):
        out[l] = lap.matrix @ comps[l]
    out += lap.bc_contribution
    return out


def _finish_step(grid, m_tilde, step_index, t_next, iters, resids, t_wall0, extra=None):
    pre = VectorField(m_tilde, grid)
    e_pre = discrete_energy(pre)
    d_pre = diagnostics(pre)
    out = normalize(pre)
    d_post = diagnostics(out)
    e_post = discrete_energy(out)
    rec = StepRecord(step=step_index, t=t_next, energy=e_post,
                     energy_pre_projection=e_pre, min_len_pre=d_pre.min_length,
                     max_unit_dev=d_post.max_unit_deviation,
                     solver_iters=tuple(iters), solver_residuals=tuple(resids),
                     wall_ms=(time.perf_counter() - t_wall0) * 1e3)
    if extra:
        for k, v in extra.items():
            setattr(rec, k, v)
    return out, rec


def prk_step(state, p, step_index=0, t0=0.0):
    """One step of the product scheme (mobility at the lagged stage, D2-averaged Laplacian)."""
    grid = state.grid
    lap = laplacian(grid)
    tmpl = stage_template(lap)
    tab = p.tableau
    Atab, Dtab, btab, s = tab.A, tab.D2, tab.b, tab.s
    tau = p.tau
    t_wall = time.perf_counter()

    U = [state.components]
    DU = [None]
    P = []
    iters, resids = [], []
    for i in range(1, s + 1):
        P.append(projector_blocks(VectorField(U[i - 1], grid), p.projection))
        mu = np.zeros_like(U[0])
        for j in range(1, i):
            acc = np.zeros_like(U[0])
            for k in range(1, j + 1):
                acc += Dtab[j - 1, k - 1] * DU[k]
            mu += Atab[i - 1, j - 1] * apply_blocks(P[j - 1], acc)
        acc = np.zeros_like(U[0])
        for k in range(1, i):
            acc += Dtab[i - 1, k - 1] * DU[k]
        mu += Atab[i - 1, i - 1] * apply_blocks(P[i - 1], acc)

        coeff = tau * Atab[i - 1, i - 1] * Dtab[i - 1, i - 1]
        system = tmpl.assemble(P[i - 1], coeff)
        rhs = U[0] + tau * mu + coeff * apply_blocks(P[i - 1], lap.bc_contribution)
        try:
            x, nit, res = solve(system, rhs.reshape(-1), p.solver)
        except (linalg.NonConvergenceError, linalg.BreakdownError) as exc:
            raise StepFailureError(i, exc) from exc
        iters.append(nit)
        resids.append(res)
        Ui = x.reshape(3, -1)
        U.append(Ui)
        DU.append(_laplacian_apply(lap, Ui))

    m_tilde = U[0].copy()
    for j in range(1, s + 1):
        acc = np.zeros_like(U[0])
        for k in range(1, j + 1):
            acc += Dtab[j - 1, k - 1] * DU[k]
        m_tilde += tau * btab[j - 1] * apply_blocks(P[j - 1], acc)
    return _finish_step(grid, m_tilde, step_index, t0 + tau, iters, resids, t_wall)


def prk_alt_step(state, p, step_index=0, t0=0.0):
    """Variant form: averaged projector times the un-averaged stage Laplacian.

    Uses Ahat = A D2, bhat = D2^T b and averaging weights G = D2^{-1}.
    """
    grid = state.grid
    lap = laplacian(grid)
    tmpl = stage_template(lap)
    tab = p.tableau
    try:
        G = np.linalg.inv(tab.D2)
    except np.linalg.LinAlgError as exc:
        raise StepFailureError(None, f"singular D2: {exc}") from exc
    Ahat = tab.A @ tab.D2
    bhat = tab.D2.T @ tab.b
    s = tab.s
    tau = p.tau
    t_wall = time.perf_counter()

    U = [state.components]
    DU = [None]
    P_single = []
    P_avg = []
    iters, resids = [], []
    for i in range(1, s + 1):
        P_single.append(projector_blocks(VectorField(U[i - 1], grid), p.projection))
        pb = np.zeros_like(P_single[0])
        for k in range(1, i + 1):
            pb += G[i - 1, k - 1] * P_single[k - 1]
        P_avg.append(pb)

        rhs = U[0].copy()
        for j in range(1, i):
            rhs += tau * Ahat[i - 1, j - 1] * apply_blocks(P_avg[j - 1], DU[j])
        coeff = tau * Ahat[i - 1, i - 1]
        system = tmpl.assemble(P_avg[i - 1], coeff)
        rhs += coeff * apply_blocks(P_avg[i - 1], lap.bc_contribution)
        try:
            x, nit, res = solve(system, rhs.reshape(-1), p.solver)
        except (linalg.NonConvergenceError, linalg.BreakdownError) as exc:
            raise StepFailureError(i, exc) from exc
        iters.append(nit)
        resids.append(res)
        Ui = x.reshape(3, -1)
        U.append(Ui)
        DU.append(_laplacian_apply(lap, Ui))

    m_tilde = U[0].copy()
    for j in range(1, s + 1):
        m_tilde += tau * bhat[j - 1] * apply_blocks(P_avg[j - 1], DU[j])
    return _finish_step(grid, m_tilde, step_index, t0 + tau, iters, resids, t_wall)


def sip1_step(state, p, step_index=0, t0=0.0):
    """Semi-implicit predictor (I - tau theta P D_h) m~ = m + tau (1-theta) P D_h m."""
    grid = state.grid
    lap = laplacian(grid)
    tmpl = stage_template(lap)
    tau, theta = p.tau, p.theta
    t_wall = time.perf_counter()

    blocks = projector_blocks(state, p.projection)
    dm = _laplacian_apply(lap, state.components)
    rhs = state.components + tau * (1.0 - theta) * apply_blocks(blocks, dm)
    rhs = rhs + tau * theta * apply_blocks(blocks, lap.bc_contribution)
    system = tmpl.assemble(blocks, tau * theta)
    try:
        x, nit, res = solve(system, rhs.reshape(-1), p.solver)
    except (linalg.NonConvergenceError, linalg.BreakdownError) as exc:
        raise StepFailureError(1, exc) from exc
    return _finish_step(grid, x.reshape(3, -1), step_index, t0 + tau, [nit], [res], t_wall)


@dataclass
class LM2State:
    """Auxiliary history of the Lagrange-multiplier scheme."""

    lam: np.ndarray          # pointwise multiplier field
    predictor: np.ndarray    # previous unprojected predictor (3, N)
    lu: object               # cached factorization of I - tau*alpha/2 * D_h


def lm2_init(state, p):
    """m~^0 = m^0; lambda^0 = -m.D_h m pointwise (or zero, per configuration)."""
    grid = state.grid
    lap = laplacian(grid)
    if p.lm2_lambda0 == "zero":
        lam = np.zeros(grid.n_nodes)
    else:
        dm = _laplacian_apply(lap, state.components)
        lam = -np.einsum("ln,ln->n", state.components, dm)
    a = sparse.identity(grid.n_nodes, format="csc") \
        - (p.tau * p.projection.alpha / 2.0) * lap.matrix.tocsc()
    return LM2State(lam=lam, predictor=state.components.copy(), lu=spla.splu(a))


def _lm2_energy(comps, grid):
    # the Lagrange-multiplier energy balance is written for int 1/2 |grad m|^2,
    # which is half the module's discrete energy
    return 0.5 * discrete_energy(comps, grid)


def _lm2_scalar_root(F, bracket, xtol=1e-12, scan_step=0.0025):
    """Root of F nearest zero inside [-bracket, bracket]; None when no sign change."""
    f0 = F(0.0)
    if f0 == 0.0:
        return 0.0
    for d in np.arange(scan_step, bracket + 0.5 * scan_step, scan_step):
        if f0 * F(d) < 0:
            return scipy.optimize.brentq(F, 0.0, d, xtol=xtol)
        if f0 * F(-d) < 0:
            return scipy.optimize.brentq(F, -d, 0.0, xtol=xtol)
    return None


def lm2_step(state, aux, p, step_index=0, t0=0.0):
    """Predictor / corrector / energy-enforcement step (beta = 0 flow).

    Returns (field, updated aux, record).  Raises NoRealRootError when the
    scalar multiplier equation has no real solution in the bracket.
    """
    if p.projection.beta != 0.0:
        raise ValueError("lm2 implements the beta = 0 flow")
    grid = state.grid
    lap = laplacian(grid)
    tau, alpha = p.tau, p.projection.alpha
    t_wall = time.perf_counter()

    m = state.components
    d_pred = _laplacian_apply(lap, aux.predictor)
    rhs = m + (tau * alpha / 2.0) * d_pred + (tau * alpha) * aux.lam * m
    m_tilde = np.vstack([aux.lu.solve(rhs[l]) for l in range(3)])

    w = m_tilde - (tau * alpha / 2.0) * aux.lam * m
    wn = np.sqrt(np.einsum("ln,ln->n", w, w))
    if (wn < 1e-300).any():
        raise StepFailureError(2, "zero-length corrector direction")
    lam_new = 2.0 * (1.0 - wn) / (tau * alpha)
    m_hat = w / wn

    g = 0.5 * (m_hat + m)
    dg = _laplacian_apply(lap, g)
    cr = np.cross(g, dg, axis=0)
    dissipation = sum(inner_product(cr[l], cr[l], grid) for l in range(3))
    target = _lm2_energy(m, grid) - tau * alpha * dissipation

    e_dir = np.asarray(p.lm2_direction, dtype=float)
    e_dir = e_dir / np.linalg.norm(e_dir)

    def F(eta):
        v = m_hat + eta * e_dir[:, None]
        vn = np.sqrt(np.einsum("ln,ln->n", v, v))
        return _lm2_energy(v / vn, grid) - target

    eta = _lm2_scalar_root(F, p.lm2_bracket)
    if eta is None:
        raise NoRealRootError(
            f"no real multiplier in [-{p.lm2_bracket}, {p.lm2_bracket}] at t={t0 + tau:.6g}")
    v = m_hat + eta * e_dir[:, None]
    m_tilde_post = v  # the field entering the final projection
    aux_new = LM2State(lam=lam_new, predictor=m_tilde, lu=aux.lu)
    out, rec = _finish_step(grid, m_tilde_post, step_index, t0 + tau, [1], [0.0], t_wall,
                            extra={"lm2_lambda_min": float(lam_new.min()),
                                   "lm2_lambda_max": float(lam_new.max()),
                                   "lm2_eta": float(eta)})
    return out, aux_new, rec


def bdf4_reference(initial, p, T):
    """Fourth-order semi-implicit BDF integrator used as a reference solution.

    The Laplacian is implicit; the mobility is evaluated at the fourth-order
    extrapolation of the history.  Startup computes three levels by product
    sub-steps at tau/10; the result is projected after every step.
    """
    grid = initial.grid
    lap = laplacian(grid)
    tmpl = stage_template(lap)
    tau = p.tau
    n_steps = _step_count(T, tau)
    if n_steps == 0:
        return initial.copy()

    startup = replace(p, scheme="prk", tau=tau / 10.0, tableau=prk2_tableau())
    hist = [normalize(initial)]
    for _ in range(min(3, n_steps)):
        m = hist[-1]
        for _ in range(10):
            m, _rec = prk_step(m, startup)
        hist.append(m)
    if n_steps <= 3:
        return hist[n_steps]

    h0, h1, h2, h3 = (h.components for h in hist)
    for _ in range(3, n_steps):
        m_star = 4.0 * h3 - 6.0 * h2 + 4.0 * h1 - h0
        blocks = projector_blocks(VectorField(m_star, grid), p.projection)
        coeff = tau * 12.0 / 25.0
        system = tmpl.assemble(blocks, coeff)
        rhs = (48.0 * h3 - 36.0 * h2 + 16.0 * h1 - 3.0 * h0) / 25.0
        rhs = rhs + coeff * apply_blocks(blocks, lap.bc_contribution)
        try:
            x, _nit, _res = solve(system, rhs.reshape(-1), p.solver)
        except (linalg.NonConvergenceError, linalg.BreakdownError) as exc:
            raise StepFailureError(1, exc) from exc
        m_new = normalize(VectorField(x.reshape(3, -1), grid))
        h0, h1, h2, h3 = h1, h2, h3, m_new.components
    return VectorField(h3.copy(), grid, on_sphere=True)


def _step_count(T, tau):
    if T < 0:
        raise ValueError("T must be nonnegative")
    n = int(round(T / tau))
    if abs(n * tau - T) > 1e-8 * max(tau, T):
        raise ValueError(f"T={T} is not an integer multiple of tau={tau}")
    return n


def make_stepper(initial, p):
    """Bind scheme state and return step(field, i, t) -> (field, record)."""
    if p.scheme == "prk":
        return lambda m, i, t: prk_step(m, p, i, t)
    if p.scheme == "prk_alt":
        return lambda m, i, t: prk_alt_step(m, p, i, t)
    if p.scheme == "sip1":
        return lambda m, i, t: sip1_step(m, p, i, t)
    if p.scheme == "lm2":
        aux = lm2_init(initial, p)

        def step(m, i, t, _aux=[aux]):
            out, _aux[0], rec = lm2_step(m, _aux[0], p, i, t)
            return out, rec

        return step
    raise ValueError(f"scheme {p.scheme!r} has no per-step form")


def run(initial, p, T, observers=None):
    """Iterate the selected scheme to time T = n tau; returns (field, trace).

    Observers are callables (step_index, t, field) invoked after every step.
    A step failure stops the run; the trace keeps the records up to the
    failure and the exception in ``trace.failure``.
    """
    n_steps = _step_count(T, p.tau)
    trace = RunTrace()
    m = initial if initial.on_sphere else normalize(initial)
    stepper = make_stepper(m, p)
    t = 0.0
    for i in range(1, n_steps + 1):
        try:
            m, rec = stepper(m, i, t)
        except (StepFailureError, NoRealRootError) as exc:
            trace.failure = (t + p.tau, exc)
            return m, trace
        t = rec.t
        trace.append(rec)
        if observers:
            for obs in observers:
                obs(i, t, m)
    return m, trace
