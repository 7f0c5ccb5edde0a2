"""Propagation of structured Liouvillians: deterministic, stochastic, analytic.

Density matrices are vectorised row-major, vec(rho)[i*d + j] = rho[i, j], so
vec(A rho B) = (A kron B^T) vec(rho).  A Generator compiles to a constant
sparse superoperator plus one sparse block per distinct envelope product;
stepping then costs one sparse matvec per block with a scalar envelope value,
which keeps time-dependent couplings exact without rebuilding matrices.

Two propagation schemes, per the package-wide integration policy:

* deterministic master equation: classical fixed-step 4th-order Runge-Kutta,
  which preserves the trace of the (traceless) generator to roundoff;
* homodyne unravelling: Euler-Maruyama with the same outer step, per-step
  trace renormalisation, and counter-based per-trajectory noise streams
  (numpy Philox keyed by the trajectory seed), so every run is reproducible
  across platforms and independent of batching.

Both schemes subdivide an outer step automatically whenever the instantaneous
spectral bound of the generator (Gershgorin estimate) makes the step stiff —
the modulated source rate kappa(t) can spike by orders of magnitude at the
end of a rising-exponential wavepacket.  Substep counts are deterministic
functions of the config, so reproducibility is unaffected.

Many of the networks here conserve the number of control-band excitations
(source photon + atom occupying level 1 or 2), which confines the dynamics
to a small corner of the tensor-product space.  ``compile_generator`` accepts
a list of kept basis states and *verifies structurally* that no compiled term
couples the kept block to the rest; restriction is therefore exact, not an
approximation.

The homodyne current follows j(t) dt = sqrt(eta) <y> dt + dW with
y = e^{i phi} c + e^{-i phi} c' for the measured operator c (' = adjoint).
A measured current printed with the opposite sign of phi is the same record
under phi -> -phi.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import qops, slh
from .qops import Operator, SpaceLayout
from .sources import kappa_of_t

_trapz = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "TimeGrid",
    "NumericalInstabilityError",
    "CompiledGenerator",
    "CompiledMeasurement",
    "compile_generator",
    "compile_measurement",
    "basis_counts",
    "states_with_count_at_most",
    "MeResult",
    "evolve_me",
    "mean_signal_curve",
    "excitation_probability",
    "HomodyneRecord",
    "TrajectoryResult",
    "evolve_sme",
    "run_ensemble",
    "two_time_correlation",
    "AnalyticMoments",
    "snr_analytic",
    "snr_window_scan",
]

# target |lambda|*h per substep; RK4 is stable and accurate well beyond this,
# Euler needs the smaller margin
_RK4_TARGET = 1.0
_EULER_TARGET = 0.35
_MAX_SUBSTEPS = 100_000


class NumericalInstabilityError(RuntimeError):
    """Raised when a propagation step produces NaNs or runaway trace drift."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform integration grid [t0, t1] with step dt.

    ``sample_stride`` controls how often states are recorded (every that many
    steps; the endpoints are always included).
    """

    t0: float
    t1: float
    dt: float
    sample_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t1 <= self.t0:
            raise ValueError("t1 must exceed t0")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        n = (self.t1 - self.t0) / self.dt
        if abs(n - round(n)) > 1e-6:
            raise ValueError("(t1 - t0) must be an integer number of steps")

    @property
    def n_steps(self) -> int:
        return int(round((self.t1 - self.t0) / self.dt))

    def times(self) -> np.ndarray:
        """All step-boundary times, length n_steps + 1."""
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def sample_indices(self) -> np.ndarray:
        idx = np.arange(0, self.n_steps + 1, self.sample_stride)
        if idx[-1] != self.n_steps:
            idx = np.append(idx, self.n_steps)
        return idx

    def step_index(self, t: float) -> int:
        """Nearest step boundary to time t (validated within half a step)."""
        k = int(round((t - self.t0) / self.dt))
        if not 0 <= k <= self.n_steps:
            raise ValueError(f"time {t} outside grid [{self.t0}, {self.t1}]")
        if abs(self.t0 + k * self.dt - t) > 0.5 * self.dt + 1e-12:
            raise ValueError(f"time {t} does not lie on the grid")
        return k


# ---------------------------------------------------------------------------
# basis bookkeeping for conserved-sector restriction
# ---------------------------------------------------------------------------

def basis_counts(layout: SpaceLayout, level_weights) -> np.ndarray:
    """Per-basis-state totals of a per-subsystem, per-level weight table.

    ``level_weights`` is a sequence (one entry per subsystem) of per-level
    weights, e.g. (0, 1, 1) to count an atom in level 1 or 2 as one
    excitation.  Returns an integer array of length layout.dim.
    """
    if len(level_weights) != len(layout.dims):
        raise ValueError("need one weight table per subsystem")
    counts = np.zeros(1, dtype=int)
    for d, w in zip(layout.dims, level_weights):
        w = np.asarray(w, dtype=int)
        if w.shape != (d,):
            raise ValueError(f"weight table {w} does not match subsystem dim {d}")
        counts = (counts[:, None] + w[None, :]).reshape(-1)
    return counts


def states_with_count_at_most(layout: SpaceLayout, level_weights, cmax: int) -> np.ndarray:
    """Indices of product states whose weighted excitation total is <= cmax."""
    return np.flatnonzero(basis_counts(layout, level_weights) <= cmax)


# ---------------------------------------------------------------------------
# compilation to sparse superoperator blocks
# ---------------------------------------------------------------------------

def _spop(mat: np.ndarray) -> sp.csr_matrix:
    m = sp.csr_matrix(np.asarray(mat, dtype=complex))
    m.eliminate_zeros()
    return m


def _hamiltonian_block(h: np.ndarray) -> sp.csr_matrix:
    d = h.shape[0]
    hs = _spop(h)
    eye = sp.identity(d, dtype=complex, format="csr")
    return (-1j) * (sp.kron(hs, eye, format="csr")
                    - sp.kron(eye, hs.T, format="csr"))


def _dissipator_cross_block(ci: np.ndarray, cj: np.ndarray) -> sp.csr_matrix:
    """Superoperator of rho -> ci rho cj' - (cj' ci rho + rho cj' ci)/2."""
    d = ci.shape[0]
    si, sj = _spop(ci), _spop(cj)
    eye = sp.identity(d, dtype=complex, format="csr")
    anti = (sj.conj().T @ si).tocsr()
    return (sp.kron(si, sj.conj(), format="csr")
            - 0.5 * sp.kron(anti, eye, format="csr")
            - 0.5 * sp.kron(eye, anti.T, format="csr"))


def _coupling_block(o1: np.ndarray, o2: np.ndarray) -> sp.csr_matrix:
    """Superoperator of rho -> -([o2', o1 rho] + [rho o1', o2])."""
    d = o1.shape[0]
    s1, s2 = _spop(o1), _spop(o2)
    eye = sp.identity(d, dtype=complex, format="csr")
    return -(sp.kron((s2.conj().T @ s1).tocsr(), eye, format="csr")
             + sp.kron(eye, (s1.conj().T @ s2).T.tocsr(), format="csr")
             - sp.kron(s1, s2.conj(), format="csr")
             - sp.kron(s2, s1.conj(), format="csr"))


def _gershgorin_bound(mat: sp.csr_matrix) -> float:
    if mat.nnz == 0:
        return 0.0
    row_sums = np.abs(mat).sum(axis=1)
    return float(np.max(row_sums))


def _env_table(env, times: np.ndarray) -> np.ndarray:
    """Evaluate an envelope on an array of times, scalar fallback included."""
    try:
        vals = np.asarray(env(times), dtype=float)
        if vals.shape == times.shape:
            return vals
    except Exception:
        pass
    return np.array([float(env(t)) for t in times])


@dataclass(eq=False)
class CompiledGenerator:
    """Sparse form of a Generator: constant block + envelope-keyed blocks."""

    layout: SpaceLayout
    dim: int                      # working Hilbert dimension (after restriction)
    const: sp.csr_matrix
    group_envs: tuple             # one representative Envelope per block
    group_mats: tuple             # csr blocks aligned with group_envs
    const_bound: float
    group_bounds: np.ndarray
    kept_states: np.ndarray = None   # None = full space
    _transposed: tuple = field(default=None, repr=False)

    @property
    def full_dim(self) -> int:
        return self.layout.dim

    @property
    def diag_positions(self) -> np.ndarray:
        d = self.dim
        return np.arange(d) * d + np.arange(d)

    def env_rows(self, times: np.ndarray) -> np.ndarray:
        if not self.group_envs:
            return np.zeros((0, len(times)))
        return np.vstack([_env_table(e, times) for e in self.group_envs])

    def rate_bounds(self, env_rows: np.ndarray) -> np.ndarray:
        """Instantaneous Gershgorin bound on |lambda| at each tabulated time."""
        out = np.full(env_rows.shape[1], self.const_bound, dtype=float)
        for g in range(len(self.group_envs)):
            out += np.abs(env_rows[g]) * self.group_bounds[g]
        return out

    def apply(self, v: np.ndarray, env_vals) -> np.ndarray:
        """L(t) v with env_vals the per-group envelope values at t."""
        out = self.const @ v
        for g, mat in enumerate(self.group_mats):
            e = env_vals[g]
            if e != 0.0:
                out = out + e * (mat @ v)
        return out

    def apply_transposed(self, v: np.ndarray, env_vals) -> np.ndarray:
        if self._transposed is None:
            self._transposed = (self.const.T.tocsr(),
                                tuple(m.T.tocsr() for m in self.group_mats))
        const_t, mats_t = self._transposed
        out = const_t @ v
        for g, mat in enumerate(mats_t):
            e = env_vals[g]
            if e != 0.0:
                out = out + e * (mat @ v)
        return out

    def restrict_vector(self, v_full: np.ndarray) -> np.ndarray:
        if self.kept_states is None:
            return np.asarray(v_full, dtype=complex)
        keep_vec = _keep_vec(self.kept_states, self.full_dim)
        v_full = np.asarray(v_full, dtype=complex).ravel()
        outside = np.delete(v_full, keep_vec)
        if outside.size and np.max(np.abs(outside)) > 1e-14:
            raise ValueError("state has weight outside the restricted sector")
        return v_full[keep_vec]

    def expand_matrix(self, rho_sub: np.ndarray) -> np.ndarray:
        if self.kept_states is None:
            return rho_sub
        d = self.full_dim
        out = np.zeros((d, d), dtype=complex)
        out[np.ix_(self.kept_states, self.kept_states)] = rho_sub
        return out

    def populations_full(self, diag_sub: np.ndarray) -> np.ndarray:
        if self.kept_states is None:
            return diag_sub
        out = np.zeros(self.full_dim, dtype=diag_sub.dtype)
        out[self.kept_states] = diag_sub
        return out


def _keep_vec(kept_states: np.ndarray, d: int) -> np.ndarray:
    return (kept_states[:, None] * d + kept_states[None, :]).ravel()


def _restrict_block(mat: sp.csr_matrix, keep_vec: np.ndarray, what: str) -> sp.csr_matrix:
    cols = mat.tocsc()[:, keep_vec].tocoo()
    if cols.nnz:
        outside = ~np.isin(cols.row, keep_vec)
        if np.any(outside) and np.max(np.abs(cols.data[outside])) > 0.0:
            raise ValueError(
                f"{what} couples the restricted sector to excluded states; "
                "restriction would not be exact"
            )
    return mat.tocsr()[keep_vec][:, keep_vec].tocsr()


def compile_generator(gen: slh.Generator, kept_states=None) -> CompiledGenerator:
    """Assemble the sparse superoperator blocks of a structured generator.

    ``kept_states`` (optional) restricts the simulation to the given product
    basis states; the compiled blocks are checked structurally for closure,
    so a restriction that would change the physics raises instead.
    """
    d = gen.layout.dim
    groups: dict = {}

    def add(env: slh.Envelope, block: sp.csr_matrix):
        key = env.atoms
        if key in groups:
            groups[key] = (groups[key][0], groups[key][1] + block)
        else:
            groups[key] = (env, block)

    for env, op in gen.hamiltonian.terms:
        add(env, _hamiltonian_block(op.mat))

    for channel in gen.dissipators:
        for ti in channel:
            for tj in channel:
                add(ti.env * tj.env, _dissipator_cross_block(ti.op.mat, tj.op.mat))

    for c1, c2 in gen.couplings:
        add(c1.env * c2.env, _coupling_block(c1.op.mat, c2.op.mat))

    zero = sp.csr_matrix((d * d, d * d), dtype=complex)
    const = groups.pop((), (slh.CONSTANT, zero))[1]

    keys = sorted(groups.keys(), key=repr)
    envs = tuple(groups[k][0] for k in keys)
    mats = [groups[k][1].tocsr() for k in keys]
    const = const.tocsr()
    for m in mats + [const]:
        m.sum_duplicates()
        m.eliminate_zeros()

    kept = None
    if kept_states is not None:
        kept = np.unique(np.asarray(kept_states, dtype=int))
        keep_vec = _keep_vec(kept, d)
        const = _restrict_block(const, keep_vec, "constant part")
        mats = [_restrict_block(m, keep_vec, f"envelope block {k}")
                for m, k in zip(mats, keys)]
        dim = len(kept)
    else:
        dim = d

    return CompiledGenerator(
        layout=gen.layout,
        dim=dim,
        const=const,
        group_envs=envs,
        group_mats=tuple(mats),
        const_bound=_gershgorin_bound(const),
        group_bounds=np.array([_gershgorin_bound(m) for m in mats]),
        kept_states=kept,
    )


@dataclass(eq=False)
class CompiledMeasurement:
    """Linear part of the homodyne back-action and the signal functional.

    klin v = vec(P rho + rho P') with P = e^{i phi} c; the full measurement
    superoperator is M[c] rho = P rho + rho P' - <y> rho with
    <y> = Re(w . v) for trace-normalised states (w = vec(y^T)).
    """

    klin: sp.csr_matrix
    w: np.ndarray
    phi: float
    bound: float

    def y_expect(self, V: np.ndarray) -> np.ndarray:
        return (self.w @ V).real


def compile_measurement(meas_op: Operator, phi: float,
                        kept_states=None) -> CompiledMeasurement:
    d = meas_op.layout.dim
    p = np.exp(1j * phi) * meas_op.mat
    ps = _spop(p)
    eye = sp.identity(d, dtype=complex, format="csr")
    klin = sp.kron(ps, eye, format="csr") + sp.kron(eye, ps.conj(), format="csr")
    yhat = p + p.conj().T
    w = yhat.T.reshape(-1).copy()
    if kept_states is not None:
        kept = np.unique(np.asarray(kept_states, dtype=int))
        keep_vec = _keep_vec(kept, d)
        klin = _restrict_block(klin, keep_vec, "measurement back-action")
        w = w[keep_vec]
    return CompiledMeasurement(klin.tocsr(), w, float(phi), _gershgorin_bound(klin))


# ---------------------------------------------------------------------------
# step plans (deterministic substep schedules + envelope tables)
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _StepPlan:
    m: np.ndarray        # substeps per outer step
    h: np.ndarray        # inner step sizes dt / m
    offsets: np.ndarray  # exclusive prefix sums of m (or of stage counts)
    env: np.ndarray      # (n_groups, n_stage_times) envelope values


def _substep_counts(cg: CompiledGenerator, grid: TimeGrid, target: float) -> np.ndarray:
    times = grid.times()
    probes = np.concatenate([times[:-1], times[:-1] + grid.dt / 2.0, times[1:]])
    rows = cg.env_rows(probes)
    rates = cg.rate_bounds(rows).reshape(3, grid.n_steps)
    worst = rates.max(axis=0)
    m = np.maximum(1, np.ceil(worst * grid.dt / target).astype(int))
    if np.any(m > _MAX_SUBSTEPS):
        raise NumericalInstabilityError(
            f"stiffness bound {worst.max():.3e} exceeds the substep budget; "
            "reduce dt or revisit the envelope"
        )
    return m


def _euler_plan(cg: CompiledGenerator, grid: TimeGrid) -> _StepPlan:
    m = _substep_counts(cg, grid, _EULER_TARGET)
    h = grid.dt / m
    off = np.concatenate([[0], np.cumsum(m)])
    total = int(off[-1])
    step_of = np.repeat(np.arange(grid.n_steps), m)
    within = np.arange(total) - np.repeat(off[:-1], m)
    starts = grid.t0 + step_of * grid.dt + within * np.repeat(h, m)
    env = cg.env_rows(starts)
    return _StepPlan(m, h, off, env)


def _rk4_plan(cg: CompiledGenerator, grid: TimeGrid, reverse: bool = False) -> _StepPlan:
    """Stage-time envelope table for RK4: (start, mid, end) per substep.

    With ``reverse`` the plan walks the grid from t1 down to t0 (stage times
    descend); used by the adjoint sweep of the analytic moments.
    """
    m = _substep_counts(cg, grid, _RK4_TARGET)
    if reverse:
        m = m[::-1]
    h = grid.dt / m
    off = np.concatenate([[0], np.cumsum(m)])
    total = int(off[-1])
    step_of = np.repeat(np.arange(grid.n_steps), m)
    within = np.arange(total) - np.repeat(off[:-1], m)
    hh = np.repeat(h, m)
    if reverse:
        starts = grid.t1 - step_of * grid.dt - within * hh
        stage_times = np.concatenate([starts, starts - hh / 2.0, starts - hh])
    else:
        starts = grid.t0 + step_of * grid.dt + within * hh
        stage_times = np.concatenate([starts, starts + hh / 2.0, starts + hh])
    env = cg.env_rows(stage_times).reshape(-1, 3, total)
    return _StepPlan(m, h, off, env)


def _rk4_substep(cg, V, env3, h, sign=1.0, transposed=False, source=None):
    """One RK4 substep of V' = sign * L V (+ source), env3 = stage envelopes."""
    op = cg.apply_transposed if transposed else cg.apply
    k1 = op(V, env3[:, 0])
    if source is not None:
        k1 = k1 + source
    k2 = op(V + (sign * h / 2.0) * k1, env3[:, 1])
    if source is not None:
        k2 = k2 + source
    k3 = op(V + (sign * h / 2.0) * k2, env3[:, 1])
    if source is not None:
        k3 = k3 + source
    k4 = op(V + (sign * h) * k3, env3[:, 2])
    if source is not None:
        k4 = k4 + source
    return V + (sign * h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# deterministic propagation
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class MeResult:
    """Sampled deterministic evolution (states are full-space matrices)."""

    times: np.ndarray
    states: np.ndarray
    layout: SpaceLayout

    def expectations(self, op: Operator) -> np.ndarray:
        return np.einsum("ij,tji->t", op.mat, self.states)


def _as_compiled(gen, kept_states=None) -> CompiledGenerator:
    if isinstance(gen, CompiledGenerator):
        return gen
    return compile_generator(gen, kept_states)


def _propagate_me(cg: CompiledGenerator, v0: np.ndarray, grid: TimeGrid, *,
                  w: np.ndarray = None, record_stride: int = None,
                  sample_idx=None, trace_tol: float = 1e-3):
    """Shared RK4 driver.

    Returns (samples, y, recorded) where ``samples`` collects v at
    ``sample_idx`` step boundaries, ``y`` is Re(w . v) at every step start
    (when w is given) and ``recorded`` collects v at every ``record_stride``
    steps (for the regression machinery).  v may be a matrix of columns.
    """
    plan = _rk4_plan(cg, grid)
    n = grid.n_steps
    V = np.array(v0, dtype=complex, copy=True)
    single = V.ndim == 1
    diag = cg.diag_positions

    sample_set = {} if sample_idx is None else {int(k): None for k in sample_idx}
    samples = {}
    y = np.empty(n) if w is not None else None
    recorded = {}

    def stash(k):
        if k in sample_set:
            samples[k] = V.copy()
        if record_stride is not None and k % record_stride == 0:
            recorded[k] = V.copy()

    def check(k):
        tr = V[diag].sum(axis=0) if not single else V[diag].sum()
        bad = not np.all(np.isfinite(np.atleast_1d(tr)))
        if not bad:
            bad = np.max(np.abs(np.atleast_1d(tr) - 1.0)) > trace_tol
        if bad:
            raise NumericalInstabilityError(
                f"trace drift beyond {trace_tol:g} at step {k} "
                f"(t = {grid.t0 + k * grid.dt:.6g}); reduce dt"
            )

    stash(0)
    for k in range(n):
        if w is not None:
            y[k] = float(np.real(w @ V)) if single else (w @ V).real
        for j in range(int(plan.offsets[k]), int(plan.offsets[k + 1])):
            V = _rk4_substep(cg, V, plan.env[:, :, j], plan.h[k])
        if (k + 1) % 512 == 0 or k == n - 1:
            check(k + 1)
        stash(k + 1)
    return samples, y, recorded


def evolve_me(gen, rho0, grid: TimeGrid, *, kept_states=None) -> MeResult:
    """Integrate rho' = L(t) rho and record samples on the grid.

    ``rho0`` may be a matrix or a DensityMatrix.  Recorded samples are
    re-Hermitised (roundoff only; the scheme preserves both trace and
    Hermiticity structurally) and validated for trace drift.
    """
    cg = _as_compiled(gen, kept_states)
    rho0 = qops._as_matrix(rho0)
    v0 = cg.restrict_vector(rho0.reshape(-1))
    idx = grid.sample_indices()
    samples, _, _ = _propagate_me(cg, v0, grid, sample_idx=idx)
    d = cg.dim
    states = np.empty((len(idx), cg.full_dim, cg.full_dim), dtype=complex)
    for row, k in enumerate(idx):
        m = samples[k].reshape(d, d)
        m = 0.5 * (m + m.conj().T)
        states[row] = cg.expand_matrix(m)
    return MeResult(grid.t0 + grid.dt * idx, states, cg.layout)


def mean_signal_curve(gen, meas_op: Operator, eta: float, phi: float,
                      rho0, grid: TimeGrid, *, kept_states=None):
    """sqrt(eta) <y>(t) at every step start from the deterministic evolution.

    This is the expected homodyne current without its noise floor — the
    template a matched filter should take.
    """
    cg = _as_compiled(gen, kept_states)
    cm = compile_measurement(meas_op, phi, cg.kept_states)
    v0 = cg.restrict_vector(qops._as_matrix(rho0).reshape(-1))
    _, y, _ = _propagate_me(cg, v0, grid, w=cm.w)
    return grid.times()[:-1], np.sqrt(eta) * y


def excitation_probability(wavepacket, omega_p: float, *, delta01=0.0,
                           delta12=0.0, gamma12=2.0, n_control=1,
                           grid: TimeGrid = None):
    """P1(t) of a single atom absorbing (or not) the control photon.

    ``wavepacket`` selects the photon shape; with n_control = 0 the source is
    left empty and P1 stays 0.  Returns (times, P1 samples).
    """
    if wavepacket is None:
        kappa = 0.0
        t_lo, t_hi = 0.0, 10.0
    else:
        kappa = kappa_of_t(wavepacket)
        t_lo, t_hi = wavepacket.support
    model = slh.single_transmon_network(delta01=delta01, delta12=delta12,
                                        gamma12=gamma12, omega_p=omega_p,
                                        kappa=kappa)
    if grid is None:
        span = t_hi - t_lo
        grid = TimeGrid(t_lo - 0.02 * span - 0.5, t_hi + 8.0, 1e-3, sample_stride=5)
    kept = states_with_count_at_most(model.layout, ((0, 1), (0, 1, 1)), 1)
    res = evolve_me(model.generator, model.initial_state(n_control), grid,
                    kept_states=kept)
    proj = qops.embed(qops.transition(3, 1, 1), "t1", model.layout)
    p1 = res.expectations(proj).real
    return res.times, p1


# ---------------------------------------------------------------------------
# stochastic propagation
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class HomodyneRecord:
    """One diffusive measurement record: j(t) per step at step starts."""

    times: np.ndarray
    j: np.ndarray
    seed: int
    eta: float
    phi: float
    dt: float


@dataclass(eq=False)
class TrajectoryResult:
    n_control: int
    seed: int
    S: float
    populations: np.ndarray


def _draw_increments(seed: int, n_steps: int, dt: float) -> np.ndarray:
    """Wiener increments for one trajectory: Philox keyed by the seed."""
    rng = np.random.Generator(np.random.Philox(int(seed)))
    return rng.standard_normal(n_steps) * math.sqrt(dt)


def _sme_block(cg: CompiledGenerator, cm: CompiledMeasurement, v0: np.ndarray,
               grid: TimeGrid, seeds: np.ndarray, eta: float,
               filter_values: np.ndarray = None, *, plan: _StepPlan = None,
               record_j: bool = False, mean_accum_idx=None,
               trace_tol: float = 1e-3):
    """Euler-Maruyama over a batch of trajectories (columns).

    Per outer step: Euler drift substeps from the step-start state, then the
    diffusive kick sqrt(eta) (klin v - <y> v) dW evaluated at the same
    step-start state (Ito), then trace renormalisation.  When the initial
    state is a fixed point of every block and of the back-action, all matrix
    work is skipped; the bookkeeping below is bit-identical either way.
    """
    if plan is None:
        plan = _euler_plan(cg, grid)
    n = grid.n_steps
    dt = grid.dt
    B = len(seeds)
    V = np.repeat(v0[:, None], B, axis=1)
    diag = cg.diag_positions
    sqrt_eta = math.sqrt(eta)

    moving = False
    probe_env = np.max(np.abs(plan.env), axis=1) if plan.env.size else \
        np.zeros(len(cg.group_mats))
    if np.max(np.abs(cg.const @ v0), initial=0.0) > 0.0:
        moving = True
    for g, mat in enumerate(cg.group_mats):
        if probe_env[g] != 0.0 and np.max(np.abs(mat @ v0), initial=0.0) > 0.0:
            moving = True
    if eta > 0.0:
        y0 = float(np.real(cm.w @ v0))
        if y0 != 0.0 or np.max(np.abs(cm.klin @ v0), initial=0.0) > 0.0:
            moving = True

    dW = np.empty((n, B))
    for b, seed in enumerate(seeds):
        dW[:, b] = _draw_increments(seed, n, dt)

    S = np.zeros(B) if filter_values is not None else None
    j_rec = np.empty((n, B)) if record_j else None
    mean_acc = {}

    if mean_accum_idx is not None and 0 in mean_accum_idx:
        mean_acc[0] = V.sum(axis=1)

    y = cm.y_expect(V)
    for k in range(n):
        if moving:
            y = cm.y_expect(V)
            kick = cm.klin @ V - V * y[None, :]
            for s in range(int(plan.offsets[k]), int(plan.offsets[k + 1])):
                h = plan.h[k]
                V = V + h * cg.apply(V, plan.env[:, s] if plan.env.size else ())
            V = V + (sqrt_eta * dW[k]) * kick
            tr = V[diag].sum(axis=0).real
            viol = ~np.isfinite(tr) | (np.abs(tr - 1.0) > max(trace_tol, 50.0 * dt))
            if np.any(viol):
                bad = int(np.argmax(viol))
                raise NumericalInstabilityError(
                    f"trajectory seed {int(seeds[bad])} unstable at step {k}"
                )
            V = V / tr[None, :]
        sig = sqrt_eta * y * dt
        if record_j:
            j_rec[k] = sqrt_eta * y + dW[k] / dt
        if S is not None and filter_values[k] != 0.0:
            S += filter_values[k] * (sig + dW[k])
        if mean_accum_idx is not None and (k + 1) in mean_accum_idx:
            mean_acc[k + 1] = V.sum(axis=1)

    pops = V[diag].T.real
    return S, pops, j_rec, mean_acc


def evolve_sme(gen, meas_op: Operator, eta: float, phi: float, rho0,
               grid: TimeGrid, seed: int, *, kept_states=None):
    """Single homodyne trajectory: (sampled states, HomodyneRecord).

    dρ = L ρ dt + sqrt(eta) M[c] ρ dW with dW ~ Normal(0, dt) drawn from a
    Philox stream keyed by ``seed``; the record is
    j_k = sqrt(eta) <y>(t_k) + dW_k / dt.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    cg = _as_compiled(gen, kept_states)
    cm = compile_measurement(meas_op, phi, cg.kept_states)
    v0 = cg.restrict_vector(qops._as_matrix(rho0).reshape(-1))
    idx = grid.sample_indices()
    sample_set = set(int(k) for k in idx)

    # the batch kernel with B = 1, collecting per-sample states along the way
    _, _, j_rec, mean_acc = _sme_block(cg, cm, v0, grid, np.array([seed]), eta,
                                       record_j=True, mean_accum_idx=sample_set)
    d = cg.dim
    out_states = np.empty((len(idx), cg.full_dim, cg.full_dim), dtype=complex)
    for row, k in enumerate(idx):
        m = mean_acc[int(k)].reshape(d, d)
        out_states[row] = cg.expand_matrix(0.5 * (m + m.conj().T))
    rec = HomodyneRecord(grid.times()[:-1], j_rec[:, 0], int(seed),
                         float(eta), float(phi), grid.dt)
    return MeResult(grid.t0 + grid.dt * idx, out_states, cg.layout), rec


def _ensemble_payload_run(payload):
    (cg, cm, v0, grid, seeds, eta, fvals, plan, mean_idx) = payload
    S, pops, _, mean_acc = _sme_block(cg, cm, v0, grid, seeds, eta, fvals,
                                      plan=plan, mean_accum_idx=mean_idx)
    return S, pops, mean_acc


def run_ensemble(gen, meas_op: Operator, eta: float, phi: float, rho0,
                 grid: TimeGrid, filter_values: np.ndarray, M: int,
                 base_seed: int, n_control: int, *, kept_states=None,
                 threads: int = 1, collect_mean: bool = False,
                 chunk_target_bytes: float = 48e6):
    """M homodyne trajectories; trajectory i uses seed = base_seed + i.

    ``filter_values`` holds f(t_k) on the step grid (zero outside the
    integration window); every trajectory's integrated signal is
    S = sum_k f_k (sqrt(eta) <y>_k dt + dW_k).  Results are deterministic
    given (config, base_seed) and independent of chunking or thread count.
    Returns (list of TrajectoryResult, mean MeResult or None).
    """
    if M < 1:
        raise ValueError("need at least one trajectory")
    cg = _as_compiled(gen, kept_states)
    cm = compile_measurement(meas_op, phi, cg.kept_states)
    v0 = cg.restrict_vector(qops._as_matrix(rho0).reshape(-1))
    fvals = np.asarray(filter_values, dtype=float)
    if fvals.shape != (grid.n_steps,):
        raise ValueError("filter_values must have one entry per grid step")
    plan = _euler_plan(cg, grid)
    idx = grid.sample_indices()
    mean_idx = set(int(k) for k in idx) if collect_mean else None

    d2 = cg.dim * cg.dim
    B = max(8, min(M, int(chunk_target_bytes / (16 * max(d2, 1))),
                   int(2e7 / max(grid.n_steps, 1))))
    chunks = [(base_seed + lo, min(B, M - lo))
              for lo in range(0, M, B)]
    payloads = [(cg, cm, v0, grid, np.arange(lo, lo + w), eta, fvals, plan,
                 mean_idx) for lo, w in chunks]

    if threads > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=int(threads)) as pool:
            outs = list(pool.map(_ensemble_payload_run, payloads))
    else:
        outs = [_ensemble_payload_run(p) for p in payloads]

    results = []
    mean_states = np.zeros((len(idx), d2), dtype=complex) if collect_mean else None
    for (S, pops, mean_acc), (lo, w) in zip(outs, chunks):
        for b in range(w):
            results.append(TrajectoryResult(
                n_control=int(n_control), seed=int(lo + b),
                S=float(S[b]) if S is not None else float("nan"),
                populations=cg.populations_full(pops[b]),
            ))
        if collect_mean:
            for row, k in enumerate(idx):
                mean_states[row] += mean_acc[int(k)]

    mean_result = None
    if collect_mean:
        d = cg.dim
        states = np.empty((len(idx), cg.full_dim, cg.full_dim), dtype=complex)
        for row in range(len(idx)):
            m = (mean_states[row] / M).reshape(d, d)
            states[row] = cg.expand_matrix(0.5 * (m + m.conj().T))
        mean_result = MeResult(grid.t0 + grid.dt * idx, states, cg.layout)
    return results, mean_result


# ---------------------------------------------------------------------------
# two-time correlations and analytic moments (quantum regression)
# ---------------------------------------------------------------------------

def two_time_correlation(gen, me: MeResult, meas_op: Operator, eta: float,
                         phi: float, t1: float, t2: float, dt: float, *,
                         kept_states=None) -> float:
    """Smooth part of E[j(t1) j(t2)] from the quantum regression theorem.

    Propagates Y = e^{i phi} c rho(min(t1,t2)) + h.c.' forward by |t2 - t1|
    under the same generator and contracts with the measured quadrature.
    The delta(t2 - t1) shot-noise spike is *not* included here; the moment
    integrals account for it analytically.
    """
    ta, tb = (t1, t2) if t1 <= t2 else (t2, t1)
    hits = np.flatnonzero(np.abs(me.times - ta) <= 1e-9 + 1e-9 * abs(ta))
    if len(hits) == 0:
        raise ValueError(f"t = {ta} is not among the evolved samples")
    if not (me.times[0] - 1e-9 <= tb <= me.times[-1] + 1e-9):
        raise ValueError(f"t = {tb} outside the evolved range")
    if eta == 0.0:
        return 0.0
    cg = _as_compiled(gen, kept_states)
    cm = compile_measurement(meas_op, phi, cg.kept_states)
    rho = me.states[hits[0]]
    p = np.exp(1j * phi) * meas_op.mat
    Y = p @ rho + rho @ p.conj().T
    v = cg.restrict_vector(Y.reshape(-1))
    if tb > ta:
        n = max(1, int(round((tb - ta) / dt)))
        span = TimeGrid(ta, ta + n * ((tb - ta) / n), (tb - ta) / n)
        _, _, rec = _propagate_me(cg, v, span, record_stride=span.n_steps,
                                  trace_tol=np.inf)
        v = rec[span.n_steps]
    return float(eta * np.real(cm.w @ v))


@dataclass(frozen=True)
class AnalyticMoments:
    """First and second moments of the filtered signal from the regression
    route, plus the resulting SNR = (E[S1] - E[S0]) / sqrt(Var1 + Var0)."""

    e_s1: float
    var_s1: float
    e_s0: float
    var_s0: float
    snr: float
    window: tuple


def _backward_y1(cg: CompiledGenerator, cm: CompiledMeasurement,
                 grid: TimeGrid, fvals: np.ndarray, i1: int,
                 reg_idx: np.ndarray, reg_states: dict, meas_mat: np.ndarray,
                 phi: float) -> np.ndarray:
    """Adjoint sweep for the smooth part of the second moment.

    Integrates u' = -f w - L^T u backward from t_{i1} (u = 0 there) and
    contracts u with Y(t) = e^{i phi} c rho(t) + h.c.' at every stored
    regression point, returning Re(u . vec Y) per regression index (zero for
    points at or beyond i1).
    """
    sub = TimeGrid(grid.t0, grid.t0 + i1 * grid.dt, grid.dt) if i1 > 0 else None
    out = np.zeros(len(reg_idx))
    if sub is None:
        return out
    plan = _rk4_plan(cg, sub, reverse=True)
    u = np.zeros(cg.dim * cg.dim, dtype=complex)
    p = np.exp(1j * phi) * meas_mat

    def contract(step):
        for ridx in np.flatnonzero(reg_idx == step):
            rho_m = reg_states[step].reshape(cg.dim, cg.dim)
            out[ridx] = float(np.real(u @ _vec_y(cg, rho_m, p)))

    contract(i1)
    # walk steps i1-1 ... 0; plan rows are already ordered for descending time
    for back, k in enumerate(range(i1 - 1, -1, -1)):
        src = fvals[k] * cm.w
        for j in range(int(plan.offsets[back]), int(plan.offsets[back + 1])):
            u = _rk4_substep(cg, u, plan.env[:, :, j], plan.h[back],
                             transposed=True, source=src)
        contract(k)
    return out


def _vec_y(cg: CompiledGenerator, rho_sub: np.ndarray, p_full: np.ndarray):
    if cg.kept_states is not None:
        p = p_full[np.ix_(cg.kept_states, cg.kept_states)]
    else:
        p = p_full
    Y = p @ rho_sub + rho_sub @ p.conj().T
    return Y.reshape(-1)


def _forward_scan(cg, cm, v0, grid, reg_stride):
    samples, y, recorded = _propagate_me(cg, v0, grid, w=cm.w,
                                         record_stride=reg_stride)
    reg_idx = np.array(sorted(recorded.keys()))
    return y, reg_idx, recorded


def _tail_trapz(vals: np.ndarray, xs: np.ndarray, j0: int) -> float:
    if j0 >= len(xs) - 1:
        return 0.0
    return float(_trapz(vals[j0:], xs[j0:]))


def snr_analytic(gen, meas_op: Operator, eta: float, phi: float, rho0,
                 grid: TimeGrid, window, filter_values=None, *,
                 kept_states=None, reg_stride: int = None) -> AnalyticMoments:
    """Signal moments via the deterministic evolution + quantum regression.

    E[S1] integrates the expected current against the filter; E[S1^2] adds
    the double time integral of the smooth two-time correlation (evaluated
    with one adjoint sweep) to the shot-noise floor int f^2 dt, which is what
    the delta part of the correlation contributes exactly.  For the square
    filter Var[S0] = t_m identically.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    cg = _as_compiled(gen, kept_states)
    cm = compile_measurement(meas_op, phi, cg.kept_states)
    v0 = cg.restrict_vector(qops._as_matrix(rho0).reshape(-1))
    n = grid.n_steps
    i0, i1 = grid.step_index(window[0]), grid.step_index(window[1])
    if i1 <= i0:
        raise ValueError("window must have positive length")

    if filter_values is None:
        fvals = np.zeros(n)
        fvals[i0:i1] = 1.0
    else:
        fvals = np.asarray(filter_values, dtype=float).copy()
        if fvals.shape != (n,):
            raise ValueError("filter_values must have one entry per grid step")
        fvals[:i0] = 0.0
        fvals[i1:] = 0.0

    if reg_stride is None:
        reg_stride = max(1, (i1 - i0) // 400)
    y, reg_idx, reg_states = _forward_scan(cg, cm, v0, grid, reg_stride)

    e_s1 = math.sqrt(eta) * float(np.sum(fvals * y) * grid.dt)
    shot = float(np.sum(fvals**2) * grid.dt)

    y1 = _backward_y1(cg, cm, grid, fvals, i1, reg_idx, reg_states,
                      meas_op.mat, phi)
    in_win = (reg_idx >= i0) & (reg_idx <= i1)
    xs = grid.t0 + grid.dt * reg_idx[in_win]
    f_reg = fvals[np.minimum(reg_idx[in_win], n - 1)]
    smooth = 2.0 * eta * float(_trapz(f_reg * y1[in_win], xs))

    var_s1 = smooth + shot - e_s1**2
    var_s0 = shot
    snr = e_s1 / math.sqrt(var_s1 + var_s0)
    return AnalyticMoments(e_s1, var_s1, 0.0, var_s0, snr,
                           (grid.t0 + i0 * grid.dt, grid.t0 + i1 * grid.dt))


def snr_window_scan(gen, meas_op: Operator, eta: float, phi: float, rho0,
                    grid: TimeGrid, windows, *, kept_states=None,
                    reg_stride: int = None) -> np.ndarray:
    """Square-filter SNR for many candidate windows, sharing the heavy work.

    One forward scan total and one adjoint sweep per distinct window end;
    every window start then costs only partial sums.
    """
    cg = _as_compiled(gen, kept_states)
    cm = compile_measurement(meas_op, phi, cg.kept_states)
    v0 = cg.restrict_vector(qops._as_matrix(rho0).reshape(-1))
    n = grid.n_steps
    pairs = [(grid.step_index(a), grid.step_index(b)) for a, b in windows]
    if any(b <= a for a, b in pairs):
        raise ValueError("every candidate window needs positive length")
    if reg_stride is None:
        reg_stride = max(1, n // 600)
    y, reg_idx, reg_states = _forward_scan(cg, cm, v0, grid, reg_stride)
    cum_y = np.concatenate([[0.0], np.cumsum(y) * grid.dt])
    reg_times = grid.t0 + grid.dt * reg_idx

    out = np.empty(len(pairs))
    for i1 in sorted({i1 for _, i1 in pairs}):
        fvals = np.zeros(n)
        fvals[:i1] = 1.0
        y1 = _backward_y1(cg, cm, grid, fvals, i1, reg_idx, reg_states,
                          meas_op.mat, cm.phi)
        for w_i, (a, b) in enumerate(pairs):
            if b != i1:
                continue
            e_s1 = math.sqrt(eta) * (cum_y[b] - cum_y[a])
            tm = (b - a) * grid.dt
            j0 = int(np.searchsorted(reg_idx, a))
            smooth = 2.0 * eta * _tail_trapz(y1, reg_times, j0)
            var_s1 = smooth + tm - e_s1**2
            out[w_i] = e_s1 / math.sqrt(max(var_s1 + tm, 1e-300))
    return out
