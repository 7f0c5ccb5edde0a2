"""(S, L, H) triple calculus and construction of cascaded network generators.

A subsystem with n input-output channels is described by a scattering matrix
S (restricted here to c-numbers — every network we build has identity
blocks), a vector L of channel coupling operators, and a Hamiltonian H.
Time dependence enters exclusively through real scalar envelopes multiplying
constant operators, so the composition products stay closed: products of
envelopes are envelopes.

Composition rules for triples G = (S, L, H):

    series(G2, G1) = (S2 S1, S2 L1 + L2, H1 + H2 + (1/2i)(L2' S2 L1 - h.c.))
    concat(G2, G1) = (diag(S2, S1), (L2, L1), H2 + H1)

(' denotes the adjoint).  ``series`` feeds the output of G1 into G2, which is
what a circulator enforces physically; the induced Hamiltonian correction is
the energy exchanged in the unidirectional coupling.

``me_from_slh`` turns a triple into the Lindblad generator
rho' = -i[H, rho] + sum_i D[L_i] rho.  The independently assembled
``explicit_cascaded_generator`` builds the same physics term by term
(per-transmon dissipators plus cascade coupling superoperators); agreement
between the two routes on random states is the central structural test of
this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qops
from .qops import Operator, SpaceLayout, embed, transition, lowering
from .sources import Kappa

__all__ = [
    "Envelope",
    "CONSTANT",
    "CouplingTerm",
    "HamiltonianSpec",
    "SlhTriple",
    "Generator",
    "series",
    "concat",
    "identity_triple",
    "me_from_slh",
    "transmon_triple",
    "cavity_source_triple",
    "coherent_drive_triple",
    "cascade_transmons",
    "explicit_cascaded_generator",
    "jc_unit_generator",
    "jc_probe_output_op",
    "NetworkModel",
    "single_transmon_network",
    "cascade_network",
    "jc_unit_network",
    "cascade_layout",
]


# ---------------------------------------------------------------------------
# scalar time envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    """Real scalar function of time, represented as a product of atoms.

    ``atoms`` is a sorted tuple of hashable keys identifying the factors;
    generators compiled for fast stepping group superoperator terms by these
    keys, so two occurrences of the same physical modulation (e.g. the
    sqrt(kappa(t)) of one wavepacket) share a single evaluation.  The empty
    product is the constant 1.
    """

    atoms: tuple = ()
    fns: tuple = ()

    def __call__(self, t):
        out = None
        for fn in self.fns:
            v = fn(t)
            out = v if out is None else out * v
        if out is None:
            t = np.asarray(t, dtype=float)
            return np.ones(t.shape) if t.ndim else 1.0
        return out

    @property
    def is_constant(self) -> bool:
        return not self.atoms

    def __mul__(self, other):
        if not isinstance(other, Envelope):
            return NotImplemented
        if not other.atoms:
            return self
        if not self.atoms:
            return other
        pairs = sorted(
            zip(self.atoms + other.atoms, self.fns + other.fns),
            key=lambda p: repr(p[0]),
        )
        return Envelope(tuple(a for a, _ in pairs), tuple(f for _, f in pairs))


CONSTANT = Envelope()


def envelope_from_callable(fn, key) -> Envelope:
    """Wrap a plain callable as a single-atom envelope with grouping key."""
    return Envelope((key,), (fn,))


# ---------------------------------------------------------------------------
# coupling terms and channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CouplingTerm:
    """One (envelope x constant operator) summand of a channel coupling.

    Complex constants (drive amplitudes, sqrt-rates) are folded into the
    operator; envelopes are real-valued.
    """

    op: Operator
    env: Envelope = CONSTANT


# A channel coupling operator is a sum of terms; the empty tuple is the
# zero coupling (used by the identity triple).
Channel = tuple


def _scale_channel(s: complex, channel: Channel) -> Channel:
    if s == 0:
        return ()
    if s == 1:
        return channel
    return tuple(CouplingTerm(s * term.op, term.env) for term in channel)


def channel_matrix(channel: Channel, t, dim: int) -> np.ndarray:
    """Evaluate the summed channel coupling operator at time t."""
    out = np.zeros((dim, dim), dtype=complex)
    for term in channel:
        out += float(term.env(t)) * term.op.mat
    return out


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """H(t) = sum_k env_k(t) * op_k with Hermitian constant operators."""

    layout: SpaceLayout
    terms: tuple = ()  # of (Envelope, Operator)

    def __post_init__(self):
        for env, op in self.terms:
            if op.layout != self.layout:
                raise ValueError("Hamiltonian term layout mismatch")
            if not op.is_hermitian(tol=1e-10):
                raise ValueError("non-Hermitian Hamiltonian term")

    def value(self, t) -> np.ndarray:
        h = np.zeros((self.layout.dim, self.layout.dim), dtype=complex)
        for env, op in self.terms:
            h += float(env(t)) * op.mat
        return h

    def __add__(self, other: "HamiltonianSpec") -> "HamiltonianSpec":
        if other.layout != self.layout:
            raise ValueError("cannot add Hamiltonians on different layouts")
        return HamiltonianSpec(self.layout, self.terms + other.terms)

    @classmethod
    def constant(cls, op: Operator) -> "HamiltonianSpec":
        return cls(op.layout, ((CONSTANT, op),))

    @classmethod
    def zero(cls, layout: SpaceLayout) -> "HamiltonianSpec":
        return cls(layout, ())


# ---------------------------------------------------------------------------
# triples
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SlhTriple:
    """Scattering matrix, channel couplings, Hamiltonian on one layout."""

    S: np.ndarray
    L: tuple  # of Channel
    H: HamiltonianSpec
    layout: SpaceLayout

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=complex))
        object.__setattr__(self, "S", S)
        n = S.shape[0]
        if S.shape != (n, n):
            raise ValueError(f"scattering matrix must be square, got {S.shape}")
        if n and np.max(np.abs(S @ S.conj().T - np.eye(n))) > 1e-10:
            raise ValueError("scattering matrix is not unitary")
        if len(self.L) != n:
            raise ValueError(
                f"channel count mismatch: S is {n}x{n} but L has {len(self.L)} entries"
            )
        for channel in self.L:
            for term in channel:
                if term.op.layout != self.layout:
                    raise ValueError("coupling operator layout mismatch")
        if self.H.layout != self.layout:
            raise ValueError("Hamiltonian layout mismatch")

    @property
    def n_channels(self) -> int:
        return self.S.shape[0]


def identity_triple(n_channels: int, layout: SpaceLayout) -> SlhTriple:
    """The passive n-channel triple (I, 0, 0): series identity element."""
    return SlhTriple(
        np.eye(n_channels, dtype=complex),
        tuple(() for _ in range(n_channels)),
        HamiltonianSpec.zero(layout),
        layout,
    )


def series(g2: SlhTriple, g1: SlhTriple) -> SlhTriple:
    """Feed every output channel of g1 into the matching input of g2."""
    if g1.layout != g2.layout:
        raise ValueError("series requires triples on the same layout (embed first)")
    if g1.n_channels != g2.n_channels:
        raise ValueError(
            f"channel-count mismatch: {g2.n_channels} vs {g1.n_channels}"
        )
    n = g1.n_channels
    S = g2.S @ g1.S

    L = []
    for i in range(n):
        terms: list = []
        for j in range(n):
            terms.extend(_scale_channel(g2.S[i, j], g1.L[j]))
        terms.extend(g2.L[i])
        L.append(tuple(terms))

    # interaction picked up by the unidirectional coupling:
    # (1/2i)(L2' S2 L1 - L1' S2' L2)
    h_terms = list(g1.H.terms) + list(g2.H.terms)
    for i in range(n):
        for a in g2.L[i]:
            for j in range(n):
                s = g2.S[i, j]
                if s == 0:
                    continue
                for b in g1.L[j]:
                    cross = s * (a.op.mat.conj().T @ b.op.mat)
                    op = Operator(g1.layout, (cross - cross.conj().T) / 2j)
                    h_terms.append((a.env * b.env, op))

    return SlhTriple(S, tuple(L), HamiltonianSpec(g1.layout, tuple(h_terms)), g1.layout)


def concat(g2: SlhTriple, g1: SlhTriple) -> SlhTriple:
    """Stack channels: g2's channels first, then g1's; Hamiltonians add."""
    if g1.layout != g2.layout:
        raise ValueError("concat requires triples on the same layout (embed first)")
    n2, n1 = g2.n_channels, g1.n_channels
    S = np.zeros((n2 + n1, n2 + n1), dtype=complex)
    S[:n2, :n2] = g2.S
    S[n2:, n2:] = g1.S
    return SlhTriple(S, tuple(g2.L) + tuple(g1.L), g2.H + g1.H, g1.layout)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Generator:
    """Structured Liouvillian: rho' = -i[H, rho] + sum_i D[C_i(t)] rho
    - sum_pairs e1(t) e2(t) S[op1, op2] rho.

    Each dissipator entry is a channel (sum of envelope x operator terms); the
    Lindblad superoperator acts on the *summed* channel operator, so cross
    terms between summands are included.  Each coupling pair (c1, c2), with c1
    upstream, contributes minus the cascade superoperator
    S[c1, c2] rho = [c2', c1 rho] + [rho c1', c2] scaled by both envelopes.
    """

    hamiltonian: HamiltonianSpec
    dissipators: tuple  # of Channel
    couplings: tuple = ()  # of (CouplingTerm, CouplingTerm)
    layout: SpaceLayout = None

    def __post_init__(self):
        if self.layout is None:
            object.__setattr__(self, "layout", self.hamiltonian.layout)

    def apply(self, t, rho) -> np.ndarray:
        """Reference dense evaluation of d(rho) at time t."""
        rho = qops._as_matrix(rho)
        h = self.hamiltonian.value(t)
        out = -1j * (h @ rho - rho @ h)
        dim = self.layout.dim
        for channel in self.dissipators:
            if not channel:
                continue
            c = channel_matrix(channel, t, dim)
            out += qops.dissipator(c, rho)
        for c1, c2 in self.couplings:
            e = float(c1.env(t)) * float(c2.env(t))
            if e == 0.0:
                continue
            out -= e * qops.coupling_super(c1.op, c2.op, rho)
        return out


def me_from_slh(g: SlhTriple) -> Generator:
    """Lindblad generator of a triple: -i[H, rho] + sum_i D[L_i] rho."""
    dissipators = tuple(ch for ch in g.L if ch)
    return Generator(g.H, dissipators, (), g.layout)


# ---------------------------------------------------------------------------
# component triples
# ---------------------------------------------------------------------------

def _single_layout(dim: int, label: str) -> SpaceLayout:
    return SpaceLayout((dim,), (label,))


def _sqrt_kappa_term(kappa, a_op: Operator) -> CouplingTerm:
    """Coupling term sqrt(kappa(t)) * a for constant or modulated kappa."""
    if isinstance(kappa, Kappa):
        env = envelope_from_callable(kappa.amplitude, ("sqrt_kappa",) + kappa.key)
        return CouplingTerm(a_op, env)
    if callable(kappa):
        def amp(t, _k=kappa):
            v = np.asarray(_k(t), dtype=float)
            if np.any(v < 0):
                raise ValueError("kappa(t) must be nonnegative")
            return np.sqrt(v)

        env = envelope_from_callable(amp, ("sqrt_kappa", f"callable_{id(kappa):x}"))
        return CouplingTerm(a_op, env)
    k = float(kappa)
    if k < 0:
        raise ValueError("constant kappa must be nonnegative")
    return CouplingTerm(np.sqrt(k) * a_op)


def transmon_triple(delta01: float, delta12: float, gamma01: float,
                    gamma12: float, omega_p: float, *,
                    layout: SpaceLayout = None, subsystem=None) -> SlhTriple:
    """Three-level atom with channel couplings (L01, L12).

    L_ij = sqrt(Gamma_ij) |i><j| and
    H = -Delta01 |0><0| + Delta12 |2><2| + Omega_p (L12 + L21).
    The probe drive Omega_p multiplies the *coupling* operator, i.e. carries
    the sqrt(Gamma12) factor.  Pass omega_p=0 when the probe is routed in as
    a coherent field channel of the surrounding network instead.
    """
    if gamma01 < 0 or gamma12 < 0:
        raise ValueError("decay rates must be nonnegative")
    if layout is None:
        layout = _single_layout(3, "t1")
        subsystem = "t1"
    if subsystem is None:
        raise ValueError("subsystem required when embedding into a shared layout")

    l01 = embed(np.sqrt(gamma01) * transition(3, 0, 1), subsystem, layout)
    l12 = embed(np.sqrt(gamma12) * transition(3, 1, 2), subsystem, layout)
    h = (-delta01) * embed(transition(3, 0, 0), subsystem, layout) \
        + delta12 * embed(transition(3, 2, 2), subsystem, layout)
    if omega_p != 0.0:
        h = h + omega_p * (l12 + l12.dag())

    return SlhTriple(
        np.eye(2, dtype=complex),
        ((CouplingTerm(l01),), (CouplingTerm(l12),)),
        HamiltonianSpec.constant(h),
        layout,
    )


def cavity_source_triple(kappa, *, layout: SpaceLayout = None,
                         subsystem=None) -> SlhTriple:
    """Photon source: a two-level cavity with tunable output coupling.

    G = (1, sqrt(kappa(t)) a, 0).  Two levels are exact here because the
    source starts with at most one photon and only decays.
    """
    if layout is None:
        layout = _single_layout(2, "src")
        subsystem = "src"
    if subsystem is None:
        raise ValueError("subsystem required when embedding into a shared layout")
    a = embed(lowering(2), subsystem, layout)
    return SlhTriple(
        np.eye(1, dtype=complex),
        ((_sqrt_kappa_term(kappa, a),),),
        HamiltonianSpec.zero(layout),
        layout,
    )


def coherent_drive_triple(alpha_p: complex, *, layout: SpaceLayout = None) -> SlhTriple:
    """Classical coherent field in one channel: G = (1, alpha_p, 0).

    The coupling is the c-number alpha_p times the identity; cascading it
    into an atom produces the usual drive Hamiltonian.
    """
    if layout is None:
        layout = _single_layout(1, "vac")
    op = Operator(layout, complex(alpha_p) * np.eye(layout.dim, dtype=complex))
    channel = (CouplingTerm(op),) if alpha_p != 0 else ()
    return SlhTriple(
        np.eye(1, dtype=complex),
        (channel,),
        HamiltonianSpec.zero(layout),
        layout,
    )


# ---------------------------------------------------------------------------
# cascaded networks
# ---------------------------------------------------------------------------

def cascade_layout(n: int) -> SpaceLayout:
    """Source cavity followed by n three-level atoms."""
    if n < 1:
        raise ValueError("need at least one transmon")
    return SpaceLayout((2,) + (3,) * n, ("src",) + tuple(f"t{k+1}" for k in range(n)))


def _per_transmon(x, n: int) -> tuple:
    vals = np.broadcast_to(np.asarray(x, dtype=float), (n,))
    return tuple(float(v) for v in vals)


def cascade_transmons(n: int, *, delta01=0.0, delta12=0.0, gamma01=1.0,
                      gamma12=2.0, kappa=None, alpha_p=0.0) -> SlhTriple:
    """Unidirectional chain: source cavity and probe field feeding n atoms.

    Built as transmon_n <| ... <| transmon_1 <| (source (+) drive), so channel
    1 carries sqrt(kappa(t)) a + sum_k L01^(k) and channel 2 carries
    alpha_p + sum_k L12^(k).  The atoms are constructed without an internal
    probe term: the drive alpha_p = i Omega_p rides in on channel 2, and the
    series product distributes it onto every atom (half through the induced
    Hamiltonian corrections, half through the channel dissipator), which
    reproduces the standard per-atom Omega_p (L12 + L21) drive exactly.
    Per-transmon parameters may be scalars or length-n sequences.
    """
    if n < 1:
        raise ValueError("need at least one transmon")
    if kappa is None:
        kappa = 0.0
    layout = cascade_layout(n)
    d01 = _per_transmon(delta01, n)
    d12 = _per_transmon(delta12, n)
    g01 = _per_transmon(gamma01, n)
    g12 = _per_transmon(gamma12, n)

    acc = concat(
        cavity_source_triple(kappa, layout=layout, subsystem="src"),
        coherent_drive_triple(alpha_p, layout=layout),
    )
    for k in range(n):
        tr = transmon_triple(d01[k], d12[k], g01[k], g12[k], 0.0,
                             layout=layout, subsystem=f"t{k+1}")
        acc = series(tr, acc)
    return acc


def explicit_cascaded_generator(n: int, *, delta01=0.0, delta12=0.0,
                                gamma01=1.0, gamma12=2.0, kappa=None,
                                omega_p=0.0) -> Generator:
    """Cascaded master equation assembled term by term.

    rho' = -i[H_eff, rho] + sum_k (D[L01^k] + D[L12^k]) rho + kappa(t) D[a] rho
           - sqrt(kappa(t)) S[a, sum_k L01^k] rho
           - sum_{j<k} (S[L01^j, L01^k] + S[L12^j, L12^k]) rho,

    H_eff = sum_k (-Delta01^k |0><0|_k + Delta12^k |2><2|_k
                   + Omega_p (L12^k + L21^k)).

    This deliberately shares no construction code with the composition
    products above; it is the independent oracle they are tested against.
    """
    if n < 1:
        raise ValueError("need at least one transmon")
    if kappa is None:
        kappa = 0.0
    layout = cascade_layout(n)
    d01 = _per_transmon(delta01, n)
    d12 = _per_transmon(delta12, n)
    g01 = _per_transmon(gamma01, n)
    g12 = _per_transmon(gamma12, n)

    a = embed(lowering(2), "src", layout)
    l01 = [embed(np.sqrt(g01[k]) * transition(3, 0, 1), f"t{k+1}", layout)
           for k in range(n)]
    l12 = [embed(np.sqrt(g12[k]) * transition(3, 1, 2), f"t{k+1}", layout)
           for k in range(n)]

    h = Operator(layout, np.zeros((layout.dim, layout.dim), dtype=complex))
    for k in range(n):
        h = h + (-d01[k]) * embed(transition(3, 0, 0), f"t{k+1}", layout) \
            + d12[k] * embed(transition(3, 2, 2), f"t{k+1}", layout)
        if omega_p != 0.0:
            h = h + omega_p * (l12[k] + l12[k].dag())

    dissipators = [(CouplingTerm(op),) for op in l01]
    dissipators += [(CouplingTerm(op),) for op in l12]
    source_term = _sqrt_kappa_term(kappa, a)
    dissipators.append((source_term,))

    lam01 = l01[0]
    for op in l01[1:]:
        lam01 = lam01 + op
    couplings = [(source_term, CouplingTerm(lam01))]
    for j in range(n):
        for k in range(j + 1, n):
            couplings.append((CouplingTerm(l01[j]), CouplingTerm(l01[k])))
            couplings.append((CouplingTerm(l12[j]), CouplingTerm(l12[k])))

    return Generator(HamiltonianSpec.constant(h), tuple(dissipators),
                     tuple(couplings), layout)


# ---------------------------------------------------------------------------
# probe-cavity unit
# ---------------------------------------------------------------------------

def jc_layout(n_b_trunc: int) -> SpaceLayout:
    return SpaceLayout((2, 3, int(n_b_trunc)), ("src", "t1", "cav"))


def jc_unit_generator(delta1: float, delta2: float, drive: float, g: float,
                      gamma01: float, gamma12: float, kappa_a, kappa_b: float,
                      n_b_trunc: int = 10) -> Generator:
    """Atom + probe cavity unit fed by the photon source.

    H = delta1 |1><1| + (delta1 + delta2)|2><2| - i E (b - b')
        - i g (b s21 - b' s12),
    rho' = -i[H, rho] + (D[L01] + D[L12]) rho + kappa_a(t) D[a] rho
           + kappa_b D[b] rho - sqrt(kappa_a(t)) S[a, L01] rho.

    With g = 0 the driven cavity relaxes to a coherent state with
    <b> = +2E/kappa_b: from the equation above, d<b>/dt = E - (kappa_b/2)<b>
    (the -iE(b - b') drive convention fixes the sign).  Layout is
    source (2) x atom (3) x probe cavity (n_b_trunc); convergence in the
    truncation should be checked by doubling n_b_trunc.
    """
    if n_b_trunc < 2:
        raise ValueError("probe cavity needs at least 2 levels")
    if gamma01 < 0 or gamma12 < 0 or kappa_b < 0:
        raise ValueError("rates must be nonnegative")
    layout = jc_layout(n_b_trunc)

    a = embed(lowering(2), "src", layout)
    b = embed(lowering(n_b_trunc), "cav", layout)
    l01 = embed(np.sqrt(gamma01) * transition(3, 0, 1), "t1", layout)
    l12 = embed(np.sqrt(gamma12) * transition(3, 1, 2), "t1", layout)
    s12 = embed(transition(3, 1, 2), "t1", layout)

    h = delta1 * embed(transition(3, 1, 1), "t1", layout) \
        + (delta1 + delta2) * embed(transition(3, 2, 2), "t1", layout)
    h = h + (-1j * float(drive)) * (b - b.dag())
    h = h + (-1j * float(g)) * (b @ s12.dag() - b.dag() @ s12)

    source_term = _sqrt_kappa_term(kappa_a, a)
    dissipators = (
        (CouplingTerm(l01),),
        (CouplingTerm(l12),),
        (source_term,),
        (CouplingTerm(np.sqrt(kappa_b) * b),),
    )
    couplings = ((source_term, CouplingTerm(l01)),)
    return Generator(HamiltonianSpec.constant(h), dissipators, couplings, layout)


def jc_probe_output_op(layout: SpaceLayout, kappa_b: float) -> Operator:
    """Measured output operator of the probe cavity, sqrt(kappa_b) b."""
    return np.sqrt(kappa_b) * embed(lowering(layout.dims[layout.index("cav")]),
                                    "cav", layout)


# ---------------------------------------------------------------------------
# assembled models (generator + measured operator + initial states)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NetworkModel:
    """Everything the propagators need for one detector setup."""

    generator: Generator
    meas_op: Operator
    layout: SpaceLayout

    def initial_state(self, n_control: int) -> np.ndarray:
        """Density matrix with n_control photons in the source, rest ground."""
        if n_control not in (0, 1):
            raise ValueError("the control field carries 0 or 1 photon")
        occ = [int(n_control)] + [0] * (len(self.layout.dims) - 1)
        return qops.pure_dm(qops.basis_ket(self.layout, occ))


def control_band_weights(layout: SpaceLayout) -> tuple:
    """Level weights counting excitations in the control band.

    The source photon plus any transmon promoted out of |0> make up a
    conserved count for every network built here (the probe only moves
    population between |1> and |2>, both of which hold one control quantum;
    the probe cavity holds none).  Feeding these weights to
    dynamics.states_with_count_at_most restricts the evolution to the block
    actually reachable from n <= 1 initial states.
    """
    out = []
    for dim, label in zip(layout.dims, layout.labels):
        if label == "src":
            out.append((0,) + (1,) * (dim - 1))
        elif label.startswith("t"):
            out.append((0,) + (1,) * (dim - 1))
        else:
            out.append((0,) * dim)
    return tuple(out)


def _collective_probe_op(layout: SpaceLayout, gamma12s) -> Operator:
    total = np.zeros((layout.dim, layout.dim), dtype=complex)
    for k, g12 in enumerate(gamma12s):
        total += embed(np.sqrt(g12) * transition(3, 1, 2), f"t{k+1}", layout).mat
    return Operator(layout, total)


def single_transmon_network(*, delta01=0.0, delta12=0.0, gamma12=2.0,
                            omega_p=0.35, kappa) -> NetworkModel:
    """One atom at the end of a line, probe drive in the Hamiltonian.

    The monitored operator is L12; the measured current reads the change the
    control photon imprints on the scattered probe.
    """
    layout = cascade_layout(1)
    tr = transmon_triple(delta01, delta12, 1.0, gamma12, omega_p,
                         layout=layout, subsystem="t1")
    src = concat(
        cavity_source_triple(kappa, layout=layout, subsystem="src"),
        coherent_drive_triple(0.0, layout=layout),
    )
    gen = me_from_slh(series(tr, src))
    meas = _collective_probe_op(layout, (gamma12,))
    return NetworkModel(gen, meas, layout)


def cascade_network(n: int, *, delta01=0.0, delta12=0.0, gamma01=1.0,
                    gamma12=2.0, omega_p=0.35, kappa) -> NetworkModel:
    """n cascaded atoms; the probe rides in as the field alpha_p = i Omega_p."""
    triple = cascade_transmons(n, delta01=delta01, delta12=delta12,
                               gamma01=gamma01, gamma12=gamma12, kappa=kappa,
                               alpha_p=1j * float(omega_p))
    gen = me_from_slh(triple)
    meas = _collective_probe_op(triple.layout, _per_transmon(gamma12, n))
    return NetworkModel(gen, meas, triple.layout)


def jc_unit_network(*, delta1=0.0, delta2=0.0, drive, g, gamma01=1.0,
                    gamma12=0.1, kappa_a, kappa_b, n_b_trunc=10) -> NetworkModel:
    """Atom + probe cavity unit; the monitored operator is sqrt(kappa_b) b."""
    gen = jc_unit_generator(delta1, delta2, drive, g, gamma01, gamma12,
                            kappa_a, kappa_b, n_b_trunc)
    meas = jc_probe_output_op(gen.layout, kappa_b)
    return NetworkModel(gen, meas, gen.layout)
