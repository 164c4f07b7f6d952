"""Conserved quantities, their numerical drifts, and Poisson brackets.

Global integrals (conserved for any initial data):

* the Hamiltonian ``H = sum 1/2 m_i |v_i|^2 + sum_{i<j} e_i e_j / rho_ij``,
* the pseudomomentum ``K = sum (p_i + e_i A(rho_i)) = sum (m_i v_i + 2 e_i A)``,
* the total canonical angular momentum ``L_z = sum (rho_i x p_i)_z``,
* the combination ``C = K_x^2 + K_y^2 - 2 Q B L_z`` which commutes with all of
  ``K_x, K_y, L_z`` (it is built here directly from K and L_z, so the identity
  defining it holds to rounding by construction).

The remaining quantities handled here (individual angular momenta, individual
kinetic energies, one pseudomomentum component of particle 3, and the radial
pairing ``tau1 . p_tau1``) are constants only along the special rigid-rotation
trajectories; along generic trajectories they drift at O(1).

Poisson brackets are evaluated numerically in canonical coordinates
``(rho, p)`` with central differences plus one step of Richardson
extrapolation.  The two-step estimates are compared and a disagreement beyond
tolerance raises :class:`NumericalInstability` instead of returning noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalInstability
from .model import canonical_momenta, vector_potential


# ---------------------------------------------------------------------------
# quantities as functions of (spec, positions, velocities)
# ---------------------------------------------------------------------------

def kinetic_energies(spec, velocities):
    v = np.asarray(velocities, float).reshape(-1, 2)
    return 0.5 * spec.masses * np.einsum("ij,ij->i", v, v)


def coulomb_energy(spec, positions):
    pos = np.asarray(positions, float).reshape(-1, 2)
    e = spec.charges
    E = 0.0
    for i in range(spec.n):
        for j in range(i + 1, spec.n):
            E += e[i] * e[j] / float(np.hypot(*(pos[i] - pos[j])))
    return E


def hamiltonian(spec, positions, velocities):
    return float(kinetic_energies(spec, velocities).sum() + coulomb_energy(spec, positions))


def particle_pseudomomenta(spec, positions, velocities):
    """Individual ``k_i = p_i + e_i A(rho_i) = m_i v_i + 2 e_i A(rho_i)``, (n, 2)."""
    A = vector_potential(positions, spec.B)
    v = np.asarray(velocities, float).reshape(-1, 2)
    return spec.masses[:, None] * v + 2.0 * spec.charges[:, None] * A


def pseudomomentum(spec, positions, velocities):
    return particle_pseudomomenta(spec, positions, velocities).sum(axis=0)


def individual_angular_momenta(spec, positions, velocities):
    """Canonical ``l_zi = (rho_i x p_i)_z`` per particle."""
    pos = np.asarray(positions, float).reshape(-1, 2)
    p = canonical_momenta(spec, pos, velocities)
    return pos[:, 0] * p[:, 1] - pos[:, 1] * p[:, 0]


def angular_momentum(spec, positions, velocities):
    return float(individual_angular_momenta(spec, positions, velocities).sum())


def casimir(spec, positions, velocities):
    K = pseudomomentum(spec, positions, velocities)
    Lz = angular_momentum(spec, positions, velocities)
    return float(K[0] ** 2 + K[1] ** 2 - 2.0 * spec.total_charge * spec.B * Lz)


def pair_virial(spec, positions, velocities):
    """``tau1 . p_tau1`` for the first relative pair (particles 1, 2).

    ``tau1 = rho_2 - rho_1`` and ``p_tau1 = nu_1 p_2 - nu_2 p_1`` with
    ``nu_i = m_i / (m_1 + m_2)``.  Vanishes identically along the rigid
    circular trajectories.
    """
    if spec.n < 2:
        raise DomainError("pair_virial needs at least two particles")
    pos = np.asarray(positions, float).reshape(-1, 2)
    p = canonical_momenta(spec, pos, velocities)
    m1, m2 = spec.masses[0], spec.masses[1]
    nu1, nu2 = m1 / (m1 + m2), m2 / (m1 + m2)
    tau1 = pos[1] - pos[0]
    ptau1 = nu1 * p[1] - nu2 * p[0]
    return float(tau1 @ ptau1)


def third_pseudomomentum_x(spec, positions, velocities):
    """x-component of particle 3's individual pseudomomentum."""
    if spec.n < 3:
        raise DomainError("third_pseudomomentum_x needs three particles")
    return float(particle_pseudomomenta(spec, positions, velocities)[2, 0])


@dataclass
class ParticularConstants:
    """Per-particle quantities that are constant only on special trajectories."""

    angular_momenta: np.ndarray   # (n,)
    kinetic_energies: np.ndarray  # (n,)
    k3x: float | None
    pair_virial: float | None


def particular_constants(spec, positions, velocities):
    l = individual_angular_momenta(spec, positions, velocities)
    T = kinetic_energies(spec, velocities)
    k3 = third_pseudomomentum_x(spec, positions, velocities) if spec.n >= 3 else None
    I = pair_virial(spec, positions, velocities) if spec.n >= 2 else None
    return ParticularConstants(l, T, k3, I)


# ---------------------------------------------------------------------------
# sampled reports along a trajectory
# ---------------------------------------------------------------------------

def invariant_columns(n):
    cols = ["t", "H", "Kx", "Ky", "Lz", "Casimir"]
    cols += [f"l{i}" for i in range(1, n + 1)]
    cols += [f"T{i}" for i in range(1, n + 1)]
    if n == 3:
        cols += ["k3x", "I"]
    return cols


def invariant_samples(traj):
    """Evaluate all reported quantities at every sample, shape (nt, ncols)."""
    spec = traj.spec
    n = spec.n
    rows = np.empty((traj.n_samples, len(invariant_columns(n))))
    for k in range(traj.n_samples):
        pos, vel = traj.positions[k], traj.velocities[k]
        K = pseudomomentum(spec, pos, vel)
        row = [
            traj.t[k],
            hamiltonian(spec, pos, vel),
            K[0],
            K[1],
            angular_momentum(spec, pos, vel),
            casimir(spec, pos, vel),
        ]
        row += list(individual_angular_momenta(spec, pos, vel))
        row += list(kinetic_energies(spec, vel))
        if n == 3:
            row += [third_pseudomomentum_x(spec, pos, vel), pair_virial(spec, pos, vel)]
        rows[k] = row
    return rows


def write_invariant_csv(traj, path):
    cols = invariant_columns(traj.spec.n)
    data = invariant_samples(traj)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    return data


def drift_report(traj):
    """max_t |q(t) - q(0)| for every reported quantity (absolute drifts)."""
    cols = invariant_columns(traj.spec.n)
    data = invariant_samples(traj)
    drifts = np.abs(data - data[0]).max(axis=0)
    return {name: float(d) for name, d in zip(cols[1:], drifts[1:])}


# ---------------------------------------------------------------------------
# Poisson brackets
# ---------------------------------------------------------------------------

def _pack(spec, positions, velocities):
    p = canonical_momenta(spec, positions, velocities)
    return np.concatenate([np.asarray(positions, float).ravel(), p.ravel()])


def _eval_on_z(func, spec, z):
    n = spec.n
    pos = z[: 2 * n].reshape(n, 2)
    p = z[2 * n:].reshape(n, 2)
    vel = (p - spec.charges[:, None] * vector_potential(pos, spec.B)) / spec.masses[:, None]
    return func(spec, pos, vel)


def _gradient(func, spec, z0, h):
    g = np.empty_like(z0)
    for k in range(len(z0)):
        hk = h * max(1.0, abs(z0[k]))
        zp = z0.copy(); zp[k] += hk
        zm = z0.copy(); zm[k] -= hk
        g[k] = (_eval_on_z(func, spec, zp) - _eval_on_z(func, spec, zm)) / (2.0 * hk)
    return g


def _assemble(spec, gf, gg):
    n2 = 2 * spec.n
    dq_f, dp_f = gf[:n2], gf[n2:]
    dq_g, dp_g = gg[:n2], gg[n2:]
    return float(dq_f @ dp_g - dp_f @ dq_g)


def poisson_bracket(f, g, spec, positions, velocities, h=1e-5,
                    instability_tol=1e-3):
    """Canonical Poisson bracket {f, g} at one phase point.

    ``f`` and ``g`` are callables ``(spec, positions, velocities) -> float``;
    differentiation happens in canonical coordinates with per-coordinate step
    ``h * max(1, |z_k|)``.  The bracket is formed at steps ``h`` and ``h/2``
    and Richardson-extrapolated; if the two estimates disagree beyond
    ``instability_tol`` (relative to the extrapolated value, floored at 1),
    :class:`NumericalInstability` is raised.
    """
    z0 = _pack(spec, positions, velocities)
    b_h = _assemble(spec, _gradient(f, spec, z0, h), _gradient(g, spec, z0, h))
    b_h2 = _assemble(spec, _gradient(f, spec, z0, h / 2), _gradient(g, spec, z0, h / 2))
    extrap = (4.0 * b_h2 - b_h) / 3.0
    if abs(b_h - b_h2) > instability_tol * max(1.0, abs(extrap)):
        raise NumericalInstability(
            f"bracket estimates at h and h/2 differ by {abs(b_h - b_h2):.3e}"
        )
    return extrap


def _named(func, name):
    func.__name__ = name
    return func


def standard_quantities(spec):
    """The global integrals as named callables: H, Kx, Ky, Lz, Casimir."""
    return [
        _named(lambda s, q, v: hamiltonian(s, q, v), "H"),
        _named(lambda s, q, v: float(pseudomomentum(s, q, v)[0]), "Kx"),
        _named(lambda s, q, v: float(pseudomomentum(s, q, v)[1]), "Ky"),
        _named(lambda s, q, v: angular_momentum(s, q, v), "Lz"),
        _named(lambda s, q, v: casimir(s, q, v), "Casimir"),
    ]


def algebra_check(spec, positions, velocities, h=1e-5):
    """Errors of the expected bracket table at one state.

    Returns a dict mapping a label to the *error* (computed minus expected):

        {Kx,Ky} = -QB,   {Lz,Kx} = Ky,   {Lz,Ky} = -Kx,
        {H,Kx} = {H,Ky} = {H,Lz} = 0,
        {Casimir, each of H,Kx,Ky,Lz} = 0.
    """
    H, Kx, Ky, Lz, C = standard_quantities(spec)
    QB = spec.total_charge * spec.B
    kx = Kx(spec, positions, velocities)
    ky = Ky(spec, positions, velocities)
    pb = lambda a, b: poisson_bracket(a, b, spec, positions, velocities, h=h)
    return {
        "{Kx,Ky}+QB": pb(Kx, Ky) + QB,
        "{Lz,Kx}-Ky": pb(Lz, Kx) - ky,
        "{Lz,Ky}+Kx": pb(Lz, Ky) + kx,
        "{H,Kx}": pb(H, Kx),
        "{H,Ky}": pb(H, Ky),
        "{H,Lz}": pb(H, Lz),
        "{C,H}": pb(C, H),
        "{C,Kx}": pb(C, Kx),
        "{C,Ky}": pb(C, Ky),
        "{C,Lz}": pb(C, Lz),
    }


def special_trajectory_quantities(spec, variant="I-rest"):
    """The six quantities that are in involution along special trajectories.

    variant selects the set appropriate to the rigid configuration:

    * ``"I-rest"``  — third charge at rest:        (H, K^2, Lz, l3, T1, T2)
    * ``"I-orbit"`` — third charge on its circle:  (H, K^2, Lz, l3, T3, k3x)
    * ``"II"``      — collinear rotation (also III): (H, K^2, Lz, l2, T1, T2)
    """
    if spec.n != 3:
        raise DomainError("special-trajectory sets are defined for n = 3")
    if variant not in ("I-rest", "I-orbit", "II"):
        raise DomainError(f"unknown involution-set variant {variant!r}")

    def K2(s, q, v):
        K = pseudomomentum(s, q, v)
        return float(K @ K)

    def l_i(i):
        return _named(
            lambda s, q, v: float(individual_angular_momenta(s, q, v)[i]),
            f"l{i + 1}")

    def T_i(i):
        return _named(lambda s, q, v: float(kinetic_energies(s, v)[i]),
                      f"T{i + 1}")

    base = [
        _named(lambda s, q, v: hamiltonian(s, q, v), "H"),
        _named(K2, "K2"),
        _named(lambda s, q, v: angular_momentum(s, q, v), "Lz"),
        l_i(1) if variant == "II" else l_i(2),
    ]
    if variant == "I-orbit":
        base += [
            T_i(2),
            _named(lambda s, q, v: third_pseudomomentum_x(s, q, v), "k3x"),
        ]
    else:
        base += [T_i(0), T_i(1)]
    return base


def involution_check(quantities, spec, states, h=1e-5):
    """Max |{q_a, q_b}| over all pairs and all supplied states.

    ``states`` is an iterable of (positions, velocities) pairs.  Returns
    ``(worst, table)`` where ``table[(name_a, name_b)]`` is the worst bracket
    magnitude for that pair.
    """
    table = {}
    worst = 0.0
    for pos, vel in states:
        for a in range(len(quantities)):
            for b in range(a + 1, len(quantities)):
                val = abs(poisson_bracket(quantities[a], quantities[b], spec, pos, vel, h=h))
                key = (quantities[a].__name__, quantities[b].__name__)
                table[key] = max(table.get(key, 0.0), val)
                worst = max(worst, val)
    return worst, table
