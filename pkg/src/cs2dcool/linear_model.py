"""Linearized quadrature dynamics of the trapped particle coupled to the cavity.

Every mode is described by dimensionless quadratures x = b + b^dag and
p = i(b^dag - b), so [x, p] = 2i and a free oscillator contributes
omega/4 (x^2 + p^2) to H/hbar. Writing H/hbar = 1/2 X^T Hm X, the
Heisenberg equations read dX/dt = 2 J Hm X with J the symplectic form.
Dissipation adds -rate/2 to every quadrature and white input noise.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import CouplingTable
from .errors import InstabilityError, TrackingError
from .params import DerivedParams

LABELS_2D = ("x", "p_x", "y", "p_y", "Z_L", "P_L")
LABELS_3D = ("x", "p_x", "y", "p_y", "z", "p_z", "Z_L", "P_L")


@dataclass(frozen=True)
class LinearModel:
    """State-space model dX/dt = drift X + noise_gain xi(t).

    ``noise_psd`` holds the (symmetrized) white-noise level of each input,
    so the diffusion matrix is ``noise_gain diag(noise_psd) noise_gain^T``.
    ``input_correlation`` is the full, non-symmetrized correlation of the
    input noise, needed for sideband-resolved spectra.
    """

    dim: int
    drift: np.ndarray
    noise_gain: np.ndarray
    noise_psd: np.ndarray
    mode_labels: tuple
    input_correlation: np.ndarray
    hamiltonian: np.ndarray
    damping: np.ndarray
    frequencies: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def index(self, label: str) -> int:
        return self.mode_labels.index(label)

    @property
    def diffusion(self) -> np.ndarray:
        G = self.noise_gain
        return G @ np.diag(self.noise_psd) @ G.T

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.drift)

    def max_real_part(self) -> float:
        return float(np.max(self.eigenvalues().real))

    def check_stable(self):
        """Raise :class:`InstabilityError` unless every eigenvalue decays."""
        worst = self.max_real_part()
        if worst >= 0.0:
            raise InstabilityError(f"linear dynamics unstable: max Re(lambda) = {worst:.4e} rad/s")


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def build_model(derived: DerivedParams, table: CouplingTable, mode: str = "2d",
                frame: str = "rotated", dissipation: bool = True,
                couplings_scale: float = 1.0) -> LinearModel:
    """Assemble drift and noise for the 2D (x, y, cavity) or 3D model.

    Parameters
    ----------
    mode : {"2d", "3d"}
        The 3D model adds the axial mode and the mean-field mechanical
        cross couplings.
    frame : {"rotated", "lab"}
        In the rotated optical frame x, y couple to Z_L and z to P_L only.
        The lab frame uses the xi-dependent couplings to both quadratures;
        both frames have identical spectra.
    dissipation : bool
        If False the damping terms are dropped (noise entries are kept).
    couplings_scale : float
        Multiplies every coupling; 0 gives the uncoupled reference model.
    """
    mode = mode.lower()
    if mode not in ("2d", "3d"):
        raise ValueError(f"mode must be '2d' or '3d', got {mode!r}")
    if frame not in ("rotated", "lab"):
        raise ValueError(f"frame must be 'rotated' or 'lab', got {frame!r}")
    if not derived.kappa > 0:
        raise ValueError("kappa must be positive")

    labels = LABELS_3D if mode == "3d" else LABELS_2D
    n = len(labels)
    idx = {lab: i for i, lab in enumerate(labels)}
    Hm = np.zeros((n, n))

    def put(a, b, value):
        Hm[idx[a], idx[b]] += value
        Hm[idx[b], idx[a]] += value

    freqs = {"x": derived.omega_x, "y": derived.omega_y}
    if mode == "3d":
        freqs["z"] = derived.omega_z
    for q, w in freqs.items():
        Hm[idx[q], idx[q]] = Hm[idx["p_" + q], idx["p_" + q]] = 0.5 * w
    Hm[idx["Z_L"], idx["Z_L"]] = Hm[idx["P_L"], idx["P_L"]] = -0.5 * derived.detuning

    s = couplings_scale
    # 1/2 X^T Hm X with Hm[q,Q] = Hm[Q,q] = g gives g q Q
    if frame == "rotated":
        put("x", "Z_L", s * table.g_xZ)
        put("y", "Z_L", s * table.g_yZ)
        if mode == "3d":
            put("z", "P_L", s * table.g_zP)
    else:
        put("x", "Z_L", s * table.g_xZ_xi)
        put("x", "P_L", s * table.g_xP_xi)
        put("y", "Z_L", s * table.g_yZ_xi)
        put("y", "P_L", s * table.g_yP_xi)
        if mode == "3d":
            put("z", "Z_L", s * table.g_zZ_xi)
            put("z", "P_L", s * table.g_zP_xi)
    if mode == "3d":
        put("x", "y", s * table.g_xy_xi)
        put("x", "z", s * table.g_xz_xi)
        put("y", "z", s * table.g_yz_xi)

    J = symplectic_form(n // 2)
    rates = np.zeros(n)
    psd = np.zeros(n)
    corr = np.zeros((n, n), dtype=complex)
    occupancy = {"x": derived.n_B_x, "y": derived.n_B_y, "z": derived.n_B_z}
    recoil = {"x": derived.recoil_x, "y": derived.recoil_y, "z": derived.recoil_z}
    gamma = derived.gamma_gas
    for q in freqs:
        i, j = idx[q], idx["p_" + q]
        rates[i] = rates[j] = gamma
        psd[i] = 2.0 * occupancy[q] + 1.0
        # momentum kicks: extra diffusion 4*Gamma_rec in p gives dn/dt = Gamma_rec
        psd[j] = 2.0 * occupancy[q] + 1.0 + 4.0 * recoil[q] / gamma
    i, j = idx["Z_L"], idx["P_L"]
    rates[i] = rates[j] = derived.kappa
    psd[i] = psd[j] = 1.0
    for m in range(n // 2):
        a, b = 2 * m, 2 * m + 1
        corr[a, a], corr[b, b] = psd[a], psd[b]
        corr[a, b], corr[b, a] = 1j, -1j

    damping = np.diag(0.5 * rates) if dissipation else np.zeros((n, n))
    drift = 2.0 * J @ Hm - damping
    gain = np.diag(np.sqrt(rates))
    return LinearModel(dim=n, drift=drift, noise_gain=gain, noise_psd=psd,
                       mode_labels=labels, input_correlation=corr, hamiltonian=Hm,
                       damping=damping, frequencies=dict(freqs),
                       meta={"detuning": derived.detuning, "kappa": derived.kappa,
                             "gamma": gamma, "g_x": s * table.g_xZ, "g_y": s * table.g_yZ,
                             "frame": frame, "xi": table.xi})


def synthetic_model(omega_x, omega_y, detuning, kappa, gamma, g_x, g_y,
                    n_x=0.0, n_y=0.0, recoil_x=0.0, recoil_y=0.0) -> LinearModel:
    """2D model from raw rates (rad/s), bypassing the physical parameter chain.

    Useful for oracles and limits where the trap, coupling and bath
    parameters are chosen freely.
    """
    n = 6
    Hm = np.zeros((n, n))
    Hm[0, 0] = Hm[1, 1] = 0.5 * omega_x
    Hm[2, 2] = Hm[3, 3] = 0.5 * omega_y
    Hm[4, 4] = Hm[5, 5] = -0.5 * detuning
    Hm[0, 4] = Hm[4, 0] = g_x
    Hm[2, 4] = Hm[4, 2] = g_y
    rates = np.array([gamma, gamma, gamma, gamma, kappa, kappa], dtype=float)
    psd = np.array([2 * n_x + 1, 2 * n_x + 1 + 4 * recoil_x / gamma,
                    2 * n_y + 1, 2 * n_y + 1 + 4 * recoil_y / gamma, 1.0, 1.0])
    corr = np.diag(psd).astype(complex)
    for m in range(3):
        corr[2 * m, 2 * m + 1], corr[2 * m + 1, 2 * m] = 1j, -1j
    damping = np.diag(0.5 * rates)
    drift = 2.0 * symplectic_form(3) @ Hm - damping
    return LinearModel(dim=n, drift=drift, noise_gain=np.diag(np.sqrt(rates)), noise_psd=psd,
                       mode_labels=LABELS_2D, input_correlation=corr, hamiltonian=Hm,
                       damping=damping, frequencies={"x": omega_x, "y": omega_y},
                       meta={"detuning": detuning, "kappa": kappa, "gamma": gamma,
                             "g_x": g_x, "g_y": g_y, "frame": "rotated", "xi": 0.0})


def three_mode_matrix(omega_x, omega_y, detuning, g_x, g_y) -> np.ndarray:
    """Position-sector matrix M with H/hbar|_positions = q^T M q, q = (x, Z_L, y).

    The 1/4 prefactor is the one of omega/4 x^2 in our quadrature convention,
    so M = 1/4 [[w_x, 2g_x, 0], [2g_x, -Delta, 2g_y], [0, 2g_y, w_y]].
    Exact normal-mode frequencies follow from :func:`normal_mode_frequencies`;
    the rotating-wave eigenvector structure from :func:`hopping_matrix`.
    """
    return 0.25 * np.array([
        [omega_x, 2.0 * g_x, 0.0],
        [2.0 * g_x, -detuning, 2.0 * g_y],
        [0.0, 2.0 * g_y, omega_y],
    ])


def normal_mode_frequencies(omega_x, omega_y, detuning, g_x, g_y) -> np.ndarray:
    """Exact undamped eigenfrequencies, sorted ascending.

    With q' = W p and p' = -4 M q (W = diag of the bare frequencies), the
    squared frequencies are the eigenvalues of W 4M.
    """
    M = three_mode_matrix(omega_x, omega_y, detuning, g_x, g_y)
    W = np.diag([omega_x, -detuning, omega_y])
    w2 = np.linalg.eigvals(W @ (4.0 * M))
    return np.sort(np.sqrt(w2.astype(complex)).real)


def hopping_matrix(omega_x, omega_y, detuning, g_x, g_y) -> np.ndarray:
    """Beam-splitter (rotating-wave) matrix acting on (b_x, a, b_y).

    Its eigenvectors are the bright and dark hybrid modes; the eigenvalue
    offsets from the bare frequency are +-sqrt(g_x^2 + g_y^2) and 0 in the
    degenerate case.
    """
    return np.array([
        [omega_x, g_x, 0.0],
        [g_x, -detuning, g_y],
        [0.0, g_y, omega_y],
    ])


# ---------------------------------------------------------------- Bloch sphere

@dataclass(frozen=True)
class ModeTrajectory:
    """Hybrid-mode directions on the (x, y, Z_L) Bloch sphere versus detuning.

    Arrays are shaped (n_detuning, 3); column m follows one tracked branch.
    """

    detuning_axis: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    frequency: np.ndarray
    optical_weight: np.ndarray
    vectors: np.ndarray
    min_overlap: float

    def rows(self):
        """Yield (detuning, mode, theta, phi, frequency, optical_weight)."""
        for i, d in enumerate(self.detuning_axis):
            for m in range(self.theta.shape[1]):
                yield (d, m, self.theta[i, m], self.phi[i, m],
                       self.frequency[i, m], self.optical_weight[i, m])


def fix_gauge(v: np.ndarray) -> np.ndarray:
    """Remove the global phase so the x component is real and non-negative
    (falling back to y when x vanishes), then normalize."""
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("zero vector")
    v = v / norm
    ref = v[0] if abs(v[0]) > 1e-12 else (v[1] if abs(v[1]) > 1e-12 else v[2])
    return v * (abs(ref) / ref)


def bloch_angles(v: np.ndarray) -> tuple[float, float]:
    """(theta, phi) of a gauge-fixed (x, y, Z_L) vector; x = sin th cos ph,
    y = sin th sin ph, Z_L = cos th."""
    u = fix_gauge(v).real
    u = u / np.linalg.norm(u)
    theta = math.acos(max(-1.0, min(1.0, u[2])))
    phi = math.atan2(u[1], u[0])
    if phi == -math.pi:
        phi = math.pi
    return theta, phi


def position_modes(derived: DerivedParams, table: CouplingTable, detuning: float,
                   kappa_zero: bool = True, projection: str = "position"):
    """Positive-frequency eigenmodes of the conservative 2D dynamics.

    Returns frequencies (3,) and normalized (x, y, Z_L) vectors (3, 3) as
    columns, sorted by frequency. ``projection="position"`` keeps the
    position quadratures of each eigenvector; ``"ladder"`` uses the
    annihilation-operator amplitudes (q + i p)/2 instead.
    """
    if projection not in ("position", "ladder"):
        raise ValueError(f"unknown projection {projection!r}")
    d = derived.with_detuning(detuning)
    model = build_model(d, table, "2d", dissipation=not kappa_zero)
    A = model.drift
    if not kappa_zero:
        # keep optical loss only, mechanical damping is negligible here
        for q in ("x", "p_x", "y", "p_y"):
            A[model.index(q), model.index(q)] = 0.0
    lam, vecs = np.linalg.eig(A)
    order = np.argsort(-lam.imag)[:3]
    order = order[np.argsort(lam.imag[order])]
    pos = [model.index("x"), model.index("y"), model.index("Z_L")]
    mom = [model.index("p_x"), model.index("p_y"), model.index("P_L")]
    out = np.empty((3, 3), dtype=complex)
    for c, k in enumerate(order):
        v = vecs[pos, k]
        if projection == "ladder":
            v = 0.5 * (v + 1j * vecs[mom, k])
        out[:, c] = fix_gauge(v)
    return lam.imag[order], out


def bloch_trajectories(derived: DerivedParams, table: CouplingTable, detuning_grid,
                       kappa_zero: bool = True, projection: str = "position") -> ModeTrajectory:
    """Track the three hybrid modes across ``detuning_grid`` (rad/s, monotone).

    Modes are matched between neighbouring points by greedy maximal overlap.

    Raises
    ------
    TrackingError
        If a matched overlap drops below 0.5.
    """
    grid = np.asarray(detuning_grid, dtype=float)
    steps = np.diff(grid)
    if grid.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("detuning grid must be strictly monotone")
    n = grid.size
    theta = np.empty((n, 3))
    phi = np.empty((n, 3))
    freq = np.empty((n, 3))
    vectors = np.empty((n, 3, 3), dtype=complex)
    min_overlap = 1.0
    prev = None
    for i, det in enumerate(grid):
        w, V = position_modes(derived, table, det, kappa_zero=kappa_zero,
                              projection=projection)
        if prev is not None:
            ov = np.abs(prev.conj().T @ V)
            perm = [-1, -1, -1]
            free_rows, free_cols = set(range(3)), set(range(3))
            for _ in range(3):
                best = max(((r, c) for r in free_rows for c in free_cols), key=lambda rc: ov[rc])
                if ov[best] < 0.5:
                    raise TrackingError(
                        f"mode tracking lost a branch at detuning {det:.6e} rad/s "
                        f"(overlap {ov[best]:.3f})")
                min_overlap = min(min_overlap, float(ov[best]))
                perm[best[0]] = best[1]
                free_rows.discard(best[0])
                free_cols.discard(best[1])
            w, V = w[perm], V[:, perm]
        for m in range(3):
            theta[i, m], phi[i, m] = bloch_angles(V[:, m])
        freq[i] = w
        vectors[i] = V
        prev = V
    optical_weight = np.abs(vectors[:, 2, :]) ** 2
    return ModeTrajectory(detuning_axis=grid, theta=theta, phi=phi, frequency=freq,
                          optical_weight=optical_weight, vectors=vectors,
                          min_overlap=min_overlap)


def dark_branch(traj: ModeTrajectory, index: int | None = None) -> int:
    """Branch with the smallest optical weight at grid point ``index``
    (middle of the grid by default)."""
    i = traj.detuning_axis.size // 2 if index is None else index
    return int(np.argmin(traj.optical_weight[i]))


def equal_coupling_table(table: CouplingTable) -> CouplingTable:
    """Copy of ``table`` with g_xZ = g_yZ set to their mean (the g_x = g_y case)."""
    g = 0.5 * (table.g_xZ + table.g_yZ)
    return dataclasses.replace(table, g_xZ=g, g_yZ=g,
                               g_xZ_xi=g * math.cos(table.xi), g_xP_xi=g * math.sin(table.xi),
                               g_yZ_xi=g * math.cos(table.xi), g_yP_xi=g * math.sin(table.xi))


def trajectory_to_csv(traj: ModeTrajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["detuning_hz", "mode_index", "theta_rad", "phi_rad", "freq_hz", "optical_weight"])
    two_pi = 2 * math.pi
    for d, m, th, ph, f, ow in traj.rows():
        w.writerow([repr(float(d / two_pi)), m, repr(float(th)), repr(float(ph)),
                    repr(float(f / two_pi)), repr(float(ow))])
    return buf.getvalue()
