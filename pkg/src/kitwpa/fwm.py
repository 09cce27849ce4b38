"""Degenerate-pump four-wave-mixing propagation along the nonlinear ladder.

The coupled-mode equations evolve envelope amplitudes normalized so |a|^2 is
power in watts, over a continuous cell coordinate z in [0, total_cells].
The per-cell Kerr coefficient of each mode scales with its frequency,
gamma_j = gamma_pump * f_j / f_p, which makes the Manley-Rowe photon-flux
relations exact for the integrated trajectories.

Resonator phase-shifter blocks are not smeared into the continuous
dispersion: each block applies a lumped complex correction (extra pump
phase, insertion magnitude) to every mode at its position along the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .circuit import LadderNetwork, bare_ladder
from .dispersion import DispersionCurve, uniform_cell_dispersion
from .errors import NumericError
from .twoport import FrequencyGrid, network_matrix, to_s_parameters

__all__ = [
    "KerrCoefficient",
    "PhaseMismatch",
    "ModeState",
    "IntegrationOptions",
    "GainProfile",
    "HarmonicScan",
    "kerr_coefficient",
    "phase_mismatch",
    "coupled_mode_rhs",
    "propagate_modes",
    "analytic_gain_undepleted",
    "integrate_gain",
    "third_harmonic_scan",
    "gain_profile_csv_rows",
    "harmonic_scan_csv_rows",
]

GAIN_FLOOR_DB = -300.0


@dataclass(frozen=True)
class KerrCoefficient:
    """Nonlinear phase per cell per watt at the pump frequency."""

    gamma: float          # rad / (cell * W)
    k_cell: float         # rad/cell at the pump
    i_star: float
    z0: float

    def at(self, f: float, f_p: float) -> float:
        """Kerr coefficient of a mode at frequency f (scales as f / f_p)."""
        return self.gamma * f / f_p


def kerr_coefficient(k_cell: float, i_star: float, z0: float = 50.0) -> KerrCoefficient:
    """gamma = k_cell / (2 * i_star^2 * z0).

    Follows from L(I) = L0 (1 + I^2/I*^2): the wavenumber scales as sqrt(L),
    so dk/k = I_rms^2 / (2 I*^2), and P = I_rms^2 Z0 converts current to
    power.
    """
    if k_cell <= 0 or i_star <= 0 or z0 <= 0:
        raise ValueError("k_cell, i_star and z0 must be positive")
    return KerrCoefficient(gamma=k_cell / (2.0 * i_star**2 * z0),
                           k_cell=k_cell, i_star=i_star, z0=z0)


@dataclass(frozen=True)
class PhaseMismatch:
    delta_k_linear: float   # rad/cell, k_s + k_i - 2 k_p
    delta_k_total: float    # rad/cell, linear + 2 gamma P_p
    signal_in_stopband: bool = False
    idler_in_stopband: bool = False


def phase_mismatch(dispersion: DispersionCurve, f_p: float, f_s: float,
                   gamma: KerrCoefficient, p_p: float) -> PhaseMismatch:
    """Linear and pump-corrected mismatch for a signal at f_s."""
    f_i = 2.0 * f_p - f_s
    if f_i <= 0:
        raise ValueError("idler frequency 2*f_p - f_s must be positive")
    k = dispersion.k_cell
    dk_lin = float(k(f_s) + k(f_i) - 2.0 * k(f_p))
    return PhaseMismatch(
        delta_k_linear=dk_lin,
        delta_k_total=dk_lin + 2.0 * gamma.gamma * p_p,
        signal_in_stopband=bool(dispersion.stopband_at(f_s)[0]),
        idler_in_stopband=bool(dispersion.stopband_at(f_i)[0]),
    )


@dataclass
class ModeState:
    """Complex amplitudes of the four interacting tones; |a|^2 in watts."""

    a_p: complex
    a_s: complex
    a_i: complex
    a_3: complex
    f_p: float
    f_s: float
    k_p: float = 0.0
    k_s: float = 0.0
    k_i: float = 0.0
    k_3: float = 0.0

    @property
    def f_i(self) -> float:
        return 2.0 * self.f_p - self.f_s

    @property
    def f_3(self) -> float:
        return 3.0 * self.f_p


def _rhs(z, y, n, gp, gs, gi, g3, dk, dk3, ap_al, as_al, ai_al, a3_al,
         undepleted, thg):
    """Flat complex RHS for n independent pump/signal/idler(/third) systems."""
    ap = y[0 * n:1 * n]
    as_ = y[1 * n:2 * n]
    ai = y[2 * n:3 * n]
    a3 = y[3 * n:4 * n] if thg else None

    pp = ap.real**2 + ap.imag**2
    ps = as_.real**2 + as_.imag**2
    pi_ = ai.real**2 + ai.imag**2
    p3 = (a3.real**2 + a3.imag**2) if thg else 0.0

    e = np.exp(-1j * dk * z)
    if undepleted:
        dap = (1j * gp * pp - ap_al) * ap
        das = 1j * gs * (2.0 * pp * as_ + ap * ap * np.conj(ai) * e) - as_al * as_
        dai = 1j * gi * (2.0 * pp * ai + ap * ap * np.conj(as_) * e) - ai_al * ai
        if thg:
            e3 = np.exp(-1j * dk3 * z)
            da3 = (1j * g3 * (2.0 * pp) - a3_al) * a3 \
                + 1j * (g3 / 3.0) * ap**3 * e3
            return np.concatenate([dap, das, dai, da3])
        return np.concatenate([dap, das, dai])

    dap = 1j * gp * ((pp + 2.0 * ps + 2.0 * pi_ + 2.0 * p3) * ap
                     + 2.0 * as_ * ai * np.conj(ap) * np.conj(e)) - ap_al * ap
    das = 1j * gs * ((ps + 2.0 * pp + 2.0 * pi_ + 2.0 * p3) * as_
                     + ap * ap * np.conj(ai) * e) - as_al * as_
    dai = 1j * gi * ((pi_ + 2.0 * pp + 2.0 * ps + 2.0 * p3) * ai
                     + ap * ap * np.conj(as_) * e) - ai_al * ai
    if thg:
        e3 = np.exp(-1j * dk3 * z)
        dap = dap + 1j * gp * np.conj(ap)**2 * a3 * np.conj(e3)
        da3 = 1j * g3 * ((p3 + 2.0 * pp + 2.0 * ps + 2.0 * pi_) * a3
                         + ap**3 * e3 / 3.0) - a3_al * a3
        return np.concatenate([dap, das, dai, da3])
    return np.concatenate([dap, das, dai])


def coupled_mode_rhs(z: float, state: ModeState, gamma: KerrCoefficient,
                     mismatch: PhaseMismatch, include_third_harmonic: bool = False,
                     delta_k_3: float = 0.0,
                     attenuation=(0.0, 0.0, 0.0, 0.0)) -> np.ndarray:
    """Derivative [da_p, da_s, da_i, da_3]/dz of a single mode system."""
    f_p, f_s, f_i = state.f_p, state.f_s, state.f_i
    gp = gamma.gamma
    y = np.array([state.a_p, state.a_s, state.a_i, state.a_3], dtype=complex)
    y = y.reshape(4, 1) if include_third_harmonic else y[:3].reshape(3, 1)
    out = _rhs(
        z, y.ravel(), 1,
        gp, gamma.at(f_s, f_p), gamma.at(f_i, f_p), gamma.at(3 * f_p, f_p),
        np.array([mismatch.delta_k_linear]), np.array([delta_k_3]),
        attenuation[0], attenuation[1], attenuation[2], attenuation[3],
        undepleted=False, thg=include_third_harmonic,
    )
    if include_third_harmonic:
        return out
    return np.concatenate([out, [0.0 + 0.0j]])


def propagate_modes(state: ModeState, gamma: KerrCoefficient,
                    mismatch: PhaseMismatch, length: float,
                    options: IntegrationOptions | None = None,
                    delta_k_3: float = 0.0,
                    attenuation=(0.0, 0.0, 0.0, 0.0)) -> ModeState:
    """Integrate one pump/signal/idler(/third) system over ``length`` cells.

    The mismatch and attenuations are taken as given, which makes this the
    direct integration counterpart of analytic_gain_undepleted.
    """
    options = options or IntegrationOptions()
    f_p, f_s, f_i = state.f_p, state.f_s, state.f_i
    thg = options.include_third_harmonic
    gammas = (gamma.gamma, gamma.at(f_s, f_p), gamma.at(f_i, f_p),
              gamma.at(3 * f_p, f_p))
    n_modes = 4 if thg else 3
    y0 = np.array([state.a_p, state.a_s, state.a_i, state.a_3],
                  dtype=complex)[:n_modes]
    prop = _Propagator(
        1, gammas, np.array([mismatch.delta_k_linear]), delta_k_3,
        tuple(np.atleast_1d(a).astype(float) for a in attenuation),
        float(length), [], (1.0, np.ones(1), np.ones(1), 1.0),
        options.undepleted, thg, options.rtol, options.atol)
    y = prop.run(y0)
    return ModeState(
        a_p=complex(y[0]), a_s=complex(y[1]), a_i=complex(y[2]),
        a_3=complex(y[3]) if thg else 0.0,
        f_p=f_p, f_s=f_s,
        k_p=state.k_p, k_s=state.k_s, k_i=state.k_i, k_3=state.k_3,
    )


def analytic_gain_undepleted(gamma_pp: float, delta_k_total: float,
                             length: float) -> float:
    """Closed-form undepleted signal power gain (ratio, not dB).

    G = 1 + (gamma*P_p / g)^2 sinh^2(g L) with
    g^2 = (gamma*P_p)^2 - (delta_k_total / 2)^2; for g^2 < 0 the sinh turns
    into an oscillatory sin, and g = 0 degenerates to G = 1 + (gamma*P_p*L)^2.
    The idler photon-flux gain is G - 1 exactly.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    g2 = complex(gamma_pp**2 - (delta_k_total / 2.0) ** 2)
    g = np.sqrt(g2)
    gl = g * length
    if abs(gl) < 1e-8:
        sh_over_g = length * (1.0 + gl * gl / 6.0)
    else:
        sh_over_g = np.sinh(gl) / g
    return float(1.0 + (gamma_pp * abs(sh_over_g)) ** 2)


# --------------------------------------------------------------------------
# device-level propagation

@dataclass(frozen=True)
class IntegrationOptions:
    undepleted: bool = False
    include_third_harmonic: bool = False
    seed_level_db: float = -60.0   # signal seed relative to the pump
    rtol: float = 1e-8
    atol: float = 1e-14
    z0: float = 50.0               # line impedance for the power-current map


@dataclass(frozen=True)
class GainProfile:
    frequencies: np.ndarray
    gain_db: np.ndarray
    pump_frequency: float
    pump_power: float
    delta_k_linear: np.ndarray
    delta_k_total: np.ndarray
    in_stopband: np.ndarray
    i_star: float


@dataclass(frozen=True)
class HarmonicScan:
    z_cells: np.ndarray
    p_pump: np.ndarray
    p_signal: np.ndarray
    p_idler: np.ndarray
    p_third: np.ndarray
    pump_frequency: float
    pump_power: float

    @property
    def conversion_efficiency(self) -> float:
        """|a_3(L)|^2 / P_p at the output."""
        return float(self.p_third[-1] / self.pump_power)


def _block_positions(network: LadderNetwork) -> list:
    p = network.periods
    if p is None:
        raise NumericError(
            "resonator-embedded network carries no period annotation; "
            "cannot place phase-shifter blocks"
        )
    return [b * p.cells_per_period for b in range(p.repeats)]


def _block_response(network: LadderNetwork, f: np.ndarray, z0: float):
    """Complex per-block correction s21(block) / s21(equal bare ladder)."""
    p = network.periods
    block = LadderNetwork(elements=network.elements[: p.elements_per_period],
                          total_cells=p.cells_per_period)
    f = np.atleast_1d(f)
    loaded = to_s_parameters(network_matrix(block, f), f, z0).s21
    plain = to_s_parameters(network_matrix(bare_ladder(block), f), f, z0).s21
    ratio = loaded / plain
    mag = np.abs(ratio)
    # physics phasor convention: extra delay appears as a positive phase
    theta = -np.angle(ratio)
    return mag * np.exp(1j * theta)


def _smooth_background(network: LadderNetwork) -> tuple | None:
    """Unique (L, C) of the uniform base cells; None if cells differ."""
    from .circuit import SeriesInductor, ShuntCapacitor
    l0 = {e.l0 for e in network.elements if isinstance(e, SeriesInductor)}
    cs = {e.c for e in network.elements if isinstance(e, ShuntCapacitor)}
    if len(l0) == 1 and len(cs) == 1:
        return (l0.pop(), cs.pop())
    return None


class _Propagator:
    """Piecewise ensemble integration with lumped block corrections."""

    def __init__(self, n, gammas, dk, dk3, alphas, total_cells, blocks,
                 block_factors, undepleted, thg, rtol, atol):
        self.n = n
        self.gammas = gammas
        self.dk = dk
        self.dk3 = dk3
        self.alphas = alphas
        self.total_cells = total_cells
        self.blocks = blocks
        self.block_factors = block_factors  # (fp_fac, fs_fac, fi_fac, f3_fac)
        self.undepleted = undepleted
        self.thg = thg
        self.rtol = rtol
        self.atol = atol

    def _rhs(self, z, y):
        gp, gs, gi, g3 = self.gammas
        ap_al, as_al, ai_al, a3_al = self.alphas
        return _rhs(z, y, self.n, gp, gs, gi, g3, self.dk, self.dk3,
                    ap_al, as_al, ai_al, a3_al, self.undepleted, self.thg)

    def _apply_block(self, y):
        n = self.n
        fp_fac, fs_fac, fi_fac, f3_fac = self.block_factors
        y[0 * n:1 * n] *= fp_fac
        y[1 * n:2 * n] *= fs_fac
        y[2 * n:3 * n] *= fi_fac
        if self.thg:
            y[3 * n:4 * n] *= f3_fac
        return y

    def _segment(self, z0, z1, y, t_eval=None):
        sol = solve_ivp(self._rhs, (z0, z1), y, method="RK45",
                        rtol=self.rtol, atol=self.atol, t_eval=t_eval)
        if not sol.success:
            raise NumericError(
                f"coupled-mode integration failed on z in [{z0:g}, {z1:g}] "
                f"cells: {sol.message}"
            )
        return sol

    def run(self, y0):
        y = y0.copy()
        z = 0.0
        for zb in self.blocks:
            if zb > z:
                y = self._segment(z, zb, y).y[:, -1]
                z = zb
            y = self._apply_block(y)
        if self.total_cells > z:
            y = self._segment(z, self.total_cells, y).y[:, -1]
        return y

    def run_sampled(self, y0, n_samples):
        """Trajectory sampled on ~n_samples points along z."""
        y = y0.copy()
        z = 0.0
        zs, ys = [], []
        bounds = [b for b in self.blocks if b > 0] + [self.total_cells]
        for zb in self.blocks:
            if zb == 0.0:
                y = self._apply_block(y)
        segs = []
        start = 0.0
        for b in sorted(set(bounds)):
            segs.append((start, b))
            start = b
        for (z0, z1) in segs:
            pts = max(2, int(round(n_samples * (z1 - z0) / self.total_cells)))
            t_eval = np.linspace(z0, z1, pts)
            sol = self._segment(z0, z1, y, t_eval=t_eval)
            zs.append(sol.t)
            ys.append(sol.y)
            y = sol.y[:, -1].copy()
            if z1 in self.blocks:
                y = self._apply_block(y)
        return np.concatenate(zs), np.concatenate(ys, axis=1)


def _prepare(network, dispersion, pump, f_s, options, stopband_curve):
    """Common setup shared by gain integration and the harmonic scan."""
    f_p, p_p = pump
    if f_p <= 0:
        raise ValueError("pump frequency must be positive")
    if p_p < 0:
        raise ValueError("pump power must be >= 0")
    flag_curve = stopband_curve if stopband_curve is not None else dispersion
    if bool(flag_curve.stopband_at(f_p)[0]):
        raise NumericError(
            f"pump at {f_p / 1e9:.4f} GHz lies inside a stopband; "
            "move it into a passband below the band edge"
        )

    thg = options.include_third_harmonic
    f_3 = 3.0 * f_p
    has_res = network.has_resonators()

    if has_res:
        base = _smooth_background(bare_ladder(network))
        if base is None:
            raise NumericError("resonator design must have uniform base cells")
        l0, c0 = base
        grid = FrequencyGrid(dispersion.frequencies[0],
                             max(dispersion.frequencies[-1], f_3 * 1.01), 4097)
        k_curve = uniform_cell_dispersion(l0, c0, grid)
    else:
        k_curve = dispersion
    if thg and f_3 > k_curve.frequencies[-1]:
        raise NumericError(
            f"dispersion grid ends at {k_curve.frequencies[-1] / 1e9:.2f} GHz "
            f"but the third harmonic needs {f_3 / 1e9:.2f} GHz; extend the grid"
        )

    i_star = network.i_star
    k_p = float(k_curve.k_cell(f_p))
    gamma = kerr_coefficient(k_p, i_star, options.z0)

    f_i = 2.0 * f_p - f_s
    k_s = k_curve.k_cell(f_s)
    k_i = k_curve.k_cell(f_i)
    dk = k_s + k_i - 2.0 * k_p
    dk3 = float(k_curve.k_cell(f_3) - 3.0 * k_p) if thg else 0.0

    alphas = (
        float(k_curve.alpha_cell(f_p)),
        k_curve.alpha_cell(f_s),
        k_curve.alpha_cell(f_i),
        float(k_curve.alpha_cell(f_3)) if thg else 0.0,
    )

    if has_res:
        blocks = [float(b) for b in _block_positions(network)]
        fac_p = _block_response(network, np.array([f_p]), options.z0)[0]
        fac_s = _block_response(network, f_s, options.z0) if f_s.size else np.array([])
        fac_i = _block_response(network, f_i, options.z0) if f_i.size else np.array([])
        fac_3 = _block_response(network, np.array([f_3]), options.z0)[0] if thg else 1.0
        block_factors = (fac_p, fac_s, fac_i, fac_3)
    else:
        blocks = []
        block_factors = None

    gammas = (gamma.gamma,
              gamma.gamma * f_s / f_p,
              gamma.gamma * f_i / f_p,
              3.0 * gamma.gamma)
    stop_flags = (np.asarray(flag_curve.stopband_at(f_s))
                  | np.asarray(flag_curve.stopband_at(f_i)))
    return gamma, gammas, dk, dk3, alphas, blocks, block_factors, stop_flags


def integrate_gain(network: LadderNetwork, dispersion: DispersionCurve,
                   pump: tuple, signal_grid, options: IntegrationOptions | None = None,
                   stopband_curve: DispersionCurve | None = None) -> GainProfile:
    """Signal gain profile of a pumped device.

    ``dispersion`` supplies the continuous propagation constants for the
    coupled-mode phases; for resonator-embedded designs the resonators enter
    as lumped per-block corrections instead, computed from the network, and
    the continuous part falls back to the bare-ladder curve automatically.
    ``stopband_curve`` (default: ``dispersion``) provides the stopband flags
    used for pump validation and per-point annotation.

    Gain is 20*log10 |a_s(L)/a_s(0)| with Bloch attenuation folded in; a
    zero-power pump short-circuits to an identically zero profile.
    """
    options = options or IntegrationOptions()
    f_p, p_p = pump
    if isinstance(signal_grid, FrequencyGrid):
        f_s = signal_grid.frequencies()
    else:
        f_s = np.asarray(signal_grid, dtype=float)
    keep = np.abs(f_s - f_p) > 1e-9 * f_p
    f_s = f_s[keep]
    if np.any(f_s <= 0) or np.any(f_s >= 2 * f_p):
        raise ValueError("signal frequencies must lie in (0, 2*f_p)")
    if f_s.size == 0:
        raise ValueError("signal grid is empty after excluding the pump")

    gamma, gammas, dk, dk3, alphas, blocks, block_factors, stop_flags = _prepare(
        network, dispersion, pump, f_s, options, stopband_curve)

    n = f_s.size
    if p_p == 0.0:
        return GainProfile(f_s, np.zeros(n), f_p, 0.0, dk, dk.copy(),
                           stop_flags, network.i_star)

    seed_p = p_p * 10.0 ** (options.seed_level_db / 10.0)
    seed_amp = math.sqrt(seed_p)
    y0 = np.concatenate([
        np.full(n, math.sqrt(p_p), dtype=complex),
        np.full(n, seed_amp, dtype=complex),
        np.zeros(n, dtype=complex),
    ] + ([np.zeros(n, dtype=complex)] if options.include_third_harmonic else []))

    if block_factors is None:
        block_factors = (1.0, np.ones(n), np.ones(n), 1.0)
    prop = _Propagator(n, gammas, dk, dk3, alphas, float(network.total_cells),
                       blocks, block_factors, options.undepleted,
                       options.include_third_harmonic, options.rtol, options.atol)
    y = prop.run(y0)
    amp = np.abs(y[n:2 * n])
    with np.errstate(divide="ignore"):
        gain_db = 20.0 * np.log10(np.maximum(amp / seed_amp, 1e-300))
    gain_db = np.maximum(gain_db, GAIN_FLOOR_DB)
    return GainProfile(
        frequencies=f_s,
        gain_db=gain_db,
        pump_frequency=f_p,
        pump_power=p_p,
        delta_k_linear=dk,
        delta_k_total=dk + 2.0 * gamma.gamma * p_p,
        in_stopband=stop_flags,
        i_star=network.i_star,
    )


def third_harmonic_scan(network: LadderNetwork, dispersion: DispersionCurve,
                        pump: tuple, options: IntegrationOptions | None = None,
                        stopband_curve: DispersionCurve | None = None,
                        n_samples: int = 1024) -> HarmonicScan:
    """Pump and third-harmonic powers along the line (no signal injected)."""
    options = options or IntegrationOptions()
    if not options.include_third_harmonic:
        options = IntegrationOptions(
            undepleted=options.undepleted, include_third_harmonic=True,
            seed_level_db=options.seed_level_db, rtol=options.rtol,
            atol=options.atol, z0=options.z0)
    f_p, p_p = pump
    if p_p <= 0:
        raise ValueError("harmonic scan requires a nonzero pump")
    f_s = np.array([f_p / 2.0])  # placeholder mode, seeded with zero power
    gamma, gammas, dk, dk3, alphas, blocks, block_factors, _ = _prepare(
        network, dispersion, pump, f_s, options, stopband_curve)
    n = 1
    y0 = np.array([math.sqrt(p_p), 0.0, 0.0, 0.0], dtype=complex)
    if block_factors is None:
        block_factors = (1.0, np.ones(n), np.ones(n), 1.0)
    prop = _Propagator(n, gammas, dk, dk3, alphas, float(network.total_cells),
                       blocks, block_factors, options.undepleted, True,
                       options.rtol, options.atol)
    z, y = prop.run_sampled(y0, n_samples)
    return HarmonicScan(
        z_cells=z,
        p_pump=np.abs(y[0]) ** 2,
        p_signal=np.abs(y[1]) ** 2,
        p_idler=np.abs(y[2]) ** 2,
        p_third=np.abs(y[3]) ** 2,
        pump_frequency=f_p,
        pump_power=p_p,
    )


# --------------------------------------------------------------------------
# CSV emission

def gain_profile_csv_rows(profile: GainProfile):
    rows = ["freq_hz,gain_db,delta_k_linear,delta_k_total,in_stopband"]
    for i in range(profile.frequencies.size):
        rows.append(
            f"{profile.frequencies[i]:.12e},{profile.gain_db[i]:.12e},"
            f"{profile.delta_k_linear[i]:.12e},{profile.delta_k_total[i]:.12e},"
            f"{int(profile.in_stopband[i])}"
        )
    return rows


def harmonic_scan_csv_rows(scan: HarmonicScan):
    rows = ["z_cells,p_pump_w,p_signal_w,p_idler_w,p_third_w"]
    for i in range(scan.z_cells.size):
        rows.append(
            f"{scan.z_cells[i]:.12e},{scan.p_pump[i]:.12e},"
            f"{scan.p_signal[i]:.12e},{scan.p_idler[i]:.12e},"
            f"{scan.p_third[i]:.12e}"
        )
    return rows
