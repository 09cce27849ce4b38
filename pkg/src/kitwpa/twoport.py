"""Chain (ABCD) two-port algebra and S-parameter conversion.

Matrices are held as four complex arrays over a frequency grid, so every
operation is vectorized; a single frequency is just a length-1 grid.  The
engineering phasor convention exp(+j*omega*t) is used throughout, so a
matched line has arg(s21) = -beta*l.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import (
    LadderNetwork,
    SeriesInductor,
    ShuntCapacitor,
    ShuntResonator,
)

__all__ = [
    "TwoPortMatrix",
    "FrequencyGrid",
    "SParameterSet",
    "identity_matrix",
    "series_impedance_matrix",
    "shunt_admittance_matrix",
    "element_matrix",
    "element_admittance",
    "cascade",
    "matrix_power",
    "network_matrix",
    "to_s_parameters",
    "write_touchstone",
    "read_touchstone",
    "sparams_to_csv_rows",
]

RESONATOR_ENVIRONMENT_OHMS = 25.0  # 50 ohm line seen both ways from a shunt node


@dataclass(frozen=True)
class FrequencyGrid:
    """Linearly spaced analysis grid in Hz."""

    start: float
    stop: float
    points: int

    def __post_init__(self):
        if self.start <= 0:
            raise ValueError("start must be positive")
        if self.stop <= self.start:
            raise ValueError("stop must exceed start")
        if self.points < 2:
            raise ValueError("points must be >= 2")

    def frequencies(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.points - 1)


@dataclass(frozen=True)
class TwoPortMatrix:
    """Chain matrix [[a, b], [c, d]]; entries are complex arrays over a grid."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __matmul__(self, other: "TwoPortMatrix") -> "TwoPortMatrix":
        return TwoPortMatrix(
            a=self.a * other.a + self.b * other.c,
            b=self.a * other.b + self.b * other.d,
            c=self.c * other.a + self.d * other.c,
            d=self.c * other.b + self.d * other.d,
        )

    def det(self) -> np.ndarray:
        return self.a * self.d - self.b * self.c

    def trace_half(self) -> np.ndarray:
        return 0.5 * (self.a + self.d)


def identity_matrix(n: int) -> TwoPortMatrix:
    one = np.ones(n, dtype=complex)
    zero = np.zeros(n, dtype=complex)
    return TwoPortMatrix(one, zero, zero, one)


def series_impedance_matrix(z: np.ndarray) -> TwoPortMatrix:
    z = np.asarray(z, dtype=complex)
    one = np.ones_like(z)
    return TwoPortMatrix(one, z, np.zeros_like(z), one)


def shunt_admittance_matrix(y: np.ndarray) -> TwoPortMatrix:
    y = np.asarray(y, dtype=complex)
    one = np.ones_like(y)
    return TwoPortMatrix(one, np.zeros_like(y), y, one)


def resonator_elements(f_r: float, q: float) -> tuple[float, float]:
    """(L_r, C_r) of the series-LC shunt realizing resonance f_r at loaded
    quality factor q against the 25 ohm environment."""
    w0 = 2.0 * np.pi * f_r
    l_r = q * RESONATOR_ENVIRONMENT_OHMS / w0
    return l_r, 1.0 / (w0 * w0 * l_r)


def element_admittance(element, f: np.ndarray, bias_current: float = 0.0,
                       loss_tangent: float = 0.0) -> np.ndarray:
    """Shunt admittance of a shunt element, in siemens."""
    w = 2.0 * np.pi * np.asarray(f, dtype=float)
    if isinstance(element, ShuntCapacitor):
        return 1j * w * element.c * (1.0 - 1j * loss_tangent)
    if isinstance(element, ShuntResonator):
        l_r, c_r = resonator_elements(element.f_r, element.q)
        reactance = w * l_r - 1.0 / (w * c_r)
        # a grid point exactly on resonance would divide by zero; the branch
        # is a short there, so clamp to a huge admittance instead
        reactance = np.where(np.abs(reactance) < 1e-30,
                             np.copysign(1e-30, reactance + 1e-300), reactance)
        return element.multiplicity / (1j * reactance)
    raise TypeError(f"not a shunt element: {element!r}")


def element_matrix(element, f: np.ndarray, bias_current: float = 0.0,
                   loss_tangent: float = 0.0) -> TwoPortMatrix:
    """Chain matrix of a single element at frequencies f.

    A series inductor is evaluated at L(bias_current); loss_tangent applies
    to shunt capacitors only (inductors are lossless).
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if np.any(f <= 0):
        raise ValueError("frequencies must be positive")
    if isinstance(element, SeriesInductor):
        l_eff = element.l0 * (1.0 + (bias_current / element.i_star) ** 2)
        return series_impedance_matrix(1j * 2.0 * np.pi * f * l_eff)
    return shunt_admittance_matrix(
        element_admittance(element, f, bias_current, loss_tangent)
    )


def cascade(matrices) -> TwoPortMatrix:
    """Ordered product of chain matrices, input port first."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("cascade of an empty list")
    out = matrices[0]
    for m in matrices[1:]:
        out = out @ m
    return out


def matrix_power(m: TwoPortMatrix, n: int) -> TwoPortMatrix:
    """m @ m @ ... (n times) by binary exponentiation."""
    if n < 0:
        raise ValueError("n must be >= 0")
    result = identity_matrix(len(np.atleast_1d(m.a)))
    base = m
    while n:
        if n & 1:
            result = result @ base
        base = base @ base
        n >>= 1
    return result


def _chain_of(elements, f, bias_current, loss_tangent) -> TwoPortMatrix:
    out = identity_matrix(len(f))
    i = 0
    while i < len(elements):
        e = elements[i]
        # collapse runs of identical elements into powers
        j = i
        while j < len(elements) and elements[j] == e:
            j += 1
        m = element_matrix(e, f, bias_current, loss_tangent)
        out = out @ (m if j - i == 1 else matrix_power(m, j - i))
        i = j
    return out


def network_matrix(network: LadderNetwork, f: np.ndarray,
                   bias_current: float = 0.0,
                   loss_tangent: float = 0.0) -> TwoPortMatrix:
    """Chain matrix of a full ladder network over frequencies f.

    Uses the network's period annotation to raise the repeating block to an
    integer power; unannotated networks are evaluated element by element.
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if network.periods is None:
        return _chain_of(network.elements, f, bias_current, loss_tangent)
    p = network.periods
    head = network.elements[: p.elements_per_period]
    tail = network.elements[p.elements_per_period * p.repeats:]
    period = _chain_of(head, f, bias_current, loss_tangent)
    out = matrix_power(period, p.repeats)
    if tail:
        out = out @ _chain_of(tail, f, bias_current, loss_tangent)
    return out


@dataclass(frozen=True)
class SParameterSet:
    """Two-port scattering data on a frequency grid at a real reference."""

    frequencies: np.ndarray
    s11: np.ndarray
    s21: np.ndarray
    s12: np.ndarray
    s22: np.ndarray
    reference_impedance: float = 50.0


def to_s_parameters(m: TwoPortMatrix, f: np.ndarray,
                    z_ref: float = 50.0) -> SParameterSet:
    """Convert a chain matrix to S-parameters at a real reference impedance."""
    if z_ref <= 0:
        raise ValueError("z_ref must be positive")
    f = np.atleast_1d(np.asarray(f, dtype=float))
    den = m.a + m.b / z_ref + m.c * z_ref + m.d
    if np.any(np.abs(den) < 1e-300):
        raise ArithmeticError("singular ABCD-to-S denominator (pathological network)")
    det = m.det()
    s11 = (m.a + m.b / z_ref - m.c * z_ref - m.d) / den
    s21 = 2.0 / den
    s12 = 2.0 * det / den
    s22 = (-m.a + m.b / z_ref - m.c * z_ref + m.d) / den
    return SParameterSet(f, s11, s21, s12, s22, z_ref)


# --------------------------------------------------------------------------
# Touchstone / CSV emission

def write_touchstone(sp: SParameterSet, path) -> None:
    """Two-port Touchstone file, real/imaginary format, frequency in Hz."""
    lines = [f"# HZ S RI R {sp.reference_impedance:g}"]
    for i, f in enumerate(sp.frequencies):
        vals = (sp.s11[i], sp.s21[i], sp.s12[i], sp.s22[i])
        row = f"{f:.12e}"
        for v in vals:
            row += f" {v.real:.12e} {v.imag:.12e}"
        lines.append(row)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_touchstone(path) -> SParameterSet:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw or not raw[0].startswith("#"):
        raise ValueError(f"{path}: missing Touchstone option line")
    opts = raw[0][1:].split()
    if [o.upper() for o in opts[:3]] != ["HZ", "S", "RI"]:
        raise ValueError(f"{path}: only 'HZ S RI' Touchstone data is supported")
    z_ref = 50.0
    if "R" in [o.upper() for o in opts]:
        z_ref = float(opts[[o.upper() for o in opts].index("R") + 1])
    data = np.array([[float(x) for x in ln.split()] for ln in raw[1:]])
    if data.shape[1] != 9:
        raise ValueError(f"{path}: expected 9 columns per data line")
    f = data[:, 0]
    s = data[:, 1::2] + 1j * data[:, 2::2]
    return SParameterSet(f, s[:, 0], s[:, 1], s[:, 2], s[:, 3], z_ref)


def sparams_to_csv_rows(sp: SParameterSet, bloch_phase=None, bloch_atten=None,
                        in_stopband=None):
    """Rows for the combined linear-analysis CSV.

    Columns: freq_hz, s11_re, s11_im, s21_re, s21_im, bloch_phase,
    bloch_atten, in_stopband.
    """
    n = len(sp.frequencies)
    zeros = np.zeros(n)
    bloch_phase = zeros if bloch_phase is None else bloch_phase
    bloch_atten = zeros if bloch_atten is None else bloch_atten
    in_stopband = np.zeros(n, dtype=bool) if in_stopband is None else in_stopband
    header = ("freq_hz,s11_re,s11_im,s21_re,s21_im,"
              "bloch_phase,bloch_atten,in_stopband")
    rows = [header]
    for i in range(n):
        rows.append(
            f"{sp.frequencies[i]:.12e},{sp.s11[i].real:.12e},{sp.s11[i].imag:.12e},"
            f"{sp.s21[i].real:.12e},{sp.s21[i].imag:.12e},"
            f"{bloch_phase[i]:.12e},{bloch_atten[i]:.12e},{int(in_stopband[i])}"
        )
    return rows
