"""Device geometry as data: unit cells, design specs, and element chains.

All values are strict SI (henries, farads, hertz, amperes, watts, meters).
Design specs are immutable; expansion functions are pure, so everything here
is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

__all__ = [
    "NonlinearInductorSpec",
    "UnitCellSpec",
    "FishboneSpec",
    "ResonatorSpec",
    "LeafSpec",
    "SeriesInductor",
    "ShuntCapacitor",
    "ShuntResonator",
    "PeriodAnnotation",
    "LadderNetwork",
    "characteristic_impedance",
    "cutoff_frequency",
    "pump_power",
    "pump_current",
    "expand_fishbone",
    "expand_leaf",
    "uniform_line",
    "bare_ladder",
    "with_i_star",
    "write_netlist",
    "read_netlist",
]

NETLIST_HEADER = "# ki-twpa netlist v1"


@dataclass(frozen=True)
class NonlinearInductorSpec:
    """Current-dependent series inductor, L(I) = l0 * (1 + I^2 / i_star^2)."""

    l0: float
    i_star: float

    def __post_init__(self):
        if self.l0 <= 0:
            raise ValueError(f"l0 must be positive, got {self.l0}")
        if self.i_star <= 0:
            raise ValueError(f"i_star must be positive, got {self.i_star}")

    def inductance(self, current: float = 0.0) -> float:
        """Inductance in henries at the given instantaneous current."""
        return self.l0 * (1.0 + (current / self.i_star) ** 2)


@dataclass(frozen=True)
class UnitCellSpec:
    """One LC cell of the artificial line: series inductor, shunt capacitor."""

    inductor: NonlinearInductorSpec
    shunt_capacitance: float

    def __post_init__(self):
        if self.shunt_capacitance <= 0:
            raise ValueError(
                f"shunt_capacitance must be positive, got {self.shunt_capacitance}"
            )


@dataclass(frozen=True)
class FishboneSpec:
    """Periodically impedance-loaded line.

    Each supercell is exactly ``cells_per_period`` cells whose final
    ``loaded_cells`` have their shunt capacitance divided by
    ``capacitance_reduction_factor``; inductance is untouched.  In every
    third supercell the loaded run is ``loaded_cells_every_third`` cells
    instead, so the full repeating period is three supercells.
    """

    base_cell: UnitCellSpec
    cells_per_period: int = 22
    loaded_cells: int = 2
    loaded_cells_every_third: int = 4
    capacitance_reduction_factor: float = 5.0
    num_periods: int = 1
    physical_cell_length: float = 8e-6

    def __post_init__(self):
        if self.num_periods < 1:
            raise ValueError("num_periods must be >= 1")
        if not 0 <= self.loaded_cells < self.cells_per_period:
            raise ValueError("loaded_cells must satisfy 0 <= loaded_cells < cells_per_period")
        if not 0 <= self.loaded_cells_every_third <= self.cells_per_period:
            raise ValueError("loaded_cells_every_third must be <= cells_per_period")
        if self.capacitance_reduction_factor <= 1.0:
            raise ValueError("capacitance_reduction_factor must exceed 1")


@dataclass(frozen=True)
class ResonatorSpec:
    """Shunt resonator used as a pump phase shifter.

    ``loaded_q`` is defined against the 25 ohm environment a shunt branch
    sees on a 50 ohm line (source and load in parallel).
    """

    resonant_frequency: float = 6e9
    loaded_q: float = 70.0
    pairs_per_block: int = 2
    pair_separation_cells: int = 6

    def __post_init__(self):
        if self.resonant_frequency <= 0:
            raise ValueError("resonant_frequency must be positive")
        if self.loaded_q <= 0:
            raise ValueError("loaded_q must be positive")
        if self.pairs_per_block < 0:
            raise ValueError("pairs_per_block must be >= 0")


@dataclass(frozen=True)
class LeafSpec:
    """Resonator-embedded line: one phase-shifter block every block period."""

    base_cell: UnitCellSpec
    cells_per_block_period: int = 340
    resonator: ResonatorSpec = field(default_factory=ResonatorSpec)
    num_blocks: int = 1

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        if self.cells_per_block_period <= self.resonator.pair_separation_cells:
            raise ValueError("pair separation must be smaller than the block period")


# --------------------------------------------------------------------------
# network elements

@dataclass(frozen=True)
class SeriesInductor:
    l0: float
    i_star: float


@dataclass(frozen=True)
class ShuntCapacitor:
    c: float


@dataclass(frozen=True)
class ShuntResonator:
    """Series-LC branch to ground realizing (f_r, loaded Q); ``multiplicity``
    counts parallel copies combined at one node (a symmetric pair gives 2)."""

    f_r: float
    q: float
    multiplicity: int = 1


Element = SeriesInductor | ShuntCapacitor | ShuntResonator


@dataclass(frozen=True)
class PeriodAnnotation:
    """The first ``repeats`` x ``elements_per_period`` elements of the network
    are ``repeats`` identical copies of its first ``elements_per_period``."""

    elements_per_period: int
    cells_per_period: int
    repeats: int


@dataclass(frozen=True)
class LadderNetwork:
    """Ordered chain of two-port elements representing a full device."""

    elements: tuple
    total_cells: int
    periods: PeriodAnnotation | None = None

    def __post_init__(self):
        n_l = sum(1 for e in self.elements if isinstance(e, SeriesInductor))
        if n_l != self.total_cells:
            raise ValueError(
                f"total_cells={self.total_cells} but network has {n_l} series inductors"
            )
        # alternation: no two series inductors without a shunt between them
        prev_was_l = False
        for e in self.elements:
            if isinstance(e, SeriesInductor):
                if prev_was_l:
                    raise ValueError("series inductor not followed by a shunt group")
                prev_was_l = True
            else:
                prev_was_l = False
        if self.periods is not None:
            p = self.periods
            if p.elements_per_period * p.repeats > len(self.elements):
                raise ValueError("period annotation exceeds element count")

    @property
    def i_star(self) -> float:
        """Common nonlinearity scale of the series inductors."""
        vals = {e.i_star for e in self.elements if isinstance(e, SeriesInductor)}
        if len(vals) != 1:
            raise ValueError("network has no unique i_star")
        return vals.pop()

    def total_inductance(self) -> float:
        # fsum: correctly rounded, so N identical inductors sum to exactly N * l0
        return math.fsum(e.l0 for e in self.elements if isinstance(e, SeriesInductor))

    def has_resonators(self) -> bool:
        return any(isinstance(e, ShuntResonator) for e in self.elements)

    def period_elements(self) -> tuple:
        if self.periods is None:
            raise ValueError("network carries no period annotation")
        return self.elements[: self.periods.elements_per_period]


# --------------------------------------------------------------------------
# closed-form cell relations

def characteristic_impedance(cell: UnitCellSpec) -> float:
    """Line impedance sqrt(L/C) of the unloaded artificial line, in ohms."""
    return math.sqrt(cell.inductor.l0 / cell.shunt_capacitance)


def cutoff_frequency(cell: UnitCellSpec) -> float:
    """Low-pass cutoff 1 / (pi * sqrt(L*C)) of the LC ladder, in Hz."""
    return 1.0 / (math.pi * math.sqrt(cell.inductor.l0 * cell.shunt_capacitance))


def pump_power(i_rms: float, z0: float) -> float:
    """Pump power I_rms^2 * Z0 carried by a tone of rms current i_rms."""
    if i_rms < 0:
        raise ValueError("i_rms must be >= 0")
    if z0 <= 0:
        raise ValueError("z0 must be positive")
    return i_rms * i_rms * z0


def pump_current(p: float, z0: float) -> float:
    """Rms current sqrt(P/Z0) for a tone of power p on impedance z0."""
    if p < 0:
        raise ValueError("p must be >= 0")
    if z0 <= 0:
        raise ValueError("z0 must be positive")
    return math.sqrt(p / z0)


# --------------------------------------------------------------------------
# design expansion

def _cell_elements(cell: UnitCellSpec, c_override: float | None = None) -> list:
    c = cell.shunt_capacitance if c_override is None else c_override
    return [SeriesInductor(cell.inductor.l0, cell.inductor.i_star), ShuntCapacitor(c)]


def expand_fishbone(spec: FishboneSpec) -> LadderNetwork:
    """Expand a fishbone spec into its explicit element chain.

    Supercells i = 0, 1, 2, ... end with the loaded cells; every third one
    (i % 3 == 2) carries ``loaded_cells_every_third`` of them.  The element
    sequence is periodic with period three supercells.
    """
    c_loaded = spec.base_cell.shunt_capacitance / spec.capacitance_reduction_factor

    def supercell(idx: int) -> list:
        n_loaded = spec.loaded_cells_every_third if idx % 3 == 2 else spec.loaded_cells
        out = []
        for _ in range(spec.cells_per_period - n_loaded):
            out += _cell_elements(spec.base_cell)
        for _ in range(n_loaded):
            out += _cell_elements(spec.base_cell, c_loaded)
        return out

    triple = supercell(0) + supercell(1) + supercell(2)
    n_triples, leftover = divmod(spec.num_periods, 3)
    elements = triple * n_triples
    for i in range(leftover):
        elements += supercell(i)

    periods = None
    if n_triples >= 1:
        periods = PeriodAnnotation(
            elements_per_period=len(triple),
            cells_per_period=3 * spec.cells_per_period,
            repeats=n_triples,
        )
    return LadderNetwork(
        elements=tuple(elements),
        total_cells=spec.num_periods * spec.cells_per_period,
        periods=periods,
    )


def expand_leaf(spec: LeafSpec) -> LadderNetwork:
    """Expand a leaf spec into its explicit element chain.

    Each block period starts with two resonator-pair shunts attached to the
    shunt nodes of cell 1 and cell 1 + pair_separation_cells; a pair at one
    node is a single shunt of doubled admittance.  With pairs_per_block = 0
    the result is a uniform ladder.
    """
    res = spec.resonator
    pair = ShuntResonator(res.resonant_frequency, res.loaded_q, multiplicity=2)
    pair_cells = []
    if res.pairs_per_block >= 1:
        pair_cells.append(0)
    if res.pairs_per_block >= 2:
        pair_cells.append(res.pair_separation_cells)
    if res.pairs_per_block > 2:
        raise ValueError("at most two resonator pairs per block are supported")

    block = []
    for i in range(spec.cells_per_block_period):
        block += _cell_elements(spec.base_cell)
        if i in pair_cells:
            block.append(pair)

    periods = PeriodAnnotation(
        elements_per_period=len(block),
        cells_per_period=spec.cells_per_block_period,
        repeats=spec.num_blocks,
    )
    return LadderNetwork(
        elements=tuple(block) * spec.num_blocks,
        total_cells=spec.num_blocks * spec.cells_per_block_period,
        periods=periods,
    )


def uniform_line(cell: UnitCellSpec, n_cells: int) -> LadderNetwork:
    """Uniform ladder of n identical cells (no loading, no resonators)."""
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    one = _cell_elements(cell)
    return LadderNetwork(
        elements=tuple(one) * n_cells,
        total_cells=n_cells,
        periods=PeriodAnnotation(elements_per_period=2, cells_per_period=1, repeats=n_cells),
    )


def bare_ladder(network: LadderNetwork) -> LadderNetwork:
    """The same chain with resonator shunts removed (propagation background)."""
    elements = tuple(e for e in network.elements if not isinstance(e, ShuntResonator))
    return LadderNetwork(elements=elements, total_cells=network.total_cells)


# --------------------------------------------------------------------------
# netlist serialization

def write_netlist(network: LadderNetwork, path) -> None:
    """Write the element chain as line-oriented text, one element per line.

    Values are printed with %.17g so a read-back reproduces them exactly.
    """
    lines = [NETLIST_HEADER]
    for e in network.elements:
        if isinstance(e, SeriesInductor):
            lines.append(f"L {e.l0:.17g} {e.i_star:.17g}")
        elif isinstance(e, ShuntCapacitor):
            lines.append(f"C {e.c:.17g}")
        elif isinstance(e, ShuntResonator):
            lines.append(f"RES {e.f_r:.17g} {e.q:.17g} {e.multiplicity:d}")
        else:
            raise TypeError(f"unknown element {e!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_netlist(path) -> LadderNetwork:
    """Parse a netlist file back into a LadderNetwork.

    The period annotation is not part of the format, so cascades of networks
    loaded this way fall back to element-by-element evaluation.
    """
    with open(path) as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0].strip() != NETLIST_HEADER:
        raise ValueError(f"{path}: missing netlist header '{NETLIST_HEADER}'")
    elements = []
    for ln, line in enumerate(raw[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "L" and len(parts) == 3:
                elements.append(SeriesInductor(float(parts[1]), float(parts[2])))
            elif parts[0] == "C" and len(parts) == 2:
                elements.append(ShuntCapacitor(float(parts[1])))
            elif parts[0] == "RES" and len(parts) == 4:
                elements.append(
                    ShuntResonator(float(parts[1]), float(parts[2]), int(parts[3]))
                )
            else:
                raise ValueError("unrecognized element line")
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: {exc}: {line!r}") from None
    n_cells = sum(1 for e in elements if isinstance(e, SeriesInductor))
    return LadderNetwork(elements=tuple(elements), total_cells=n_cells)


def with_i_star(network: LadderNetwork, i_star: float) -> LadderNetwork:
    """Copy of the network with every series inductor's i_star replaced."""
    elements = tuple(
        replace(e, i_star=i_star) if isinstance(e, SeriesInductor) else e
        for e in network.elements
    )
    return LadderNetwork(elements=elements, total_cells=network.total_cells,
                         periods=network.periods)
