"""Collision-model heat engine built from reflection off a gated impurity.

A static qubit sits between a reservoir and a closed gate (a perfect mirror).
Each reservoir spin enters, rattles between impurity and mirror, and returns
to the reservoir; the net effect on the joint spin state is a unitary
reflection operator R.  Tracing out the reservoir spin leaves a channel on
the static qubit.  Repeated collisions with a polarized (ferromagnetic)
reservoir pump the qubit toward the aligned pure state; collisions with an
unpolarized (non-magnetic) reservoir relax it back to the maximally mixed
state, extracting up to ln 2 of entropy per cycle.

The mirror contributes m = -exp(i*mirror_phase) * I, where mirror_phase is
the round-trip propagation phase to the gate.  At mirror_phase = 0 the
multiple-scattering series collapses to R = -I for every omega: the impurity
sits at a node of the standing wave and the channel is the identity.  The
default working point is a quarter-wave spacing, mirror_phase = pi/2.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .qmat import (
    BlochVector,
    DensityMatrix,
    bloch,
    kron,
    maximally_mixed,
    polarized_qubit,
    ptrace,
    trace_distance,
    unit_axis,
    von_neumann_entropy,
)
from .scatter import ScatterParams, qubit_block

DEFAULT_MIRROR_PHASE = np.pi / 2
TRACE_PRESERVATION_TOL = 1e-12

_I4 = np.eye(4, dtype=complex)


@dataclass(frozen=True, eq=False)
class Reservoir:
    """Source of fresh flying spins: 'polarized' along axis, or 'unpolarized'."""

    kind: str
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if self.kind not in ("polarized", "unpolarized"):
            raise ValueError(f"kind must be 'polarized' or 'unpolarized', got {self.kind!r}")
        n = unit_axis(self.axis)
        n = n.copy()
        n.flags.writeable = False
        object.__setattr__(self, "axis", n)

    def state(self) -> DensityMatrix:
        if self.kind == "polarized":
            return polarized_qubit(self.axis)
        return maximally_mixed(2)


@dataclass(frozen=True)
class EngineConfig:
    params: ScatterParams
    mirror_phase: float = DEFAULT_MIRROR_PHASE
    max_iters: int = 500
    tol: float = 1e-9

    def __post_init__(self):
        if not np.isfinite(self.mirror_phase):
            raise ValueError("mirror_phase must be finite")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def reflection_channel(params: ScatterParams, mirror_phase: float) -> np.ndarray:
    """Total reflection operator R on (flying, static) for impurity plus mirror.

    R = r + t' m (I - r' m)^-1 t with m = -exp(i*mirror_phase) I.  Unitary:
    every incoming amplitude eventually returns to the reservoir.
    """
    blk = qubit_block(params)
    m = -np.exp(1j * mirror_phase) * _I4
    inner = _I4 - blk.r_prime @ m
    series = np.linalg.solve(inner, blk.t)
    r_tot = blk.r + blk.t_prime @ m @ series
    err = np.max(np.abs(r_tot.conj().T @ r_tot - _I4))
    if err > 1e-10:
        raise RuntimeError(f"reflection operator not unitary: deviation {err:.3e}")
    return r_tot


def interact_once(rho_s: DensityMatrix, reservoir: Reservoir,
                  config: EngineConfig) -> DensityMatrix:
    """One collision: fresh reservoir spin in, reflected out and traced away."""
    if rho_s.dim != 2:
        raise ValueError(f"static qubit state must have dim 2, got {rho_s.dim}")
    r = reflection_channel(config.params, config.mirror_phase)
    joint = kron(reservoir.state().mat, rho_s.mat)
    out = r @ joint @ r.conj().T
    tr_err = abs(out.trace() - 1.0)
    if tr_err > TRACE_PRESERVATION_TOL:
        raise RuntimeError(f"collision broke trace preservation by {tr_err:.3e}")
    return DensityMatrix(ptrace(out, [2, 2], [1]))


@dataclass(frozen=True)
class CycleStep:
    iteration: int
    phase: str
    bloch: BlochVector
    entropy_nats: float


@dataclass(frozen=True)
class CycleTrace:
    steps: tuple
    fm_iterations: int
    fm_converged: bool
    fm_residual: float
    nm_iterations: int
    nm_converged: bool
    nm_residual: float
    entropy_transferred_nats: float
    final_state: DensityMatrix

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "phase", "bloch_x", "bloch_y", "bloch_z", "entropy_nats"])
            for s in self.steps:
                w.writerow([
                    s.iteration, s.phase,
                    f"{s.bloch.x:.17g}", f"{s.bloch.y:.17g}", f"{s.bloch.z:.17g}",
                    f"{s.entropy_nats:.17g}",
                ])


def _run_phase(rho: DensityMatrix, reservoir: Reservoir, target: DensityMatrix,
               config: EngineConfig, phase: str, steps: list) -> tuple:
    converged = False
    resid = trace_distance(rho, target)
    iters = 0
    for i in range(1, config.max_iters + 1):
        rho = interact_once(rho, reservoir, config)
        iters = i
        resid = trace_distance(rho, target)
        steps.append(CycleStep(iteration=i, phase=phase, bloch=bloch(rho),
                               entropy_nats=von_neumann_entropy(rho)))
        if resid < config.tol:
            converged = True
            break
    return rho, iters, converged, resid


def run_cycle(initial: DensityMatrix, config: EngineConfig,
              fm_axis=(0.0, 0.0, 1.0)) -> CycleTrace:
    """One full engine cycle: polarize against the FM reservoir, then
    depolarize against the NM reservoir.

    Entropy transferred is the entropy gained during the NM phase,
    S(end of NM) - S(end of FM); at most ln 2 per cycle.
    """
    fm = Reservoir(kind="polarized", axis=np.asarray(fm_axis, dtype=float))
    nm = Reservoir(kind="unpolarized")
    steps: list = []

    rho = initial
    steps.append(CycleStep(iteration=0, phase="FM", bloch=bloch(rho),
                           entropy_nats=von_neumann_entropy(rho)))
    rho, fm_iters, fm_ok, fm_resid = _run_phase(
        rho, fm, polarized_qubit(fm.axis), config, "FM", steps)
    s_fm_end = von_neumann_entropy(rho)

    rho, nm_iters, nm_ok, nm_resid = _run_phase(
        rho, nm, maximally_mixed(2), config, "NM", steps)
    s_nm_end = von_neumann_entropy(rho)

    return CycleTrace(
        steps=tuple(steps),
        fm_iterations=fm_iters, fm_converged=fm_ok, fm_residual=fm_resid,
        nm_iterations=nm_iters, nm_converged=nm_ok, nm_residual=nm_resid,
        entropy_transferred_nats=s_nm_end - s_fm_end,
        final_state=rho,
    )
