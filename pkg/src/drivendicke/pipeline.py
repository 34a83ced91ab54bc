"""One-call solution of a parameter point, with lazily computed observables."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import bath as bath_mod
from . import floquet, observables
from .errors import FourierCutoffError
from .model import Eigensystem, ModelParams, Operators, dicke_hamiltonian, system_energies, working_operators

log = logging.getLogger(__name__)

AUTO_FOURIER_RETRIES = 3


def floquet_solve(params: ModelParams, ops: Operators, H_D: np.ndarray,
                  system: Eigensystem) -> floquet.FloquetBasis:
    """Floquet basis with automatic enlargement of an automatic Fourier window."""
    F, K = floquet.resolve_numerics(params, system.energies)
    for attempt in range(AUTO_FOURIER_RETRIES + 1):
        prop = floquet.one_cycle_propagator(params, ops, H_D, K)
        try:
            basis = floquet.floquet_basis(prop, params, H_D, F)
            break
        except FourierCutoffError:
            if params.n_fourier or attempt == AUTO_FOURIER_RETRIES:
                raise
            F *= 2
            if not params.n_steps:
                K = max(K, 1 << int(np.ceil(np.log2(4 * F))))
            log.info("enlarging Fourier window to %d modes (%d steps)", F, K)
    return floquet.with_labels(basis, floquet.label_states(basis, system))


@dataclass
class Solution:
    """All intermediate objects for one parameter point, computed on demand."""

    params: ModelParams

    @cached_property
    def ops(self) -> Operators:
        return working_operators(self.params)

    @cached_property
    def H_D(self) -> np.ndarray:
        return dicke_hamiltonian(self.params, self.ops)

    @cached_property
    def system(self) -> Eigensystem:
        return system_energies(self.H_D)

    @cached_property
    def basis(self) -> floquet.FloquetBasis:
        return floquet_solve(self.params, self.ops, self.H_D, self.system)

    @cached_property
    def table(self) -> floquet.TransitionTable:
        return floquet.transition_operators(self.basis, self.ops.X)

    @cached_property
    def bath(self) -> bath_mod.BathSpec:
        return bath_mod.BathSpec.from_params(self.params)

    @cached_property
    def rates(self) -> bath_mod.RateSet:
        return bath_mod.rate_set(self.table, self.bath)

    @cached_property
    def populations(self) -> np.ndarray:
        return bath_mod.stationary_populations(self.rates.pauli)

    @cached_property
    def output(self) -> observables.OutputDecomposition:
        return observables.output_operator(self.basis, self.table)

    @property
    def quasienergies(self) -> np.ndarray:
        return self.basis.eps

    def peaks(self) -> observables.PeakList:
        plist = observables.emission_spectrum(self.output, self.rates.Z, self.rates.pauli,
                                              self.populations, self.bath)
        return observables.PeakList(peaks=plist.peaks, elastic=plist.elastic,
                                    metadata=self.params.to_dict())

    def spectrum(self, omega_grid) -> np.ndarray:
        return self.peaks().evaluate(omega_grid, self.bath)

    def g2_zero(self) -> float:
        return observables.g2_zero(self.output, self.populations)

    def g2_tau(self, tau_grid) -> np.ndarray:
        return observables.g2_tau(self.output, self.rates.Z, self.rates.pauli,
                                  self.populations, tau_grid)

    def flux(self) -> float:
        return observables.output_flux(self.output, self.populations, self.bath)

    def averaged_state(self) -> np.ndarray:
        return self.basis.averaged_state(self.populations)

    def emitter_state(self) -> observables.EmitterState:
        return observables.reduce_to_emitters(self.averaged_state(), self.ops)

    def concurrence(self) -> float:
        return observables.concurrence(self.emitter_state().rho4)

    def eof(self) -> float:
        return observables.eof(self.concurrence())


def solve(params: ModelParams) -> Solution:
    return Solution(params)
