//! Simulation of arrays of Kerr oscillators driven near three (or two) times
//! their eigenfrequency: closed-system sweeps into phase-locked states,
//! symmetry-resolved spectra and dissipative steady states.

pub mod banded;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod lanczos;
pub mod model;
pub mod ode;
pub mod open_system;
pub mod povm;
pub mod sparse;
pub mod spectra;
pub mod symmetry;

pub use error::{Error, Result};
pub use evolve::{
    geometric_asymmetry, propagate_sweep, propagate_sweep_with, SweepOptions, Trajectory,
};
pub use fock::{
    create_op, destroy_op, embed_site, expectation, number_op, DensityMatrix, FockSpace,
    OperatorMatrix, StateVector, C64,
};
pub use model::{
    build_array_hamiltonian, build_single_hamiltonian, classical_surface, find_extrema,
    schedule_at, ArrayConfig, Boundary, Coupling, DriveOrder, OscillatorParams, SweepSchedule,
};
pub use open_system::{
    classical_fixed_points, landau_zener, laplacian_at_origin, liouvillian, scan_laplacian,
    semiclassical_steady_state, steady_state, three_state_threshold, wigner, AxisSpec,
    DissipationParams, FixedPointReport, GridSpec, Liouvillian, ScanAxis, ScanTable, WignerGrid,
};
pub use povm::{
    config_probabilities, e_theta, measurement_set, ConfigProbabilities, MeasurementSet,
};
pub use spectra::{
    array_low_spectrum, perturbative_shift, single_spectrum_path, CouplingSign, SpectrumOptions,
    SpectrumResult,
};
pub use symmetry::{
    build_generators, config_orbit, symmetric_projector, symmetric_weight, ConfigOrbit,
    SymmetricSector, SymmetryGenerators,
};
