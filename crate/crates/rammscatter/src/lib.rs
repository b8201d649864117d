//! Fixed-energy scattering toolkit: forward solvers for compactly supported
//! potentials, the scattering amplitude as a harmonic coefficient matrix, and
//! inversion of amplitude data for the Fourier transform of the potential.

pub mod datastore;
pub mod dtn;
pub mod forward;
pub mod geophysics;
pub mod inversion;
pub mod obstacle;
pub mod specfun;
pub mod variety;
