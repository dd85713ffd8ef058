//! Numerical verification toolkit for a type-II blow-up construction of the
//! Zakharov system on R^4: ground state profiles, distorted Fourier data,
//! multipliers, Fredholm operators and the non-degeneracy certificates.

pub mod fd;
pub mod ode;
pub mod par;
pub mod quad;
pub mod radial;
pub mod special;
pub mod profiles;
pub mod hankel;
pub mod spectral;
pub mod certificate;
pub mod constants;
pub mod multipliers;
pub mod fredholm;
pub mod propagators;
pub mod config;
pub mod verify;
pub mod report;
pub mod dump;
