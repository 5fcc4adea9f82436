//! Verification toolkit for diagonal braidings arising from lattice screening
//! charges: cyclotomic arithmetic, discriminant forms, Nichols algebra
//! dimensions, Frobenius-Perron ledgers and false-theta asymptotics.

pub mod cyclo;
pub mod fusion;
pub mod lattice;
pub mod linalg;
pub mod nichols;
pub mod qseries;
pub mod rational;
pub mod rootdata;
pub mod verifier;
