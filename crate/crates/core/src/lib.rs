//! Polynomial inequalities, sampling discretization and positive cubature on
//! planar C2 domains.

pub mod bernstein;
pub mod cubature;
pub mod discretize;
pub mod domain;
pub mod nets;
pub mod parabola;
pub mod polycalc;
pub mod quad;
