//! Generating functions, exact distributions, and tail asymptotics for the
//! total progeny of multitype Galton-Watson processes and for first-passage
//! times of random walks with bounded jumps, cross-checked by deterministic
//! Monte Carlo simulation.
//!
//! Module map:
//!
//! * [`series`] — truncated formal power-series arithmetic (f64 coefficients).
//! * [`gwmodel`] — multitype offspring laws, mean matrix, Perron root,
//!   extinction probabilities.
//! * [`progeny`] — total-progeny PGFs: fixed-point solver, closed forms,
//!   series expansions.
//! * [`walks`] — first-passage distributions, PGFs, and tail sequences for
//!   simple, stay, and (2-1) walks.
//! * [`mc`] — seedable simulation of walks and branching processes, with
//!   pathwise extraction of the embedded branching structure.
//! * [`cli`] — the `progenykit` command-line front end.

pub mod cli;
pub mod gwmodel;
pub mod mc;
pub mod progeny;
pub mod series;
pub mod walks;
