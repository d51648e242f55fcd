//! Boundedness and compactness of composition operators `C_φ` on the Hardy
//! space of the bidisc and tridisc, for polynomial symbols `φ`.
//!
//! The pipeline: [`contact::find_contacts`] locates boundary points where some
//! `|φ_j| = 1`, [`jets`] expands the symbol there to third order,
//! [`classify`] reads signatures of the resulting quadratic forms, and
//! [`carleson`] estimates preimage measures of Carleson boxes as an
//! independent numerical check.

mod dd;
pub mod carleson;
pub mod classify;
pub mod contact;
pub mod examples;
pub mod jets;
pub mod par;
pub mod polysym;
pub mod quadform;
