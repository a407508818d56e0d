//! Numerical laboratory for the law of large numbers of compositions of
//! i.i.d. random operator semigroups `exp(A_1 t/n) ... exp(A_n t/n)` on
//! finite truncations of `l_p`, `1 <= p <= 2`.

pub mod ensembles;
pub mod examples_closed;
pub mod harness;
pub mod lp_core;
pub mod m_conjugation;
pub mod rng;
pub mod semigroup_lln;
pub mod stats;
