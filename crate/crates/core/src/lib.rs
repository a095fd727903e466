//! Budgeted computability lab: a toy standard machine, dovetailed graph
//! enumeration, list-restricted complexity oracles and the list-adversary
//! games built on them.

pub mod adversary;
pub mod bits;
pub mod bitvm;
pub mod complexity;
pub mod enumeration;
pub mod experiment;
pub mod lists;
pub mod numbering;
