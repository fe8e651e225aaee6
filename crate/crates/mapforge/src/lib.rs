//! Exact enumeration of fatgraphs and planar maps, with the bijections,
//! distance statistics and scaling limits that go with them.

pub mod series;
pub mod fatgraph;
pub mod numeric;
pub mod planar;
pub mod ortho;
pub mod stringeq;
pub mod geodesic;
pub mod bijections;
pub mod observables;
pub mod branching;
pub mod cli;
