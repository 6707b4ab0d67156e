//! Correlated linear Bloom filters for recovering which nodes relayed a packet
//! along a linear multi-hop road network, and where they were.

pub mod analytics;
pub mod bloom;
pub mod combinatorics;
pub mod segmentation;
pub mod protocol;
pub mod optimizer;
pub mod sim;
