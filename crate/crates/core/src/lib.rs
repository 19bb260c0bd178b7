pub mod analysis;
pub mod cli;
pub mod io;
pub mod markov;
pub mod quadtree;
pub mod render;
pub mod search;
pub mod system;
