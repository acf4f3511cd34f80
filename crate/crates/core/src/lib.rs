pub mod bound;
pub mod cli;
pub mod complexity;
pub mod ergostat;
pub mod error;
pub mod exactgeom;
pub mod normlab;
pub mod pamap;
pub mod ulam;
