#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod fespace;
pub mod friction;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod rothe;
pub mod spectral;
pub mod verify;
