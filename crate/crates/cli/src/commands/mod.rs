pub mod eval;
pub mod fuse;
pub mod gpm;
pub mod losses;
pub mod mmd;
pub mod split;
pub mod sweep;
pub mod synth;
pub mod warp;
pub mod wct;
