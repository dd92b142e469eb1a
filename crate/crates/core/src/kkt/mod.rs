//! The monolithic first-order optimality system: Lagrangian, residual and
//! its generalized Jacobian on the free dofs.

mod layout;
mod state;
mod system;

pub use layout::{Block, BlockLayout, Layout, Spaces};
pub use state::KKTState;
pub use system::{ActiveSet, KktParams, KktSetup, KktSystem};
