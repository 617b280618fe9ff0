//! Learning from demonstration with dynamic movement primitives, plus the
//! pose and dataset scaffolding used to feed a pose estimator.
//!
//! * [`trajectory`]: recorded motions, CSV I/O, resampling and differentiation.
//! * [`dmp`]: primitive training (locally weighted regression) and RK4 rollout.
//! * [`task`]: named sub-task programs and whole-task replanning.
//! * [`pose`]: rigid transforms, rotational symmetry and viewpoint sampling.
//! * [`dataset`]: NPY pose files and the `pose/ rgb/ mask/` dataset layout.
//! * [`cli`]: the `lfd` command-line front end.

pub mod cli;
pub mod dataset;
pub mod dmp;
pub mod error;
pub mod pose;
pub mod task;
pub mod trajectory;

pub use error::{Error, Result};
