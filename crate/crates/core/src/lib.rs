//! Multi-block harmonic-balance proxy solver with an in-process
//! message-passing runtime, used to study halo-exchange aggregation,
//! collective batching, parallel binary output and thread-tier options.
//!
//! | module | contents |
//! |---|---|
//! | [`mesh`] | blocks, cuts, bodies, case files, block-to-rank partition |
//! | [`hbcore`] | field storage, spectral operator, residual, pseudo-time stepping, forces |
//! | [`runtime`] | rank workers, tagged point-to-point messages, global sum |
//! | [`exchange`] | halo exchange, per element or aggregated per cut |
//! | [`reduce`] | force-coefficient reductions |
//! | [`outio`] | restart and flowtec writers |
//! | [`hybrid`] | thread teams, work partitions, first-touch initialisation |
//! | [`bench`] | machine profiles, efficiency and energy formulas, reports |
//! | [`driver`] | complete runs |

pub mod bench;
pub mod driver;
pub mod error;
pub mod exchange;
pub mod hbcore;
pub mod hybrid;
pub mod mesh;
pub mod outio;
pub mod reduce;
pub mod runtime;

pub use error::{Error, Result};
