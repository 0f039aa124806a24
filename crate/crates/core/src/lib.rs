pub mod cli;
pub mod deltak;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lnd;
pub mod norms;
pub mod occupation;
pub mod path;
pub mod process;
pub mod rng;
pub mod young;

pub use error::{Result, SbeError};
pub use occupation::{BallMass, OccupationMeasure, SmallBallIndex};
pub use path::SampledPath;
