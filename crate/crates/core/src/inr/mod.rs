//! Small fully connected INRs: representation, evaluation, storage, and a
//! toy-scale trainer.

mod network;
mod train;
mod volume;
mod weights;

pub use network::{Activation, LinearLayer, MlpNetwork};
pub use train::{train, TrainConfig, TrainReport};
pub use volume::ScalarVolume;
pub use weights::{load_network, parse_network, save_network, write_network, WEIGHTS_SCHEMA};
