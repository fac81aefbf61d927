//! Frames, sequences and the on-disk formats they travel in.

mod frame;
pub mod pnm;
pub mod rpt;

pub use frame::{FeatureSequence, Frame, SequenceMeta, VideoSequence};
pub use pnm::{read_frame, read_frame_any, write_frame, PnmFormat};
pub use rpt::{read_tensor, write_tensor, Tensor};
