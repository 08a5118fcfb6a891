pub mod error;
pub mod lyndon;
pub mod path;
pub mod quadrature;
pub mod sle;
pub mod specfun;
pub mod tensor;
pub mod winding;

pub use error::{Result, SigError};
pub use path::PolyLine;
pub use tensor::{TruncatedTensor, Word};
