//! One module per experiment family.

pub mod aloha;
pub mod coded;
pub mod fig6;
pub mod protocol;
