//! Multinomial choice on recommendation networks.

pub mod ambassador;
pub mod cascade;
pub mod choice;
pub mod error;
pub mod estimate;
pub mod fixtures;
pub mod herding;
pub mod linalg;
pub mod netmodel;
pub mod pricing;

pub use error::{Error, Result};
pub use netmodel::NetworkModel;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/shares.md")]
    mod shares {}
    #[doc = include_str!("../../../book/src/ambassadors.md")]
    mod ambassadors {}
    #[doc = include_str!("../../../book/src/cascades.md")]
    mod cascades {}
    #[doc = include_str!("../../../book/src/herding.md")]
    mod herding {}
    #[doc = include_str!("../../../book/src/pricing.md")]
    mod pricing {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
}
