pub mod canonical;
pub mod conformance;
pub mod crypto;
pub mod gate;
pub mod intent;
pub mod json;
pub mod pdr;
pub mod policy;
pub mod schema;
pub mod sim;
pub mod types;
