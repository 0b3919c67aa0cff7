//! Data-ownership claims for delisting requests: CA-certified attributes,
//! packed RSA-FDH credentials, article matching and the claim/token/report
//! protocol between users, an ownership certification party and indexing
//! systems.

pub mod bench;
pub mod codec;
pub mod corpus;
pub mod credentials;
pub mod fixtures;
pub mod hash;
pub mod matching;
pub mod protocol;
pub mod rsa_fdh;
pub mod services;
