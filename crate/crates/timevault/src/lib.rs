//! Send a message that can only be read after a chosen time.
//!
//! A client encrypts a message under a fresh key, splits the key's recovery
//! material across a committee of share holders, and posts the encrypted
//! bundle to a coordination ledger. Holders derive their shares from a
//! single broadcast commitment, publish them once the release time passes,
//! and anyone can pair-check each published share before combining a
//! threshold of them to rebuild the key. The crate also ships a
//! discrete-event simulator for the coordination layer and an experiment
//! measuring how resilient rank-aggregation votes are to insincere ballots.

pub mod group;
pub mod ledger;
pub mod sim;
pub mod timelock;
pub mod voting;
