//! Shared ledger substrate: identities, canonical encoding, keyed digests,
//! transactions, blocks, and the hash-linked per-region ledger.

pub mod block;
pub mod codec;
pub mod crypto;
pub mod id;
pub mod ledger;
pub mod tx;
