pub mod agents;
pub mod corpora;
pub mod http;
pub mod oracles;
