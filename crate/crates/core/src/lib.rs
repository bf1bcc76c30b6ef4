pub mod agentflow;
pub mod corpus;
pub mod evalkit;
pub mod exemplar;
pub mod extraction;
pub mod knowledgebase;
pub mod llm;
pub mod ratelimit;
pub mod records;
