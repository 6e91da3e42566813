//! Personalized trustworthiness ratings for chatbots.
//!
//! A chatbot is audited through its dialog corpus (or a live session). Each
//! trust issue has a checker producing a raw score in `[0, 1]`; scores are
//! binned to a Low/Medium/High risk scale and combined under a user
//! profile's importance ranking into one aggregate level.

pub mod checkers;
pub mod connector;
pub mod corpus;
pub mod rating;
pub mod sensitivity;
pub mod voting;
