//! Pixel metrics, corpus scoring and preference-ballot tallies.

mod ballots;
mod corpus;
mod metrics;

pub use ballots::{aggregate_ballots, Ballot, BallotReport, BallotSet, Method, QuestionType};
pub use corpus::{corpus_eval, EvalRow, EvalTable, AGGREGATE_ID};
pub use metrics::{masked_mse, masked_psnr, mse, psnr, psnr_from_mse, ssim, MetricReport, PSNR_CAP};
