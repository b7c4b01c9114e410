//! HTTP service for the noveltrace pipeline.
//!
//! Routes:
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/search?q=&limit=` | arXiv title search |
//! | POST | `/evaluate` | full evaluation, streamed as server-sent events |
//! | POST | `/abstract` | title + abstract evaluation, plain JSON |
//! | GET | `/library` | summaries of stored reports |
//! | GET | `/report/{key}` | one stored report |
//! | POST | `/cancel/{id}` | cancel a running evaluation |
//! | GET | `/config` | defaults and available models |

pub mod api;
pub mod runtime;
pub mod store;

pub use api::{router, AbstractRequest, AppState, DoneEvent, EvaluateRequest, EVALUATION_ID_HEADER};
pub use runtime::{build_pipeline, RuntimeOptions};
pub use store::{ReportStore, ReportSummary};
