//! Wildfire reconstruction from satellite active-fire detections, and
//! LR / LSTM / GRU classifiers for how a fire continues.
//!
//! Detections are encoded as 80-value feature vectors ([`ingest`]), linked
//! to their nearby neighbours in space and time and split into connected
//! components ([`firegraph`]), then cut into fixed-length samples
//! ([`sequence`]). The [`nn`] module holds the models with hand-written
//! backpropagation through time, and [`experiment`] runs the split,
//! cross-validation and repeat protocol that produces the result tables.
//!
//! ```
//! use wildfire_rnn::firegraph::GraphParams;
//! use wildfire_rnn::ingest::BoundingBox;
//! use wildfire_rnn::pipeline::reconstruct;
//! use wildfire_rnn::sequence::{Dataset, Task};
//! use wildfire_rnn::synth::{synth_generate, SynthSpec};
//!
//! let out = synth_generate(&SynthSpec { n_fires: 50, seed: 1, ..SynthSpec::default() })?;
//! let rec = reconstruct(&out.detections, &BoundingBox::SOUTH_AFRICA, &GraphParams::default())?;
//! assert_eq!(rec.fires.len(), 50);
//! let data = Dataset::build(&rec.fires, Task::Binary, 3)?;
//! assert_eq!(data.dim(), 160);
//! # Ok::<(), wildfire_rnn::Error>(())
//! ```

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod firegraph;
pub mod geo;
pub mod ingest;
pub mod nn;
pub mod pipeline;
pub mod sequence;
pub mod spatial;
pub mod synth;
pub mod unionfind;

pub use error::{Error, Result};

// The guide's code listings run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/fire-graph.md")]
    mod fire_graph {}
    #[doc = include_str!("../../../book/src/samples.md")]
    mod samples {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
