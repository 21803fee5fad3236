#![allow(clippy::excessive_precision, dead_code)]

pub mod metric_values;
pub mod values;
