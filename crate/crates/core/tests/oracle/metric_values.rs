//! Frozen extended-precision values produced by `metrics_oracle.py`.

pub const HOMOGENEITY_LCG50: f64 = 0.08135036977260206667903172;
pub const HOMOGENEITY_TREE_COARSE: f64 = 0.3254316439855301493687662;
pub const HOMOGENEITY_TREE_MID: f64 = 0.5066012155475188030922043;
pub const HOMOGENEITY_TREE_FINE: f64 = 0.5655194764520047390746777;
