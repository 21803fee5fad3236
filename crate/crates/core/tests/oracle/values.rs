//! Frozen extended-precision values produced by `hyperbolic_oracle.py`.

pub const INNER_K005: f64 = -23.04886114323221827500569;
pub const LIFT_TIME_K005: f64 = 4.532107677449863944262772;
pub const DIST_K1_INNER_M2: f64 = 1.316957896924816708625046;
pub const SQ_LORENTZIAN_K005: f64 = 4.586108799253779847579292;
pub const DIST_PAIR_K005: f64 = 2.121569772130848537285833;
pub const EXPMAP_SPACE_NORM_2_3: f64 = 2.402741047062447216591475;
pub const EXPMAP_TIME_2_3: f64 = 5.076727739325671696321817;
pub const SCORE_DISTANCE_B8: f64 = 0.4658721836057055446286498;
pub const SCORE_ANGLE_B8: f64 = 0.000004974219045872716103951168;
pub const EXT_B8_0_1: f64 = 2.559667536118802371674735;
pub const EXT_B8_1_0: f64 = 2.752063728872585376728345;
pub const LOSS_UNSUP_DISTANCE: f64 = 0.1346407930046865534206043;
pub const LOSS_SUP_DISTANCE: f64 = 2.340105539002721547019565;
pub const LOSS_UNSUP_ANGLE: f64 = 16.88466679670173677093418;
pub const LOSS_SUP_ANGLE: f64 = 13.19251909205764747482983;
pub const LOSS_TOTAL_ALPHA_0_3: f64 = 5.443166251137310128021856;
pub const LOSS_TOTAL_NOCLIP_ALPHA_0_3: f64 = 5.452582986766667730837889;
