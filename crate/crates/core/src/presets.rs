//! Built-in benchmark models, shipped as read-only JSON files.
//!
//! * `p1` — isotropic 4-simplex, `b = nu_1 + ... + nu_4`
//! * `p2` — anisotropic 4-simplex, `b = nu_1 + nu_2 + 2 nu_3 + 4 nu_4`
//! * `p3` — isotropic 8-simplex
//! * `p4` — skinny 8-simplex, `lambda_i = 2^{3-i}`
//! * `p5` — truncated 8-simplex, `b = sup{(1/2)|nu|, (5/16)|nu| + (5/16)nu_j}`
//! * `p6` — enlarged truncated 8-simplex, `b = sup{(1/5)|nu|, (1/8)|nu| + (1/8)nu_j}`

use crate::bounds::BoundModel;
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 6] = ["p1", "p2", "p3", "p4", "p5", "p6"];

pub fn preset_json(name: &str) -> Option<&'static str> {
    match name {
        "p1" => Some(include_str!("../presets/p1.json")),
        "p2" => Some(include_str!("../presets/p2.json")),
        "p3" => Some(include_str!("../presets/p3.json")),
        "p4" => Some(include_str!("../presets/p4.json")),
        "p5" => Some(include_str!("../presets/p5.json")),
        "p6" => Some(include_str!("../presets/p6.json")),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<BoundModel> {
    let json = preset_json(name).ok_or_else(|| {
        Error::Argument(format!(
            "unknown preset {name:?}; available: {}",
            PRESET_NAMES.join(", ")
        ))
    })?;
    BoundModel::from_json(json)
}
