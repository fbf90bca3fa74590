//! Named Hamiltonian families with numeric parameters.
//!
//! Every entry builds a [`HamiltonianSpec`] from a flat `name -> value` map, so
//! configuration files and the command line can construct the full zoo used by
//! the experiments: plateau bumps and shells, mollified ramps, sky-scraper
//! towers, translation generators, biradial products on `R^4`, and smooth
//! truncations of a Hamiltonian that blows up on a circle.

use super::profile::{
    BumpProfile, C2Scalar, ClampProfile, HatProfile, RampProfile, ShellProfile, SkyScraperProfile,
    WindowProfile,
};
use super::{HamImpl, HamKind, HamiltonianSpec};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::sync::Arc;

/// One named parameter with its default.
#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub doc: &'static str,
}

/// One catalog family.
#[derive(Clone, Copy, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [ParamSpec],
}

const ZERO_PARAMS: &[ParamSpec] = &[ParamSpec {
    name: "dim",
    default: 2.0,
    doc: "phase-space dimension (2 or 4)",
}];

const RADIAL_BUMP_PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "height",
        default: 1.0,
        doc: "plateau value at the origin (may be negative)",
    },
    ParamSpec {
        name: "r_in",
        default: 1.0,
        doc: "radius up to which the value is exactly `height`",
    },
    ParamSpec {
        name: "r_out",
        default: 2.0,
        doc: "radius beyond which the value vanishes",
    },
    ParamSpec {
        name: "dim",
        default: 2.0,
        doc: "phase-space dimension (2 or 4)",
    },
];

const RADIAL_SHELL_PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "height",
        default: 1.0,
        doc: "plateau value on the shell",
    },
    ParamSpec {
        name: "r0",
        default: 0.8,
        doc: "inner radius where the rise starts",
    },
    ParamSpec {
        name: "r1",
        default: 0.95,
        doc: "radius where the plateau starts",
    },
    ParamSpec {
        name: "r2",
        default: 1.05,
        doc: "radius where the plateau ends",
    },
    ParamSpec {
        name: "r3",
        default: 1.2,
        doc: "outer radius where the value vanishes",
    },
    ParamSpec {
        name: "dim",
        default: 2.0,
        doc: "phase-space dimension (2 or 4)",
    },
];

const RADIAL_RAMP_PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "height",
        default: 1.0,
        doc: "value at the origin",
    },
    ParamSpec {
        name: "r_max",
        default: 1.0,
        doc: "radius beyond which the value vanishes",
    },
    ParamSpec {
        name: "width",
        default: 0.08,
        doc: "mollification width (fraction of the squared-radius range)",
    },
    ParamSpec {
        name: "dim",
        default: 2.0,
        doc: "phase-space dimension (2 or 4)",
    },
];

const SKY_SCRAPER_PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "floors",
        default: 3.0,
        doc: "number of unit-height floors stacked at dyadic scales",
    },
    ParamSpec {
        name: "dim",
        default: 2.0,
        doc: "phase-space dimension (2 or 4)",
    },
];

const TRANSLATOR_PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "delta",
        default: 2.0,
        doc: "upward momentum shift applied on the target box",
    },
    ParamSpec {
        name: "q0",
        default: 0.0,
        doc: "left edge of the target box in q",
    },
    ParamSpec {
        name: "q1",
        default: 1.0,
        doc: "right edge of the target box in q",
    },
    ParamSpec {
        name: "p0",
        default: 0.0,
        doc: "bottom edge of the target box in p",
    },
    ParamSpec {
        name: "p1",
        default: 1.0,
        doc: "top edge of the target box in p",
    },
    ParamSpec {
        name: "margin",
        default: 0.25,
        doc: "mollification margin around the box",
    },
];

const BIRADIAL_PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "f_height",
        default: 0.8,
        doc: "plateau value of the first-plane factor",
    },
    ParamSpec {
        name: "f_r_in",
        default: 1.0,
        doc: "plateau radius of the first-plane factor",
    },
    ParamSpec {
        name: "f_r_out",
        default: 2.0,
        doc: "support radius of the first-plane factor",
    },
    ParamSpec {
        name: "g_height",
        default: 1.0,
        doc: "plateau value of the second-plane factor",
    },
    ParamSpec {
        name: "g_r_in",
        default: 1.0,
        doc: "plateau radius of the second-plane factor",
    },
    ParamSpec {
        name: "g_r_out",
        default: 2.0,
        doc: "support radius of the second-plane factor",
    },
];

const GAP_TRUNCATION_PARAMS: &[ParamSpec] = &[ParamSpec {
    name: "level",
    default: 3.0,
    doc: "clamp level; the truncation agrees with the unbounded target below it",
}];

const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "zero",
        summary: "identically zero (identity flow)",
        params: ZERO_PARAMS,
    },
    CatalogEntry {
        name: "radial_bump",
        summary: "plateau bump in |x|^2: height inside r_in, zero outside r_out",
        params: RADIAL_BUMP_PARAMS,
    },
    CatalogEntry {
        name: "radial_shell",
        summary: "annular plateau supported between r0 and r3",
        params: RADIAL_SHELL_PARAMS,
    },
    CatalogEntry {
        name: "radial_ramp",
        summary: "mollified descending ramp with certified slope bound",
        params: RADIAL_RAMP_PARAMS,
    },
    CatalogEntry {
        name: "sky_scraper",
        summary: "tower of unit-height floors at dyadic scales around the origin",
        params: SKY_SCRAPER_PARAMS,
    },
    CatalogEntry {
        name: "translator",
        summary: "hat(q) * window(p): shifts the target box upward by delta",
        params: TRANSLATOR_PARAMS,
    },
    CatalogEntry {
        name: "biradial",
        summary: "product of plane bumps on R^4 with exactly solvable flow",
        params: BIRADIAL_PARAMS,
    },
    CatalogEntry {
        name: "gap_truncation",
        summary: "smooth clamp of a Hamiltonian blowing up on a circle in R^4",
        params: GAP_TRUNCATION_PARAMS,
    },
];

/// All catalog families.
pub fn catalog_entries() -> &'static [CatalogEntry] {
    ENTRIES
}

fn resolve_params(
    entry: &CatalogEntry,
    overrides: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let mut values: BTreeMap<String, f64> = entry
        .params
        .iter()
        .map(|p| (p.name.to_string(), p.default))
        .collect();
    for (key, val) in overrides {
        if !values.contains_key(key) {
            let known: Vec<&str> = entry.params.iter().map(|p| p.name).collect();
            return Err(Error::Config(format!(
                "unknown parameter '{key}' for catalog entry '{}'; known: {}",
                entry.name,
                known.join(", ")
            )));
        }
        if !val.is_finite() {
            return Err(Error::Config(format!(
                "parameter '{key}' must be finite, got {val}"
            )));
        }
        values.insert(key.clone(), *val);
    }
    Ok(values)
}

fn require_dim(values: &BTreeMap<String, f64>) -> Result<usize> {
    let raw = values.get("dim").copied().unwrap_or(2.0);
    if raw == 2.0 {
        Ok(2)
    } else if raw == 4.0 {
        Ok(4)
    } else {
        Err(Error::Dimension(format!(
            "catalog Hamiltonians support dim 2 or 4, got {raw}"
        )))
    }
}

fn kind_of(name: &str, values: &BTreeMap<String, f64>) -> HamKind {
    HamKind::Catalog {
        name: name.to_string(),
        params: values.iter().map(|(k, v)| (k.clone(), *v)).collect(),
    }
}

/// Build a Hamiltonian from a catalog family name and parameter overrides.
pub fn build_catalog(name: &str, overrides: &BTreeMap<String, f64>) -> Result<HamiltonianSpec> {
    let entry = ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| {
            let known: Vec<&str> = ENTRIES.iter().map(|e| e.name).collect();
            Error::Config(format!(
                "unknown catalog entry '{name}'; known: {}",
                known.join(", ")
            ))
        })?;
    let values = resolve_params(entry, overrides)?;
    let kind = kind_of(name, &values);
    let spec = match name {
        "zero" => {
            let dim = require_dim(&values)?;
            HamiltonianSpec::zero(dim)
        }
        "radial_bump" => {
            let dim = require_dim(&values)?;
            let height = values["height"];
            let r_in = values["r_in"];
            let r_out = values["r_out"];
            if !(r_in >= 0.0 && r_out > r_in) {
                return Err(Error::Config(format!(
                    "radial_bump needs 0 <= r_in < r_out, got ({r_in}, {r_out})"
                )));
            }
            HamiltonianSpec::from_radial_profile(
                Arc::new(BumpProfile::new(height, r_in * r_in, r_out * r_out)),
                dim,
                r_out * r_out,
                format!("radial bump h={height} on [{r_in}, {r_out}]"),
            )?
        }
        "radial_shell" => {
            let dim = require_dim(&values)?;
            let (h, r0, r1, r2, r3) = (
                values["height"],
                values["r0"],
                values["r1"],
                values["r2"],
                values["r3"],
            );
            if !(0.0 <= r0 && r0 < r1 && r1 <= r2 && r2 < r3) {
                return Err(Error::Config(format!(
                    "radial_shell needs 0 <= r0 < r1 <= r2 < r3, got ({r0}, {r1}, {r2}, {r3})"
                )));
            }
            HamiltonianSpec::from_radial_profile(
                Arc::new(ShellProfile::new(h, r0 * r0, r1 * r1, r2 * r2, r3 * r3)),
                dim,
                r3 * r3,
                format!("radial shell h={h} on [{r0}, {r3}]"),
            )?
        }
        "radial_ramp" => {
            let dim = require_dim(&values)?;
            let (h, r_max, width) = (values["height"], values["r_max"], values["width"]);
            if !(r_max > 0.0 && width > 0.0 && width < 0.5) {
                return Err(Error::Config(format!(
                    "radial_ramp needs r_max > 0 and width in (0, 0.5), got ({r_max}, {width})"
                )));
            }
            HamiltonianSpec::from_radial_profile(
                Arc::new(RampProfile::new(h, r_max * r_max, width)),
                dim,
                r_max * r_max,
                format!("radial ramp h={h} to r={r_max}"),
            )?
        }
        "sky_scraper" => {
            let dim = require_dim(&values)?;
            let floors_raw = values["floors"];
            if floors_raw < 1.0 || floors_raw.fract() != 0.0 || floors_raw > 40.0 {
                return Err(Error::Config(format!(
                    "sky_scraper floors must be an integer in [1, 40], got {floors_raw}"
                )));
            }
            let floors = floors_raw as u32;
            HamiltonianSpec::from_radial_profile(
                Arc::new(SkyScraperProfile { floors }),
                dim,
                0.5,
                format!("sky-scraper tower, {floors} floors"),
            )?
        }
        "translator" => {
            let (delta, q0, q1, p0, p1, margin) = (
                values["delta"],
                values["q0"],
                values["q1"],
                values["p0"],
                values["p1"],
                values["margin"],
            );
            if !(q1 > q0 && p1 > p0 && margin > 0.0) {
                return Err(Error::Config(format!(
                    "translator needs q0 < q1, p0 < p1, margin > 0, got q=({q0},{q1}) p=({p0},{p1}) margin={margin}"
                )));
            }
            if delta <= p1 - p0 {
                return Err(Error::Config(format!(
                    "translator shift delta={delta} must exceed the box height {}",
                    p1 - p0
                )));
            }
            let up = WindowProfile::new(q0 - margin, q0, q1, q1 + margin);
            let down = WindowProfile::new(
                q1 + 2.0 * margin,
                q1 + 3.0 * margin,
                q1 + 3.0 * margin,
                q1 + 4.0 * margin,
            );
            let hat = HatProfile::new(delta, up, down);
            let hat_support = hat.support();
            let p_window = WindowProfile::new(p0 - margin, p0, p1 + delta, p1 + delta + margin);
            let p_support = (p_window.lo, p_window.hi);
            HamiltonianSpec::plateau_product(
                1.0,
                Arc::new(hat),
                hat_support,
                Arc::new(p_window),
                p_support,
                format!("translator delta={delta} over box q=[{q0},{q1}] p=[{p0},{p1}]"),
            )
        }
        "biradial" => {
            let f = BumpProfile::new(
                values["f_height"],
                values["f_r_in"] * values["f_r_in"],
                values["f_r_out"] * values["f_r_out"],
            );
            let g = BumpProfile::new(
                values["g_height"],
                values["g_r_in"] * values["g_r_in"],
                values["g_r_out"] * values["g_r_out"],
            );
            let fs = values["f_r_out"] * values["f_r_out"];
            let gs = values["g_r_out"] * values["g_r_out"];
            HamiltonianSpec::biradial_product(
                Arc::new(f),
                fs,
                Arc::new(g),
                gs,
                "biradial plateau product".to_string(),
            )
        }
        "gap_truncation" => {
            let level = values["level"];
            if !(level > 0.0) {
                return Err(Error::Config(format!(
                    "gap_truncation level must be positive, got {level}"
                )));
            }
            HamiltonianSpec::from_impl(Arc::new(GapTruncationHam::new(level)), kind.clone())
        }
        _ => unreachable!("entry list and dispatch are in sync"),
    };
    // Re-tag with the catalog record (constructors above tag by structure).
    Ok(HamiltonianSpec::from_impl_kind_override(spec, kind))
}

impl HamiltonianSpec {
    /// Rewrap with a replacement construction record (catalog builds reuse the
    /// structural constructors and then restore the catalog tag).
    fn from_impl_kind_override(spec: HamiltonianSpec, kind: HamKind) -> HamiltonianSpec {
        HamiltonianSpec::from_impl(spec.imp_handle(), kind)
    }

    pub(crate) fn imp_handle(&self) -> Arc<dyn HamImpl> {
        self.imp.clone()
    }
}

/// Smooth compactly supported truncation of the Hamiltonian
/// `chi(|x|) / (||x_1|^2 - 1| + |x_2|^2)` on `R^4`, which blows up on the
/// circle `{|x_1| = 1, x_2 = 0}`. The kink and the blow-up are both removed:
/// the absolute value is mollified at scale `eps` (chosen so the mollified
/// value still exceeds the clamp level near the circle) and the result is
/// clamped smoothly at `level`. As `level` grows the truncations converge
/// pointwise off the circle to the unbounded target.
struct GapTruncationHam {
    level: f64,
    eps: f64,
    clamp: ClampProfile,
}

impl GapTruncationHam {
    fn new(level: f64) -> Self {
        let eps = (1.0 / (level + 2.0)).min(0.25);
        Self {
            level,
            eps,
            clamp: ClampProfile { level },
        }
    }

    /// Cut-off in the full squared radius: 1 inside |x| <= 2, 0 outside |x| >= 3.
    fn chi(s: f64) -> f64 {
        super::profile::fstep((s - 4.0) / 5.0)
    }
}

impl HamImpl for GapTruncationHam {
    fn dim(&self) -> usize {
        4
    }
    fn support_radius(&self) -> f64 {
        3.0
    }
    fn eval(&self, _t: f64, x: &[f64]) -> f64 {
        let s1 = x[0] * x[0] + x[2] * x[2];
        let s2 = x[1] * x[1] + x[3] * x[3];
        let chi = Self::chi(s1 + s2);
        if chi == 0.0 {
            return 0.0;
        }
        let gap = ((s1 - 1.0) * (s1 - 1.0) + self.eps * self.eps).sqrt() + s2;
        self.clamp.v(chi / gap)
    }
    fn is_autonomous(&self) -> bool {
        true
    }
    fn describe(&self) -> String {
        format!(
            "clamp at {} of a Hamiltonian blowing up on the unit circle of the first plane",
            self.level
        )
    }
}
