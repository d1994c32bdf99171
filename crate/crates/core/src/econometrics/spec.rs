use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exposure::Provenance;

fn default_scale() -> f64 {
    1000.0
}

/// Product of two columns, named `<left>_x_<right>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub left: String,
    pub right: String,
}

impl Interaction {
    pub fn new(left: impl Into<String>, right: impl Into<String>) -> Self {
        Interaction {
            left: left.into(),
            right: right.into(),
        }
    }

    pub fn term(&self) -> String {
        format!("{}_x_{}", self.left, self.right)
    }
}

/// Quantile-bin indicators of `column`, optionally each multiplied by
/// `interact`. Indicators are named `<column>_bin<j>` and their products
/// `<column>_bin<j>_x_<interact>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub column: String,
    pub k: usize,
    pub reference: usize,
    #[serde(default)]
    pub descending: bool,
    #[serde(default)]
    pub interact: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    pub column: String,
    pub op: FilterOp,
    pub value: f64,
}

impl Filter {
    pub fn keeps(&self, x: f64) -> bool {
        match self.op {
            FilterOp::Gt => x > self.value,
            FilterOp::Ge => x >= self.value,
            FilterOp::Lt => x < self.value,
            FilterOp::Le => x <= self.value,
            FilterOp::Eq => x == self.value,
            FilterOp::Ne => x != self.value,
        }
    }
}

/// A linear model with absorbed fixed effects and clustered errors.
/// Estimates and standard errors are reported multiplied by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    pub name: String,
    pub outcome: String,
    #[serde(default)]
    pub regressors: Vec<String>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub bins: Vec<BinSpec>,
    #[serde(default)]
    pub fixed_effects: Vec<String>,
    pub clusters: Vec<String>,
    #[serde(default)]
    pub filters: Vec<Filter>,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub weight: Option<String>,
}

impl RegressionSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Param(format!("regression `{}`: {m}", self.name)));
        if self.clusters.is_empty() || self.clusters.len() > 3 {
            return bad(format!(
                "needs 1 to 3 cluster columns, got {}",
                self.clusters.len()
            ));
        }
        if self
            .fixed_effects
            .iter()
            .chain(&self.clusters)
            .any(|c| c.trim().is_empty())
        {
            return bad("empty fixed-effect or cluster column name".into());
        }
        if self.regressors.is_empty() && self.interactions.is_empty() && self.bins.is_empty() {
            return bad("no regressors".into());
        }
        for b in &self.bins {
            if b.k < 2 || b.reference == 0 || b.reference > b.k {
                return bad(format!(
                    "bins on `{}` need k ≥ 2 and reference in 1..={}",
                    b.column, b.k
                ));
            }
        }
        if !(self.scale.is_finite() && self.scale != 0.0) {
            return bad(format!(
                "scale must be finite and nonzero, got {}",
                self.scale
            ));
        }
        Ok(())
    }

    /// Numeric columns the model reads.
    pub fn numeric_columns(&self) -> Vec<&str> {
        let mut v: Vec<&str> = vec![&self.outcome];
        v.extend(self.regressors.iter().map(String::as_str));
        for i in &self.interactions {
            v.extend([i.left.as_str(), i.right.as_str()]);
        }
        for b in &self.bins {
            v.push(&b.column);
            v.extend(b.interact.as_deref());
        }
        v.extend(self.filters.iter().map(|f| f.column.as_str()));
        v.extend(self.weight.as_deref());
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let spec: RegressionSpec = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RegressionSpec::from_toml(&s).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Eq1,
    Eq2,
    Eq5,
    Table2Seafood,
    Table2Fishing,
    Table3Aod,
    AppxT1Exporters,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Eq1,
        Preset::Eq2,
        Preset::Eq5,
        Preset::Table2Seafood,
        Preset::Table2Fishing,
        Preset::Table3Aod,
        Preset::AppxT1Exporters,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Eq1 => "eq1",
            Preset::Eq2 => "eq2",
            Preset::Eq5 => "eq5",
            Preset::Table2Seafood => "table2_seafood",
            Preset::Table2Fishing => "table2_fishing",
            Preset::Table3Aod => "table3_aod",
            Preset::AppxT1Exporters => "appx_t1_exporters",
        }
    }

    pub fn by_name(name: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::UnknownPreset {
                name: name.to_string(),
                available: Preset::ALL.map(Preset::name).join(", "),
            })
    }

    /// Whether the model reads an exposure provenance.
    pub fn uses_provenance(self) -> bool {
        self != Preset::Eq5
    }

    /// Which panel the model runs on.
    pub fn panel(self) -> PanelKind {
        match self {
            Preset::Eq5 => PanelKind::Passthrough,
            Preset::Table3Aod => PanelKind::GridMonth,
            _ => PanelKind::Births,
        }
    }

    pub fn spec(self, prov: Provenance) -> RegressionSpec {
        let birth =
            |name: &str, regressors: Vec<String>, interactions: Vec<Interaction>| RegressionSpec {
                name: name.to_string(),
                outcome: "lbw".into(),
                regressors,
                interactions,
                bins: vec![],
                fixed_effects: vec!["admin1".into(), "country_month".into()],
                clusters: vec!["admin1".into()],
                filters: vec![],
                scale: 1000.0,
                weight: None,
            };
        let mp = format!("log_mp_{prov}_in_utero");
        let moderated = |name: &str, moderator: &str| {
            birth(
                name,
                vec![mp.clone(), moderator.to_string()],
                vec![Interaction::new(mp.clone(), moderator)],
            )
        };
        match self {
            Preset::Eq1 => birth("eq1", vec![mp.clone()], vec![]),
            Preset::Eq2 => birth(
                "eq2",
                [
                    "preconception",
                    "trimester1",
                    "trimester2",
                    "trimester3",
                    "postpartum",
                ]
                .iter()
                .map(|w| format!("log_mp_{prov}_{w}"))
                .collect(),
                vec![],
            ),
            Preset::Table2Seafood => moderated("table2_seafood", "log_seafood_spending"),
            Preset::Table2Fishing => moderated("table2_fishing", "log_fishing_hours"),
            Preset::AppxT1Exporters => birth(
                "appx_t1_exporters",
                vec![mp.clone(), "log_mp_exporters".into()],
                vec![],
            ),
            Preset::Table3Aod => {
                let m = format!("log_mp_{prov}");
                RegressionSpec {
                    name: "table3_aod".into(),
                    outcome: "log_aod".into(),
                    regressors: vec![m.clone(), "log_evaporation".into()],
                    interactions: vec![Interaction::new(m, "log_evaporation")],
                    bins: vec![],
                    fixed_effects: vec!["grid".into(), "country_month".into()],
                    clusters: vec!["grid".into()],
                    filters: vec![],
                    scale: 1.0,
                    weight: None,
                }
            }
            Preset::Eq5 => RegressionSpec {
                name: "eq5".into(),
                outcome: "log_mp_receiver".into(),
                regressors: vec!["log_mp_sender".into()],
                interactions: vec![],
                bins: vec![BinSpec {
                    column: "current".into(),
                    k: 10,
                    reference: 10,
                    descending: true,
                    interact: Some("log_mp_sender".into()),
                }],
                fixed_effects: vec!["pair".into(), "month".into()],
                clusters: vec!["sender".into(), "receiver".into(), "month".into()],
                filters: vec![Filter {
                    column: "current".into(),
                    op: FilterOp::Gt,
                    value: 0.0,
                }],
                scale: 1.0,
                weight: None,
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelKind {
    Births,
    Passthrough,
    GridMonth,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_preset_lists_the_available_ones() {
        let err = Preset::by_name("eq9").unwrap_err().to_string();
        for p in Preset::ALL {
            assert!(err.contains(p.name()), "{err}");
        }
    }

    #[test]
    fn presets_validate_and_round_trip_through_toml() {
        for p in Preset::ALL {
            let s = p.spec(Provenance::TransportedAll);
            s.validate().unwrap();
            assert_eq!(RegressionSpec::from_toml(&s.to_toml()).unwrap(), s);
        }
    }

    #[test]
    fn toml_defaults_and_checks() {
        let s = RegressionSpec::from_toml(
            "name = \"m\"\noutcome = \"y\"\nregressors = [\"x\"]\nclusters = [\"g\"]\n\
             [[filters]]\ncolumn = \"x\"\nop = \">=\"\nvalue = 1.0\n",
        )
        .unwrap();
        assert_eq!(s.scale, 1000.0);
        assert!(s.filters[0].keeps(1.0) && !s.filters[0].keeps(0.5));
        assert!(RegressionSpec::from_toml("name = \"m\"\noutcome = \"y\"\nregressors = [\"x\"]\nclusters = [\"a\",\"b\",\"c\",\"d\"]\n").is_err());
        assert!(RegressionSpec::from_toml(
            "name = \"m\"\noutcome = \"y\"\nclusters = [\"g\"]\nbogus = 1\n"
        )
        .is_err());
    }
}
