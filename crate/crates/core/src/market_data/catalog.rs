//! Plant technology catalog: the technology set with its renewable and
//! conventional partitions and the static per-technology attributes.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::marginal_costs::ResBidPair;

/// Fuel keys that carry a price series in the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fuel {
    Gas,
    Coal,
    Lignite,
    Oil,
    Nuclear,
}

impl Fuel {
    pub const ALL: [Fuel; 5] = [Fuel::Gas, Fuel::Coal, Fuel::Lignite, Fuel::Oil, Fuel::Nuclear];

    pub fn as_str(self) -> &'static str {
        match self {
            Fuel::Gas => "gas",
            Fuel::Coal => "coal",
            Fuel::Lignite => "lignite",
            Fuel::Oil => "oil",
            Fuel::Nuclear => "nuclear",
        }
    }
}

impl fmt::Display for Fuel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fuel {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fuel::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| DataError::UnknownFuel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Conventional,
    Renewable,
    Virtual,
}

/// Special handling a technology receives during stack assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantRole {
    #[default]
    Standard,
    /// Run-of-river and reservoir output, priced like a renewable.
    Hydro,
    /// Cross-border balance, a virtual plant at the price floor.
    NetImport,
    /// Aggregated must-run capacity, a virtual plant at the price floor.
    MustRun,
}

/// Where a technology's hourly volume comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeSource {
    /// Available capacity series.
    #[default]
    Capacity,
    /// Actual generation when training, day-ahead forecast (or lagged
    /// generation if no forecast exists) when forecasting.
    Generation,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantType {
    pub id: String,
    pub kind: PlantKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuel: Option<Fuel>,
    /// tCO2 per MWh thermal.
    #[serde(default)]
    pub co2_intensity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsidy_class: Option<String>,
    #[serde(default)]
    pub role: PlantRole,
    #[serde(default)]
    pub volume: VolumeSource,
    /// EUR/MWh added on top of fuel and carbon cost.
    #[serde(default)]
    pub other_cost: f64,
    /// Eligible for a multiplicative capacity correction.
    #[serde(default)]
    pub cap_correction: bool,
    /// Initial capacity correction factor for eligible plants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cf_init: Option<f64>,
    /// Eligible for a must-run share.
    #[serde(default)]
    pub must_run: bool,
    /// Initial bid bounds for renewables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_bids: Option<ResBidPair>,
    /// Whether this is the technology the gas split applies to.
    #[serde(default)]
    pub splittable: bool,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

impl PlantType {
    pub fn conventional(id: &str, fuel: Fuel, co2_intensity: f64) -> Self {
        PlantType {
            id: id.to_string(),
            kind: PlantKind::Conventional,
            fuel: Some(fuel),
            co2_intensity,
            subsidy_class: None,
            role: PlantRole::Standard,
            volume: VolumeSource::Capacity,
            other_cost: 0.0,
            cap_correction: false,
            cf_init: None,
            must_run: false,
            init_bids: None,
            splittable: false,
            enabled: true,
        }
    }

    pub fn renewable(id: &str, init_bids: ResBidPair) -> Self {
        PlantType {
            id: id.to_string(),
            kind: PlantKind::Renewable,
            fuel: None,
            co2_intensity: 0.0,
            subsidy_class: None,
            role: PlantRole::Standard,
            volume: VolumeSource::Generation,
            other_cost: 0.0,
            cap_correction: false,
            cf_init: None,
            must_run: false,
            init_bids: Some(init_bids),
            splittable: false,
            enabled: true,
        }
    }

    pub fn virtual_plant(id: &str, role: PlantRole) -> Self {
        PlantType {
            id: id.to_string(),
            kind: PlantKind::Virtual,
            fuel: None,
            co2_intensity: 0.0,
            subsidy_class: None,
            role,
            volume: VolumeSource::Capacity,
            other_cost: 0.0,
            cap_correction: false,
            cf_init: None,
            must_run: false,
            init_bids: None,
            splittable: false,
            enabled: true,
        }
    }

    pub fn with_cap_correction(mut self, init: f64) -> Self {
        self.cap_correction = true;
        self.cf_init = Some(init);
        self
    }

    pub fn with_must_run(mut self) -> Self {
        self.must_run = true;
        self
    }

    pub fn with_volume(mut self, volume: VolumeSource) -> Self {
        self.volume = volume;
        self
    }

    pub fn splittable(mut self) -> Self {
        self.splittable = true;
        self
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: &str| Err(DataError::InvalidCatalog(format!("{}: {msg}", self.id)));
        match self.kind {
            PlantKind::Renewable => {
                if self.fuel.is_some() || self.co2_intensity != 0.0 {
                    return bad("renewables carry no fuel and zero CO2 intensity");
                }
            }
            PlantKind::Virtual => {
                if !matches!(self.role, PlantRole::NetImport | PlantRole::MustRun) {
                    return bad("virtual plants must be the net-import or must-run plant");
                }
            }
            PlantKind::Conventional => {
                if self.fuel.is_none() {
                    return bad("conventional plants need a fuel key");
                }
                if self.co2_intensity < 0.0 {
                    return bad("negative CO2 intensity");
                }
            }
        }
        if self.role == PlantRole::Hydro && self.kind != PlantKind::Renewable {
            return bad("hydro must be a renewable-kind plant");
        }
        if let Some(cf) = self.cf_init {
            if !(1.0..=2.0).contains(&cf) {
                return bad("initial capacity factor outside [1, 2]");
            }
        }
        Ok(())
    }
}

/// Ordered technology set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantCatalog {
    plants: Vec<PlantType>,
}

impl PlantCatalog {
    pub fn new(plants: Vec<PlantType>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for p in &plants {
            if !seen.insert(p.id.as_str()) {
                return Err(DataError::InvalidCatalog(format!("duplicate plant id {}", p.id)));
            }
            p.validate()?;
        }
        let count = |role| plants.iter().filter(|p| p.role == role).count();
        for role in [PlantRole::Hydro, PlantRole::NetImport, PlantRole::MustRun] {
            if count(role) > 1 {
                return Err(DataError::InvalidCatalog(format!("more than one {role:?} plant")));
            }
        }
        if plants.iter().filter(|p| p.splittable).count() > 1 {
            return Err(DataError::InvalidCatalog("more than one splittable plant".into()));
        }
        Ok(PlantCatalog { plants })
    }

    /// The German fleet: five fuel-fired technologies, five renewables plus
    /// hydro, and the two virtual plants.
    pub fn german_default() -> Self {
        let bids = |low| ResBidPair::new(low, 20.0).expect("static bid bounds are valid");
        let plants = vec![
            PlantType::conventional("gas", Fuel::Gas, 0.20)
                .with_cap_correction(1.5)
                .with_must_run()
                .splittable(),
            PlantType::conventional("coal", Fuel::Coal, 0.30)
                .with_cap_correction(1.5)
                .with_must_run(),
            PlantType::conventional("lignite", Fuel::Lignite, 0.40)
                .with_cap_correction(1.5)
                .with_must_run(),
            PlantType::conventional("oil", Fuel::Oil, 0.30)
                .with_cap_correction(1.5)
                .with_must_run(),
            PlantType::conventional("nuclear", Fuel::Nuclear, 0.03).with_must_run(),
            PlantType::renewable("pv", bids(-500.0)),
            PlantType::renewable("wind_onshore", bids(-70.0)),
            PlantType::renewable("wind_offshore", bids(-150.0)),
            PlantType::renewable("biomass", bids(-200.0))
                .with_cap_correction(1.5)
                .with_must_run(),
            PlantType::renewable("other_res", bids(-500.0)),
            PlantType {
                role: PlantRole::Hydro,
                ..PlantType::renewable("hydro", bids(-500.0)).with_must_run()
            },
            PlantType::virtual_plant("net_import", PlantRole::NetImport),
            PlantType::virtual_plant("must_run", PlantRole::MustRun),
        ];
        PlantCatalog::new(plants).expect("default catalog is valid")
    }

    pub fn plants(&self) -> &[PlantType] {
        &self.plants
    }

    pub fn enabled(&self) -> impl Iterator<Item = &PlantType> {
        self.plants.iter().filter(|p| p.enabled)
    }

    pub fn get(&self, id: &str) -> Option<&PlantType> {
        self.plants.iter().find(|p| p.id == id)
    }

    pub fn by_role(&self, role: PlantRole) -> Option<&PlantType> {
        self.enabled().find(|p| p.role == role)
    }

    pub fn splittable(&self) -> Option<&PlantType> {
        self.enabled().find(|p| p.splittable)
    }

    /// Renewable technologies (including hydro).
    pub fn renewables(&self) -> impl Iterator<Item = &PlantType> {
        self.enabled().filter(|p| p.kind == PlantKind::Renewable)
    }

    /// Conventional technologies: the complement of the renewables among
    /// physical plants.
    pub fn conventionals(&self) -> impl Iterator<Item = &PlantType> {
        self.enabled().filter(|p| p.kind == PlantKind::Conventional)
    }

    /// Fuels referenced by enabled plants.
    pub fn fuels(&self) -> BTreeSet<Fuel> {
        self.enabled().filter_map(|p| p.fuel).collect()
    }

    /// Keep only the listed technologies (virtual plants are kept).
    pub fn restricted_to(&self, ids: &[&str]) -> Result<Self, DataError> {
        for id in ids {
            if self.get(id).is_none() {
                return Err(DataError::InvalidCatalog(format!("unknown plant {id}")));
            }
        }
        let plants = self
            .plants
            .iter()
            .filter(|p| p.kind == PlantKind::Virtual || ids.contains(&p.id.as_str()))
            .cloned()
            .collect();
        PlantCatalog::new(plants)
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let raw: PlantCatalog =
            serde_json::from_str(text).map_err(|e| DataError::InvalidCatalog(e.to_string()))?;
        PlantCatalog::new(raw.plants)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }
}
