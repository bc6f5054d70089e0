//! Applies a parameter set to one panel hour: capacity corrections, gas
//! split, must-run, hydro and net import, then prices the hour against
//! the load.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marginal_costs::{raw_conventional_costs, res_cost_bounds, CostBounds, EfficiencyPair, ResBidPair};
use crate::market_data::{
    DataError, HourlyPanel, PlantCatalog, PlantKind, PlantRole, SeriesKey, VolumeSource, PRICE_CAP,
    PRICE_FLOOR,
};
use crate::merit_curve::{components_at, CurveBuilder, CurveError, PiecewiseCurve, PlantStack};
use crate::run::{ForecastRun, RunDecomposition};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("hour {0} is outside the panel")]
    HourOutOfRange(usize),
    #[error("hour {t} needs inputs from {lag_hours} hours earlier, before the panel starts")]
    InsufficientHistory { t: usize, lag_hours: usize },
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("unknown parameter group {0}")]
    UnknownGroup(String),
    #[error("parameter {name} = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("parameter {0} belongs to an inactive group and must keep its initial value")]
    InactiveParameter(String),
    #[error("parameter set was built for a different catalog")]
    LayoutMismatch,
    #[error("{series} forecast has {got} values, panel has {expected}")]
    ForecastLength {
        series: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter file: {0}")]
    Parse(String),
}

/// The six independently switchable parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Efficiencies,
    Bids,
    CapFactors,
    MustRun,
    GasSplit,
    Virtuals,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 6] = [
        ParamGroup::Efficiencies,
        ParamGroup::Bids,
        ParamGroup::CapFactors,
        ParamGroup::MustRun,
        ParamGroup::GasSplit,
        ParamGroup::Virtuals,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamGroup::Efficiencies => "efficiencies",
            ParamGroup::Bids => "bids",
            ParamGroup::CapFactors => "cap_factors",
            ParamGroup::MustRun => "must_run",
            ParamGroup::GasSplit => "gas_split",
            ParamGroup::Virtuals => "virtuals",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamGroup {
    type Err = AssemblyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| AssemblyError::UnknownGroup(s.to_string()))
    }
}

/// Set of active parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "Vec<ParamGroup>", from = "Vec<ParamGroup>")]
pub struct GroupMask(u8);

impl GroupMask {
    pub const fn empty() -> Self {
        GroupMask(0)
    }

    pub fn all() -> Self {
        ParamGroup::ALL.into_iter().collect()
    }

    pub fn contains(self, g: ParamGroup) -> bool {
        self.0 & g.bit() != 0
    }

    pub fn with(self, g: ParamGroup) -> Self {
        GroupMask(self.0 | g.bit())
    }

    pub fn without(self, g: ParamGroup) -> Self {
        GroupMask(self.0 & !g.bit())
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = ParamGroup> {
        ParamGroup::ALL.into_iter().filter(move |g| self.contains(*g))
    }
}

impl FromIterator<ParamGroup> for GroupMask {
    fn from_iter<I: IntoIterator<Item = ParamGroup>>(iter: I) -> Self {
        iter.into_iter().fold(GroupMask::empty(), GroupMask::with)
    }
}

impl From<Vec<ParamGroup>> for GroupMask {
    fn from(v: Vec<ParamGroup>) -> Self {
        v.into_iter().collect()
    }
}

impl From<GroupMask> for Vec<ParamGroup> {
    fn from(m: GroupMask) -> Self {
        m.iter().collect()
    }
}

impl fmt::Display for GroupMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("classic");
        }
        let names: Vec<&str> = self.iter().map(ParamGroup::as_str).collect();
        f.write_str(&names.join("+"))
    }
}

/// Name, group, box and initial value of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: String,
    pub group: ParamGroup,
    pub lower: f64,
    pub upper: f64,
    pub init: f64,
}

/// The flat parameter vector layout derived from a catalog.
///
/// Names: `eta_low.<plant>`, `eta_high.<plant>` for fuel-fired plants (and
/// `<plant>2` for the second half of the splittable plant),
/// `bid_low.<plant>`, `bid_high.<plant>` for renewables and hydro,
/// `cf.<plant>` for plants eligible for a capacity correction, `cf.hydro`
/// and `cf.net_import` for the virtual inputs, `mr.<plant>` for must-run
/// shares and `gs` for the split fraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterLayout {
    specs: Vec<ParamSpec>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

/// Second half of a split technology.
pub fn split_id(plant: &str) -> String {
    format!("{plant}2")
}

impl ParameterLayout {
    pub fn for_catalog(catalog: &PlantCatalog) -> Self {
        let mut specs = Vec::new();
        let mut push = |name: String, group, lower, upper, init: f64| {
            specs.push(ParamSpec {
                name,
                group,
                lower,
                upper,
                init,
            })
        };
        for p in catalog.conventionals() {
            let fuel = p.fuel.expect("conventional plants carry a fuel");
            let (eff, _) = crate::marginal_costs::expert_estimates(fuel);
            push(format!("eta_low.{}", p.id), ParamGroup::Efficiencies, 0.10, 0.50, eff.eta_low);
            push(format!("eta_high.{}", p.id), ParamGroup::Efficiencies, 0.10, 1.00, eff.eta_high);
        }
        for p in catalog.renewables() {
            let bids = p.init_bids.unwrap_or(ResBidPair { low: PRICE_FLOOR, high: 20.0 });
            push(format!("bid_low.{}", p.id), ParamGroup::Bids, -500.0, 0.0, bids.low);
            push(format!("bid_high.{}", p.id), ParamGroup::Bids, 0.0, 20.0, bids.high);
        }
        for p in catalog.enabled().filter(|p| p.cap_correction) {
            push(format!("cf.{}", p.id), ParamGroup::CapFactors, 1.0, 2.0, p.cf_init.unwrap_or(1.0));
        }
        if catalog.by_role(PlantRole::MustRun).is_some() {
            for p in catalog.enabled().filter(|p| p.must_run) {
                push(format!("mr.{}", p.id), ParamGroup::MustRun, 0.0, 1.0, 0.0);
            }
        }
        if let Some(p) = catalog.splittable() {
            let fuel = p.fuel.expect("splittable plants are fuel-fired");
            let (eff, _) = crate::marginal_costs::expert_estimates(fuel);
            let second = split_id(&p.id);
            push("gs".into(), ParamGroup::GasSplit, 0.0, 1.0, 0.0);
            push(format!("eta_low.{second}"), ParamGroup::GasSplit, 0.10, 0.50, eff.eta_low);
            push(format!("eta_high.{second}"), ParamGroup::GasSplit, 0.10, 1.00, eff.eta_high);
        }
        if let Some(h) = catalog.by_role(PlantRole::Hydro) {
            push(format!("cf.{}", h.id), ParamGroup::Virtuals, 0.0, 2.0, 0.0);
        }
        if let Some(n) = catalog.by_role(PlantRole::NetImport) {
            push(format!("cf.{}", n.id), ParamGroup::Virtuals, 0.0, 1.0, 0.0);
        }
        let index = specs.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
        ParameterLayout { specs, index }
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn require(&self, name: &str) -> Result<usize, AssemblyError> {
        self.position(name).ok_or_else(|| AssemblyError::UnknownParameter(name.to_string()))
    }
}

/// Parameter values plus the mask of groups being estimated.
///
/// Every value lies in its box, and every parameter of an inactive group
/// holds its initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    layout: Arc<ParameterLayout>,
    values: Vec<f64>,
    active: GroupMask,
}

#[derive(Serialize, Deserialize)]
struct ParameterFile {
    active: GroupMask,
    values: BTreeMap<String, f64>,
}

impl ParameterSet {
    /// Expert values with every group inactive.
    pub fn classical(catalog: &PlantCatalog) -> Self {
        Self::from_layout(Arc::new(ParameterLayout::for_catalog(catalog)))
    }

    fn from_layout(layout: Arc<ParameterLayout>) -> Self {
        let values = layout.specs.iter().map(|s| s.init).collect();
        ParameterSet {
            layout,
            values,
            active: GroupMask::empty(),
        }
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn active(&self) -> GroupMask {
        self.active
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.layout.position(name).map(|i| self.values[i])
    }

    /// Set a named value; its group must be active and the value in box.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), AssemblyError> {
        let i = self.layout.require(name)?;
        let spec = &self.layout.specs[i];
        if !self.active.contains(spec.group) && value != spec.init {
            return Err(AssemblyError::InactiveParameter(name.to_string()));
        }
        if !(spec.lower..=spec.upper).contains(&value) {
            return Err(AssemblyError::OutOfBounds {
                name: name.to_string(),
                value,
                lower: spec.lower,
                upper: spec.upper,
            });
        }
        self.values[i] = value;
        Ok(())
    }

    /// Indices of the parameters in active groups.
    pub fn free_indices(&self) -> Vec<usize> {
        self.layout
            .specs
            .iter()
            .enumerate()
            .filter(|(_, s)| self.active.contains(s.group))
            .map(|(i, _)| i)
            .collect()
    }

    /// Write `value` at position `i`, clipped into its box. Writes to
    /// inactive parameters are ignored.
    pub fn set_clipped(&mut self, i: usize, value: f64) {
        let spec = &self.layout.specs[i];
        if self.active.contains(spec.group) {
            self.values[i] = value.clamp(spec.lower, spec.upper);
        }
    }

    /// Turn a group on. Activating the split copies the splittable
    /// plant's efficiencies into the second half so that the curve is
    /// unchanged until the optimizer moves them.
    pub fn activate(&mut self, group: ParamGroup) {
        if self.active.contains(group) {
            return;
        }
        self.active = self.active.with(group);
        if group == ParamGroup::GasSplit {
            let copies: Vec<(usize, usize)> = self
                .layout
                .specs
                .iter()
                .enumerate()
                .filter(|(_, s)| s.group == ParamGroup::GasSplit && s.name.starts_with("eta_"))
                .filter_map(|(i, s)| {
                    let (kind, plant) = s.name.split_once('.')?;
                    let base = plant.strip_suffix('2')?;
                    Some((i, self.layout.position(&format!("{kind}.{base}"))?))
                })
                .collect();
            for (dst, src) in copies {
                self.values[dst] = self.values[src];
            }
        }
    }

    /// Turn a group off and restore its initial values.
    pub fn deactivate(&mut self, group: ParamGroup) {
        self.active = self.active.without(group);
        for (i, s) in self.layout.specs.iter().enumerate() {
            if s.group == group {
                self.values[i] = s.init;
            }
        }
    }

    pub fn with_groups(mut self, groups: GroupMask) -> Self {
        for g in groups.iter() {
            self.activate(g);
        }
        self
    }

    pub fn in_box(&self) -> bool {
        self.layout
            .specs
            .iter()
            .zip(&self.values)
            .all(|(s, &v)| (s.lower..=s.upper).contains(&v))
    }

    /// `(name, value)` pairs in layout order.
    pub fn named_values(&self) -> impl Iterator<Item = (&str, f64)> {
        self.layout.specs.iter().map(|s| s.name.as_str()).zip(self.values.iter().copied())
    }

    fn same_layout(&self, other: &ParameterLayout) -> bool {
        std::ptr::eq(self.layout.as_ref(), other) || self.layout.specs == other.specs
    }

    pub fn to_json(&self) -> String {
        let file = ParameterFile {
            active: self.active,
            values: self.named_values().map(|(n, v)| (n.to_string(), v)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("parameters serialize")
    }

    /// Read a parameter file written by [`ParameterSet::to_json`]. Missing
    /// names keep their initial values.
    pub fn from_json(catalog: &PlantCatalog, text: &str) -> Result<Self, AssemblyError> {
        let file: ParameterFile =
            serde_json::from_str(text).map_err(|e| AssemblyError::Parse(e.to_string()))?;
        let mut set = ParameterSet::classical(catalog);
        set.active = file.active;
        for (name, value) in file.values {
            set.set(&name, value)?;
        }
        Ok(set)
    }
}

/// Expert parameter set of the classical merit order.
pub fn classical_parameters(catalog: &PlantCatalog) -> ParameterSet {
    ParameterSet::classical(catalog)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Realized inputs at the priced hour.
    Train,
    /// Inputs available before the day-ahead auction: forecasts where they
    /// exist, lagged realizations otherwise.
    Test,
}

/// Lags applied to realized inputs when forecasting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestInputs {
    pub capacity_lag_days: usize,
    pub realized_lag_days: usize,
    pub fuel_lag_days: usize,
}

impl Default for TestInputs {
    fn default() -> Self {
        TestInputs {
            capacity_lag_days: 1,
            realized_lag_days: 2,
            fuel_lag_days: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StackPart {
    Whole,
    SplitFirst,
    SplitSecond,
    Virtual,
}

/// What a stack in [`HourStacks`] stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StackInfo {
    /// Stack name, e.g. `gas`, `gas2`, `must_run`.
    pub id: String,
    /// Catalog plant the stack derives from.
    pub plant: String,
    pub part: StackPart,
}

/// The assembled fleet for one hour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourStacks {
    pub stacks: Vec<PlantStack>,
    pub effective_load: f64,
    pub provenance: Vec<StackInfo>,
    /// Clamps applied while assembling (negative volumes or load).
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
enum CostSource<'a> {
    Fuel {
        fuel: Option<&'a [f64]>,
        eua: Option<&'a [f64]>,
        co2: f64,
        other: f64,
        eta_low: usize,
        eta_high: usize,
    },
    Bids {
        low: usize,
        high: usize,
    },
    Floor,
}

#[derive(Debug, Clone, Copy)]
enum Volume<'a> {
    Capacity(Option<&'a [f64]>),
    Generation {
        actual: Option<&'a [f64]>,
        forecast: Option<&'a [f64]>,
    },
    Hydro(Option<&'a [f64]>),
    NetImport(Option<&'a [f64]>),
    MustRun,
}

#[derive(Debug, Clone, Copy)]
enum Split {
    None,
    First(usize),
    Second(usize),
}

#[derive(Debug, Clone)]
struct CompiledStack<'a> {
    series_name: String,
    cost: CostSource<'a>,
    volume: Volume<'a>,
    cf: Option<usize>,
    mr: Option<usize>,
    split: Split,
}

/// Reusable buffers for pricing many hours.
#[derive(Debug, Default, Clone)]
pub struct PricingScratch {
    stacks: Vec<PlantStack>,
    builder: CurveBuilder,
}

/// Price of one hour with its marginal-technology attribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourPrice {
    pub price: f64,
    pub effective_load: f64,
    /// Stack with the largest share at the clearing quantity, or
    /// `scarcity` when the load exceeds the fleet.
    pub atm: String,
    /// `(stack id, component value)` per stack.
    pub components: Vec<(String, f64)>,
}

/// One row of a curve dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    pub q: f64,
    pub p: f64,
    /// Dominant stack of the price segment ending at this point.
    pub plant: String,
}

/// A catalog compiled against a panel, ready to price any hour for any
/// parameter set of the matching layout.
#[derive(Debug, Clone)]
pub struct MeritOrderModel<'a> {
    catalog: &'a PlantCatalog,
    panel: &'a HourlyPanel,
    layout: Arc<ParameterLayout>,
    stacks: Vec<CompiledStack<'a>>,
    info: Vec<StackInfo>,
    must_run_slot: Option<usize>,
    load_actual: Option<&'a [f64]>,
    load_da: Option<&'a [f64]>,
    hydro_forecast: Option<Vec<f64>>,
    net_import_forecast: Option<Vec<f64>>,
    test_inputs: TestInputs,
}

impl<'a> MeritOrderModel<'a> {
    pub fn new(catalog: &'a PlantCatalog, panel: &'a HourlyPanel) -> Result<Self, AssemblyError> {
        let layout = Arc::new(ParameterLayout::for_catalog(catalog));
        let idx = |name: String| layout.position(&name);
        let eua = panel.get(&SeriesKey::Eua);
        let mut stacks = Vec::new();
        let mut info = Vec::new();
        let mut must_run_slot = None;
        for p in catalog.enabled() {
            let mr = idx(format!("mr.{}", p.id));
            let cf = idx(format!("cf.{}", p.id));
            let volume = match (p.role, p.volume) {
                (PlantRole::MustRun, _) => Volume::MustRun,
                (PlantRole::NetImport, _) => Volume::NetImport(panel.get(&SeriesKey::NetImport)),
                (PlantRole::Hydro, _) => Volume::Hydro(panel.get(&SeriesKey::Hydro)),
                (PlantRole::Standard, VolumeSource::Capacity) => {
                    Volume::Capacity(panel.get(&SeriesKey::Capacity(p.id.clone())))
                }
                (PlantRole::Standard, VolumeSource::Generation) => Volume::Generation {
                    actual: panel.get(&SeriesKey::Generation(p.id.clone())),
                    forecast: panel.get(&SeriesKey::ResDa(p.id.clone())),
                },
            };
            let series_name = match volume {
                Volume::Capacity(_) => SeriesKey::Capacity(p.id.clone()).to_string(),
                Volume::Generation { .. } => SeriesKey::Generation(p.id.clone()).to_string(),
                Volume::Hydro(_) => SeriesKey::Hydro.to_string(),
                Volume::NetImport(_) => SeriesKey::NetImport.to_string(),
                Volume::MustRun => p.id.clone(),
            };
            let fuel_cost = |plant: &str| -> Result<CostSource<'a>, AssemblyError> {
                let fuel = p.fuel.expect("conventional plants carry a fuel");
                let lookup = |n: String| {
                    layout.position(&n).ok_or(AssemblyError::UnknownParameter(n))
                };
                Ok(CostSource::Fuel {
                    fuel: panel.get(&SeriesKey::FuelPrice(fuel)),
                    eua,
                    co2: p.co2_intensity,
                    other: p.other_cost,
                    eta_low: lookup(format!("eta_low.{plant}"))?,
                    eta_high: lookup(format!("eta_high.{plant}"))?,
                })
            };
            let cost = match p.kind {
                PlantKind::Conventional => fuel_cost(&p.id)?,
                PlantKind::Renewable => CostSource::Bids {
                    low: layout.require(&format!("bid_low.{}", p.id))?,
                    high: layout.require(&format!("bid_high.{}", p.id))?,
                },
                PlantKind::Virtual => CostSource::Floor,
            };
            let gs = layout.position("gs").filter(|_| p.splittable);
            let (part, split) = match gs {
                Some(g) => (StackPart::SplitFirst, Split::First(g)),
                None if p.kind == PlantKind::Virtual => (StackPart::Virtual, Split::None),
                None => (StackPart::Whole, Split::None),
            };
            if p.role == PlantRole::MustRun {
                must_run_slot = Some(stacks.len());
            }
            stacks.push(CompiledStack {
                series_name: series_name.clone(),
                cost,
                volume,
                cf,
                mr,
                split,
            });
            info.push(StackInfo {
                id: p.id.clone(),
                plant: p.id.clone(),
                part,
            });
            if let Some(g) = gs {
                let second = split_id(&p.id);
                stacks.push(CompiledStack {
                    series_name,
                    cost: fuel_cost(&second)?,
                    volume,
                    cf,
                    mr,
                    split: Split::Second(g),
                });
                info.push(StackInfo {
                    id: second,
                    plant: p.id.clone(),
                    part: StackPart::SplitSecond,
                });
            }
        }
        Ok(MeritOrderModel {
            catalog,
            panel,
            layout,
            stacks,
            info,
            must_run_slot,
            load_actual: panel.get(&SeriesKey::LoadActual),
            load_da: panel.get(&SeriesKey::LoadDa),
            hydro_forecast: None,
            net_import_forecast: None,
            test_inputs: TestInputs::default(),
        })
    }

    pub fn with_test_inputs(mut self, inputs: TestInputs) -> Self {
        self.test_inputs = inputs;
        self
    }

    /// Use an external hydro forecast in test mode instead of lagged
    /// realizations.
    pub fn with_hydro_forecast(mut self, forecast: Vec<f64>) -> Result<Self, AssemblyError> {
        self.check_forecast("hydro", &forecast)?;
        self.hydro_forecast = Some(forecast);
        Ok(self)
    }

    /// Use an external net-import forecast in test mode.
    pub fn with_net_import_forecast(mut self, forecast: Vec<f64>) -> Result<Self, AssemblyError> {
        self.check_forecast("net_import", &forecast)?;
        self.net_import_forecast = Some(forecast);
        Ok(self)
    }

    fn check_forecast(&self, series: &str, values: &[f64]) -> Result<(), AssemblyError> {
        if values.len() != self.panel.len() {
            return Err(AssemblyError::ForecastLength {
                series: series.into(),
                expected: self.panel.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    pub fn catalog(&self) -> &PlantCatalog {
        self.catalog
    }

    pub fn panel(&self) -> &HourlyPanel {
        self.panel
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    /// Classical parameters sharing this model's layout.
    pub fn classical(&self) -> ParameterSet {
        ParameterSet::from_layout(Arc::clone(&self.layout))
    }

    /// Stack descriptions in assembly order.
    pub fn stack_info(&self) -> &[StackInfo] {
        &self.info
    }

    pub fn check_params(&self, params: &ParameterSet) -> Result<(), AssemblyError> {
        if params.same_layout(&self.layout) {
            Ok(())
        } else {
            Err(AssemblyError::LayoutMismatch)
        }
    }

    fn lagged(&self, t: usize, days: usize) -> Result<usize, AssemblyError> {
        let lag_hours = days * 24;
        t.checked_sub(lag_hours)
            .ok_or(AssemblyError::InsufficientHistory { t, lag_hours })
    }

    fn at(series: Option<&[f64]>, t: usize, name: &str) -> Result<f64, AssemblyError> {
        series
            .map(|s| s[t])
            .ok_or_else(|| DataError::MissingSeries(name.to_string()).into())
    }

    fn base_volume(&self, c: &CompiledStack<'a>, t: usize, mode: Mode) -> Result<f64, AssemblyError> {
        let inputs = self.test_inputs;
        let name = c.series_name.as_str();
        match (c.volume, mode) {
            (Volume::MustRun, _) => Ok(0.0),
            (Volume::Capacity(s), Mode::Train) => Self::at(s, t, name),
            (Volume::Capacity(s), Mode::Test) => {
                Self::at(s, self.lagged(t, inputs.capacity_lag_days)?, name)
            }
            (Volume::Generation { actual, .. }, Mode::Train) => Self::at(actual, t, name),
            (Volume::Generation { actual, forecast }, Mode::Test) => match forecast {
                Some(f) => Ok(f[t]),
                None => Self::at(actual, self.lagged(t, inputs.realized_lag_days)?, name),
            },
            (Volume::Hydro(s), Mode::Train) | (Volume::NetImport(s), Mode::Train) => {
                Self::at(s, t, name)
            }
            (Volume::Hydro(s), Mode::Test) => match &self.hydro_forecast {
                Some(f) => Ok(f[t]),
                None => Self::at(s, self.lagged(t, inputs.realized_lag_days)?, name),
            },
            (Volume::NetImport(s), Mode::Test) => match &self.net_import_forecast {
                Some(f) => Ok(f[t]),
                None => Self::at(s, self.lagged(t, inputs.realized_lag_days)?, name),
            },
        }
    }

    fn bounds(&self, c: &CompiledStack<'a>, v: &[f64], t: usize, mode: Mode) -> Result<CostBounds, AssemblyError> {
        Ok(match c.cost {
            CostSource::Floor => CostBounds::flat(PRICE_FLOOR),
            CostSource::Bids { low, high } => res_cost_bounds(ResBidPair {
                low: v[low],
                high: v[high],
            }),
            CostSource::Fuel {
                fuel,
                eua,
                co2,
                other,
                eta_low,
                eta_high,
            } => {
                let tf = match mode {
                    Mode::Train => t,
                    Mode::Test => self.lagged(t, self.test_inputs.fuel_lag_days)?,
                };
                let fuel = Self::at(fuel, tf, "fuel")?;
                let eua = if co2 == 0.0 { 0.0 } else { Self::at(eua, tf, "eua")? };
                let eff = EfficiencyPair {
                    eta_low: v[eta_low],
                    eta_high: v[eta_high],
                };
                raw_conventional_costs(fuel, eua, co2, eff, other).sorted()
            }
        })
    }

    /// Assemble hour `t` into `out`; returns the effective load.
    fn assemble_into(
        &self,
        params: &ParameterSet,
        t: usize,
        mode: Mode,
        out: &mut Vec<PlantStack>,
        mut diagnostics: Option<&mut Vec<String>>,
    ) -> Result<f64, AssemblyError> {
        if t >= self.panel.len() {
            return Err(AssemblyError::HourOutOfRange(t));
        }
        let v = params.values();
        let split_active = params.active().contains(ParamGroup::GasSplit);
        let mut must_run_total = 0.0;
        let mut export = 0.0;
        out.clear();
        for (tag, c) in self.stacks.iter().enumerate() {
            let virtual_off = matches!(c.volume, Volume::Hydro(_) | Volume::NetImport(_))
                && c.cf.is_some_and(|i| v[i] == 0.0);
            let mut cap = if virtual_off { 0.0 } else { self.base_volume(c, t, mode)? };
            if let Some(i) = c.cf {
                cap *= v[i];
            }
            if matches!(c.volume, Volume::NetImport(_)) && cap < 0.0 {
                export -= cap;
                cap = 0.0;
            }
            if cap < 0.0 {
                if let Some(d) = diagnostics.as_deref_mut() {
                    d.push(format!("{}: negative volume {cap} clamped to 0", self.info[tag].id));
                }
                cap = 0.0;
            }
            match c.split {
                Split::None => {}
                Split::First(g) => {
                    if split_active {
                        cap = split_exact(cap, v[g]).0;
                    }
                }
                Split::Second(g) => {
                    cap = if split_active { split_exact(cap, v[g]).1 } else { 0.0 };
                }
            }
            if let Some(i) = c.mr {
                let share = v[i] * cap;
                must_run_total += share;
                cap -= share;
                if cap < 0.0 {
                    if let Some(d) = diagnostics.as_deref_mut() {
                        d.push(format!("{}: must-run left {cap}, clamped to 0", self.info[tag].id));
                    }
                    cap = 0.0;
                }
            }
            let bounds = self.bounds(c, v, t, mode)?;
            out.push(PlantStack { tag, cap, bounds });
        }
        if let Some(slot) = self.must_run_slot {
            out[slot].cap = must_run_total;
        }
        let load = match mode {
            Mode::Train => Self::at(self.load_actual, t, "load_actual")?,
            Mode::Test => Self::at(self.load_da, t, "load_da")?,
        };
        let mut effective = load + export;
        if effective < 0.0 {
            if let Some(d) = diagnostics.as_deref_mut() {
                d.push(format!("negative effective load {effective} clamped to 0"));
            }
            effective = 0.0;
        }
        Ok(effective)
    }

    pub fn assemble_hour(&self, params: &ParameterSet, t: usize, mode: Mode) -> Result<HourStacks, AssemblyError> {
        self.check_params(params)?;
        let mut stacks = Vec::with_capacity(self.stacks.len());
        let mut diagnostics = Vec::new();
        let effective_load = self.assemble_into(params, t, mode, &mut stacks, Some(&mut diagnostics))?;
        Ok(HourStacks {
            stacks,
            effective_load,
            provenance: self.info.clone(),
            diagnostics,
        })
    }

    /// Price of hour `t` using caller-provided buffers. Does not re-check
    /// the parameter layout.
    pub fn price_with(
        &self,
        params: &ParameterSet,
        t: usize,
        mode: Mode,
        scratch: &mut PricingScratch,
    ) -> Result<f64, AssemblyError> {
        let load = self.assemble_into(params, t, mode, &mut scratch.stacks, None)?;
        let curve = scratch.builder.build(&scratch.stacks)?;
        Ok(curve.eval_unchecked(load).clamp(PRICE_FLOOR, PRICE_CAP))
    }

    pub fn curve(&self, params: &ParameterSet, t: usize, mode: Mode) -> Result<(PiecewiseCurve, HourStacks), AssemblyError> {
        let hour = self.assemble_hour(params, t, mode)?;
        let curve = crate::merit_curve::aggregate(&hour.stacks)?;
        Ok((curve, hour))
    }

    /// Price of hour `t` with its decomposition.
    pub fn price_hour(&self, params: &ParameterSet, t: usize, mode: Mode) -> Result<HourPrice, AssemblyError> {
        let (curve, hour) = self.curve(params, t, mode)?;
        let q = hour.effective_load;
        let price = curve.eval_unchecked(q).clamp(PRICE_FLOOR, PRICE_CAP);
        let mut components: Vec<(String, f64)> = self.info.iter().map(|i| (i.id.clone(), 0.0)).collect();
        let atm = if q > curve.total_capacity() {
            "scarcity".to_string()
        } else {
            let dec = components_at(&hour.stacks, &curve, q)?;
            for &(tag, value) in &dec.components {
                components[tag].1 = value;
            }
            dec.marginal()
                .dominant()
                .map_or_else(|| "none".to_string(), |tag| self.info[tag].id.clone())
        };
        Ok(HourPrice {
            price,
            effective_load: q,
            atm,
            components,
        })
    }

    /// Prices of `hours`, sequentially, into `out`.
    pub fn prices_into(
        &self,
        params: &ParameterSet,
        hours: &[usize],
        mode: Mode,
        scratch: &mut PricingScratch,
        out: &mut Vec<f64>,
    ) -> Result<(), AssemblyError> {
        self.check_params(params)?;
        out.clear();
        for &t in hours {
            out.push(self.price_with(params, t, mode, scratch)?);
        }
        Ok(())
    }

    /// Prices of `hours`, evaluated in parallel, in request order.
    pub fn prices(&self, params: &ParameterSet, hours: &[usize], mode: Mode) -> Result<Vec<f64>, AssemblyError> {
        self.check_params(params)?;
        hours
            .par_iter()
            .map_init(PricingScratch::default, |s, &t| self.price_with(params, t, mode, s))
            .collect()
    }

    /// Priced run over `hours`, optionally with the per-hour technology
    /// decomposition.
    pub fn price_series(
        &self,
        params: &ParameterSet,
        hours: &[usize],
        mode: Mode,
        decompose: bool,
    ) -> Result<ForecastRun, AssemblyError> {
        let index = hours.iter().map(|&t| self.panel.ts(t)).collect();
        let actual = self
            .panel
            .get(&SeriesKey::Price)
            .map(|p| hours.iter().map(|&t| p[t]).collect());
        let model = format!("merit_order[{}]", params.active());
        if !decompose {
            let predicted = self.prices(params, hours, mode)?;
            return Ok(ForecastRun::new(model, index, predicted, actual));
        }
        self.check_params(params)?;
        let priced: Vec<HourPrice> = hours
            .par_iter()
            .map(|&t| self.price_hour(params, t, mode))
            .collect::<Result<_, _>>()?;
        let predicted = priced.iter().map(|h| h.price).collect();
        let decomposition = RunDecomposition {
            technologies: self.info.iter().map(|i| i.id.clone()).collect(),
            atm: priced.iter().map(|h| h.atm.clone()).collect(),
            components: priced
                .into_iter()
                .map(|h| h.components.into_iter().map(|(_, v)| v).collect())
                .collect(),
        };
        Ok(ForecastRun::new(model, index, predicted, actual).with_decomposition(decomposition))
    }

    /// Curve breakpoints of the given hours, each tagged with the dominant
    /// stack of the segment it closes.
    pub fn curve_dump(&self, params: &ParameterSet, hours: &[usize], mode: Mode) -> Result<Vec<CurvePoint>, AssemblyError> {
        let mut rows = Vec::new();
        for &t in hours {
            let (curve, hour) = self.curve(params, t, mode)?;
            let dec = components_at(&hour.stacks, &curve, 0.0).ok();
            for b in curve.points() {
                let plant = dec
                    .as_ref()
                    .and_then(|d| d.segments.iter().find(|s| s.p_high == b.p))
                    .and_then(|s| s.dominant())
                    .map_or_else(String::new, |tag| self.info[tag].id.clone());
                rows.push(CurvePoint {
                    t,
                    q: b.q,
                    p: b.p,
                    plant,
                });
            }
        }
        Ok(rows)
    }

    /// Stacks ordered by cost midpoint at hour `t`, cheapest first,
    /// ignoring empty stacks.
    pub fn cost_ranking(&self, params: &ParameterSet, t: usize, mode: Mode) -> Result<Vec<String>, AssemblyError> {
        let hour = self.assemble_hour(params, t, mode)?;
        let mut ranked: Vec<(f64, usize)> = hour
            .stacks
            .iter()
            .filter(|s| s.cap > 0.0 && matches!(self.stacks[s.tag].cost, CostSource::Fuel { .. }))
            .map(|s| (0.5 * (s.bounds.low + s.bounds.high), s.tag))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(ranked.into_iter().map(|(_, tag)| self.info[tag].id.clone()).collect())
    }
}

/// Split `cap` into shares `gs` and `1 - gs` whose floating-point sum is
/// exactly `cap`: the larger share is rounded, the smaller one is the
/// (exact) difference.
fn split_exact(cap: f64, gs: f64) -> (f64, f64) {
    if gs >= 0.5 {
        let first = cap * gs;
        (first, cap - first)
    } else {
        let second = cap * (1.0 - gs);
        (cap - second, second)
    }
}

/// Groups that have at least one parameter for this catalog.
pub fn available_groups(catalog: &PlantCatalog) -> BTreeSet<ParamGroup> {
    ParameterLayout::for_catalog(catalog).specs.iter().map(|s| s.group).collect()
}
