//! Seeded synthetic datasets with known structural coefficients.
//!
//! All preset coefficients are hand-picked plausible magnitudes, not
//! estimates from market data. Seasonality enters only through root drivers,
//! so the linear presets stay inside the declared linear SCM family. The
//! `nonlinear` preset is the exception: its temperature-to-load response
//! saturates.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use chrono::{DateTime, Datelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::scm::LinearScm;
use crate::seed::rng_for;
use crate::timeseries::{
    hourly_axis, instant_serde, parse_instant, read_csv, ColumnStats, FeatureFrame, HolidayCalendar,
    NormalizationStats, CYCLICAL_COLUMNS,
};

pub const PRESETS: [&str; 5] = ["fr_market", "simpson", "crisis", "river", "nonlinear"];

/// Bundled 90-day sample: the `fr_market` preset at seed 42 without calendar columns.
pub const SAMPLE_FR_CSV: &str = include_str!("../../data/sample_fr.csv");
pub const SAMPLE_FR_HOURS: usize = 2160;
pub const SAMPLE_FR_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarField {
    HourSin,
    HourCos,
    DoySin,
    DoyCos,
    WorkingDay,
}

impl CalendarField {
    fn slot(self) -> usize {
        match self {
            CalendarField::HourSin => 0,
            CalendarField::HourCos => 1,
            CalendarField::DoySin => 2,
            CalendarField::DoyCos => 3,
            CalendarField::WorkingDay => 4,
        }
    }

    fn of_name(name: &str) -> Option<Self> {
        let fields = [Self::HourSin, Self::HourCos, Self::DoySin, Self::DoyCos, Self::WorkingDay];
        CYCLICAL_COLUMNS.iter().position(|c| *c == name).map(|k| fields[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Driver {
    /// Intercept plus weighted parents plus Gaussian noise.
    Structural,
    /// Calendar encoding of the timestamp, as produced by `cyclical_encode`.
    Calendar { field: CalendarField },
    /// `intercept + amplitude * cos(2π (day_of_year - peak_day) / 365.25)` plus
    /// AR(1) noise with the given hourly persistence.
    Seasonal { amplitude: f64, peak_day: f64, persistence: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub unit: String,
    pub intercept: f64,
    pub noise_std: f64,
    pub driver: Driver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Linear,
    /// Smooth cap `knot - width * ln(1 + exp((knot - x) / width))`: slope 1
    /// well below `knot`, flat well above.
    Saturating { knot: f64, width: f64 },
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Linear => x,
            Transform::Saturating { knot, width } => {
                let z = (knot - x) / width;
                // ln(1 + e^z) without overflow
                let softplus = if z > 30.0 { z } else { z.exp().ln_1p() };
                knot - width * softplus
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub coefficient: f64,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrisisSpec {
    #[serde(with = "instant_serde")]
    pub instant: DateTime<Utc>,
    /// Level shift added to a node from the crisis instant on.
    pub shifts: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub name: String,
    pub graph: CausalGraph,
    /// One entry per graph node, in graph order.
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    pub start: DateTime<Utc>,
    pub n_hours: usize,
    pub crisis: Option<CrisisSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueCoefficient {
    pub from: String,
    pub to: String,
    pub raw: f64,
    /// `raw * std(from) / std(to)` on the generated data; absent for nonlinear edges.
    pub normalized: Option<f64>,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub preset: String,
    pub seed: u64,
    pub n_hours: usize,
    pub coefficients: Vec<TrueCoefficient>,
    pub noise_std: BTreeMap<String, f64>,
    pub crisis: Option<CrisisSpec>,
}

impl GroundTruth {
    pub fn get(&self, from: &str, to: &str) -> Option<&TrueCoefficient> {
        self.coefficients.iter().find(|c| c.from == from && c.to == to)
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.n_nodes();
        if self.nodes.len() != n {
            return Err(Error::invalid(format!("spec lists {} nodes for a {n}-node graph", self.nodes.len())));
        }
        if self.n_hours == 0 {
            return Err(Error::invalid("n_hours must be positive"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.name != self.graph.name(i) {
                return Err(Error::invalid(format!(
                    "node {i} is `{}` in the node list but `{}` in the graph",
                    node.name,
                    self.graph.name(i)
                )));
            }
            if !(node.noise_std >= 0.0 && node.noise_std.is_finite() && node.intercept.is_finite()) {
                return Err(Error::invalid(format!("node `{}` needs a finite intercept and noise std >= 0", node.name)));
            }
            let is_root = self.graph.parent_indices(i).is_empty();
            match node.driver {
                Driver::Structural if is_root => {
                    return Err(Error::invalid(format!("root `{}` needs a calendar or seasonal driver", node.name)));
                }
                Driver::Calendar { .. } | Driver::Seasonal { .. } if !is_root => {
                    return Err(Error::invalid(format!("`{}` has parents and must be structural", node.name)));
                }
                Driver::Seasonal { persistence, .. } if !(0.0..1.0).contains(&persistence) => {
                    return Err(Error::invalid(format!("persistence of `{}` must lie in [0, 1)", node.name)));
                }
                _ => {}
            }
        }
        if self.edges.len() != self.graph.n_edges() {
            return Err(Error::invalid(format!(
                "spec lists {} edges for a {}-edge graph",
                self.edges.len(),
                self.graph.n_edges()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.edges {
            if !self.graph.contains(&e.from) || !self.graph.contains(&e.to) || !self.graph.has_edge(&e.from, &e.to) {
                return Err(Error::MissingEdge { from: e.from.clone(), to: e.to.clone() });
            }
            if !seen.insert((e.from.as_str(), e.to.as_str())) || !e.coefficient.is_finite() {
                return Err(Error::invalid(format!("edge {} -> {} is repeated or not finite", e.from, e.to)));
            }
            if let Transform::Saturating { width, .. } = e.transform {
                if width <= 0.0 {
                    return Err(Error::invalid("saturation width must be positive"));
                }
            }
        }
        if let Some(c) = &self.crisis {
            let end = self.start + chrono::Duration::hours(self.n_hours as i64 - 1);
            if c.instant < self.start || c.instant > end {
                return Err(Error::invalid("crisis instant lies outside the generated range"));
            }
            for (node, shift) in &c.shifts {
                self.graph.index_of(node)?;
                if !shift.is_finite() {
                    return Err(Error::invalid(format!("crisis shift of `{node}` is not finite")));
                }
            }
        }
        Ok(())
    }

    pub fn with_hours(mut self, n_hours: usize) -> Self {
        self.n_hours = n_hours;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Forward simulation in topological order, in raw units.
pub fn generate(spec: &SyntheticSpec) -> Result<(FeatureFrame, GroundTruth)> {
    spec.validate()?;
    let g = &spec.graph;
    let n = spec.n_hours;
    let axis = hourly_axis(spec.start, n);
    let calendar = HolidayCalendar::french();
    let encoded: Vec<[f64; 5]> = axis.iter().map(|t| calendar.encode(t)).collect();
    let crisis_row = spec
        .crisis
        .as_ref()
        .map(|c| axis.partition_point(|t| *t < c.instant));

    // incoming edges per node in parent order
    let mut incoming: Vec<Vec<&EdgeSpec>> = vec![Vec::new(); g.n_nodes()];
    for i in 0..g.n_nodes() {
        for &p in g.parent_indices(i) {
            let e = spec
                .edges
                .iter()
                .find(|e| e.from == g.name(p) && e.to == g.name(i))
                .expect("validated edge");
            incoming[i].push(e);
        }
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); g.n_nodes()];
    for &i in g.topological_order() {
        let node = &spec.nodes[i];
        let mut rng = rng_for(spec.seed, &format!("synthgen/noise/{}", node.name));
        let mut col = match &node.driver {
            Driver::Calendar { field } => encoded.iter().map(|e| e[field.slot()]).collect(),
            Driver::Seasonal { amplitude, peak_day, persistence } => {
                let phi = *persistence;
                let innov = (1.0 - phi * phi).sqrt();
                let mut z: f64 = node.noise_std * rng.sample::<f64, _>(StandardNormal);
                axis.iter()
                    .enumerate()
                    .map(|(r, t)| {
                        if r > 0 {
                            z = phi * z + innov * node.noise_std * rng.sample::<f64, _>(StandardNormal);
                        }
                        let doy = f64::from(t.ordinal());
                        node.intercept + amplitude * (TAU * (doy - peak_day) / 365.25).cos() + z
                    })
                    .collect()
            }
            Driver::Structural => {
                let mut col = vec![node.intercept; n];
                for (e, &p) in incoming[i].iter().zip(g.parent_indices(i)) {
                    let parent = &columns[p];
                    for (v, &x) in col.iter_mut().zip(parent) {
                        *v += e.coefficient * e.transform.apply(x);
                    }
                }
                for v in &mut col {
                    *v += node.noise_std * rng.sample::<f64, _>(StandardNormal);
                }
                col
            }
        };
        if let (Some(c), Some(start)) = (&spec.crisis, crisis_row) {
            if let Some(shift) = c.shifts.get(&node.name) {
                col[start..].iter_mut().for_each(|v| *v += shift);
            }
        }
        columns[i] = col;
    }

    let mut frame = FeatureFrame::new(axis);
    for (node, col) in spec.nodes.iter().zip(&columns) {
        frame.push_column(node.name.clone(), node.unit.clone(), col.clone())?;
    }

    let std_of = |i: usize| ColumnStats::of(g.name(i), &columns[i]).map(|s| s.std).ok();
    let coefficients = g
        .edge_indices()
        .iter()
        .map(|&(a, b)| {
            let e = incoming[b][g.parent_indices(b).iter().position(|&p| p == a).expect("parent")];
            let normalized = match e.transform {
                Transform::Linear => std_of(a).zip(std_of(b)).map(|(sa, sb)| e.coefficient * sa / sb),
                Transform::Saturating { .. } => None,
            };
            TrueCoefficient {
                from: e.from.clone(),
                to: e.to.clone(),
                raw: e.coefficient,
                normalized,
                transform: e.transform,
            }
        })
        .collect();
    let noise_std = spec
        .nodes
        .iter()
        .filter(|n| matches!(n.driver, Driver::Structural | Driver::Seasonal { .. }))
        .map(|n| (n.name.clone(), n.noise_std))
        .collect();
    let truth = GroundTruth {
        preset: spec.name.clone(),
        seed: spec.seed,
        n_hours: n,
        coefficients,
        noise_std,
        crisis: spec.crisis.clone(),
    };
    Ok((frame, truth))
}

struct Builder {
    nodes: BTreeMap<String, NodeSpec>,
    edges: Vec<EdgeSpec>,
}

impl Builder {
    fn new() -> Self {
        let mut b = Builder { nodes: BTreeMap::new(), edges: Vec::new() };
        for name in CYCLICAL_COLUMNS {
            let field = CalendarField::of_name(name).expect("calendar column");
            b.nodes.insert(name.to_string(), NodeSpec {
                name: name.to_string(),
                unit: String::new(),
                intercept: 0.0,
                noise_std: 0.0,
                driver: Driver::Calendar { field },
            });
        }
        b
    }

    fn seasonal(&mut self, name: &str, unit: &str, mean: f64, amplitude: f64, peak_day: f64, noise: f64) -> &mut Self {
        self.nodes.insert(name.to_string(), NodeSpec {
            name: name.to_string(),
            unit: unit.to_string(),
            intercept: mean,
            noise_std: noise,
            driver: Driver::Seasonal { amplitude, peak_day, persistence: 0.0 },
        });
        self
    }

    /// Structural node with `(parent, coefficient)` pairs.
    fn node(&mut self, name: &str, unit: &str, intercept: f64, noise: f64, parents: &[(&str, f64)]) -> &mut Self {
        self.nodes.insert(name.to_string(), NodeSpec {
            name: name.to_string(),
            unit: unit.to_string(),
            intercept,
            noise_std: noise,
            driver: Driver::Structural,
        });
        for &(p, c) in parents {
            self.edges.push(EdgeSpec { from: p.into(), to: name.into(), coefficient: c, transform: Transform::Linear });
        }
        self
    }

    fn transform(&mut self, from: &str, to: &str, t: Transform) -> &mut Self {
        let e = self.edges.iter_mut().find(|e| e.from == from && e.to == to).expect("declared edge");
        e.transform = t;
        self
    }

    /// Spec over `graph` (or over the declared edges when `None`), keeping only used nodes.
    fn build(&self, name: &str, graph: Option<CausalGraph>, start: &str, n_hours: usize, seed: u64) -> Result<SyntheticSpec> {
        let graph = match graph {
            Some(g) => g,
            None => {
                let edges: Vec<(&str, &str)> = self.edges.iter().map(|e| (e.from.as_str(), e.to.as_str())).collect();
                CausalGraph::new(Vec::<&str>::new(), edges)?
            }
        };
        let nodes = graph
            .nodes()
            .iter()
            .map(|n| self.nodes.get(n).cloned().ok_or_else(|| Error::UnknownNode(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        let edges = graph
            .edges()
            .map(|(a, b)| {
                self.edges
                    .iter()
                    .find(|e| e.from == a && e.to == b)
                    .cloned()
                    .ok_or_else(|| Error::MissingEdge { from: a.into(), to: b.into() })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = SyntheticSpec {
            name: name.to_string(),
            graph,
            nodes,
            edges,
            start: parse_instant(start)?,
            n_hours,
            crisis: None,
            seed,
        };
        Ok(spec)
    }
}

const CAL: [&str; 5] = ["doy_sin", "doy_cos", "hour_sin", "hour_cos", "is_working_day"];

fn cal(weights: [f64; 5]) -> Vec<(&'static str, f64)> {
    CAL.iter().copied().zip(weights).collect()
}

fn with(mut base: Vec<(&'static str, f64)>, extra: &[(&'static str, f64)]) -> Vec<(&'static str, f64)> {
    base.extend_from_slice(extra);
    base
}

/// Market nodes shared by the `fr_market` and `crisis` presets.
fn market_builder() -> Builder {
    let mut b = Builder::new();
    b.node("air_temperature", "°C", 12.0, 3.0, &cal([-2.0, -8.0, -1.0, -3.0, 0.0]))
        .node(
            "river_temperature",
            "°C",
            8.0,
            1.0,
            &with(cal([-1.0, -3.0, 0.1, 0.2, 0.0]), &[("air_temperature", 0.5)]),
        )
        .node("river_flow", "m3/s", 2000.0, 400.0, &with(cal([300.0, 600.0, 0.0, 0.0, 0.0]), &[("air_temperature", -40.0)]))
        .node(
            "load",
            "MW",
            60000.0,
            3000.0,
            &with(cal([1000.0, 4000.0, -3000.0, -4000.0, 5000.0]), &[("air_temperature", -800.0)]),
        )
        .node("wind", "MW", 5000.0, 2500.0, &with(cal([300.0, 1500.0, 200.0, 300.0, 0.0]), &[("air_temperature", -50.0)]))
        .node("solar", "MW", 5000.0, 800.0, &with(cal([300.0, -1500.0, 1000.0, -2500.0, 0.0]), &[("air_temperature", 80.0)]))
        .node(
            "ror_generation",
            "MW",
            2000.0,
            400.0,
            &with(cal([200.0, 300.0, 0.0, 0.0, 0.0]), &[("air_temperature", -20.0), ("river_flow", 1.5)]),
        )
        .node(
            "nuclear_availability",
            "MW",
            30000.0,
            4000.0,
            &with(
                cal([500.0, 3000.0, 0.0, 0.0, 0.0]),
                &[("air_temperature", -150.0), ("river_flow", 2.0), ("river_temperature", -300.0), ("load", 0.3)],
            ),
        )
        .node(
            "residual_load_be",
            "MW",
            9000.0,
            800.0,
            &with(cal([100.0, 800.0, -500.0, -700.0, 1000.0]), &[("air_temperature", -150.0)]),
        )
        .node(
            "residual_load_de_lu",
            "MW",
            40000.0,
            6000.0,
            &with(cal([500.0, 5000.0, -3000.0, -4000.0, 6000.0]), &[("air_temperature", -500.0)]),
        )
        .node(
            "residual_load_es",
            "MW",
            20000.0,
            3000.0,
            &with(cal([200.0, 1500.0, -2000.0, -2500.0, 3000.0]), &[("air_temperature", 300.0)]),
        )
        .node(
            "residual_load_it_north",
            "MW",
            15000.0,
            2000.0,
            &with(cal([200.0, 1000.0, -1500.0, -2000.0, 3000.0]), &[("air_temperature", 100.0)]),
        )
        .node(
            "rl_ramp",
            "MW/h",
            0.0,
            500.0,
            &with(cal([20.0, 50.0, 1500.0, 800.0, 300.0]), &[("load", 0.02), ("wind", -0.02), ("solar", -0.05)]),
        )
        .seasonal("gas_price", "EUR/MWh", 25.0, 5.0, 15.0, 6.0)
        .seasonal("carbon_price", "EUR/t", 25.0, 0.0, 0.0, 5.0);
    let drivers = [
        ("load", 0.0015, -0.5),
        ("wind", -0.001, 0.3),
        ("solar", -0.001, 0.3),
        ("ror_generation", -0.002, 0.4),
        ("nuclear_availability", -0.0015, 1.0),
        ("gas_price", 1.8, 20.0),
        ("carbon_price", 0.6, 10.0),
        ("residual_load_be", 0.0005, 0.2),
        ("residual_load_de_lu", 0.0004, 0.05),
        ("residual_load_es", 0.0003, 0.1),
        ("residual_load_it_north", 0.0004, 0.1),
        ("rl_ramp", 0.003, 0.2),
        ("air_temperature", -0.3, 50.0),
        ("hour_sin", 1.0, 100.0),
        ("hour_cos", 2.0, 200.0),
        ("is_working_day", 3.0, -300.0),
    ];
    let price: Vec<(&str, f64)> = drivers.iter().map(|&(n, p, _)| (n, p)).collect();
    let exports: Vec<(&str, f64)> = drivers.iter().map(|&(n, _, x)| (n, x)).collect();
    b.node("price_day_ahead", "EUR/MWh", 10.0, 5.0, &price)
        .node("net_exports", "MW", 5000.0, 1500.0, &exports);
    b
}

/// Price and exports graphs merged into one two-target graph.
pub fn fr_market_union_graph() -> CausalGraph {
    let price = CausalGraph::fr_market_price();
    let exports = CausalGraph::fr_market_exports();
    let mut nodes: Vec<&str> = price.nodes().iter().map(String::as_str).collect();
    nodes.extend(exports.nodes().iter().map(String::as_str).filter(|n| !price.contains(n)));
    let edges: Vec<(&str, &str)> = price
        .edges()
        .chain(exports.edges().filter(|&(a, b)| !price.has_edge(a, b)))
        .collect();
    CausalGraph::new(nodes, edges).expect("bundled graphs merge into a DAG")
}

/// Named preset at its default size and seed.
pub fn preset(name: &str) -> Result<SyntheticSpec> {
    match name {
        "fr_market" => market_builder().build("fr_market", Some(CausalGraph::fr_market_price()), "2019-01-01T00:00Z", 8760, 1),
        "crisis" => {
            let mut spec = market_builder().build("crisis", Some(fr_market_union_graph()), "2020-10-01T00:00Z", 17520, 2)?;
            spec.crisis = Some(CrisisSpec {
                instant: parse_instant(crate::scm::DEFAULT_CRISIS_SPLIT)?,
                shifts: [
                    ("gas_price".to_string(), 100.0),
                    ("carbon_price".to_string(), 20.0),
                    ("nuclear_availability".to_string(), -8000.0),
                ]
                .into_iter()
                .collect(),
            });
            Ok(spec)
        }
        "simpson" => {
            // standardized design: x = c + e, y = -0.5 x + 1.5 c + 0.3 e'
            let mut b = Builder::new();
            b.seasonal("load", "MW", 55000.0, 8000.0, 15.0, 6000.0)
                .node("nuclear_availability", "MW", 17500.0, 5000.0, &[("load", 0.5)])
                .node("price", "EUR/MWh", 5.0, 6.0, &[("load", 0.003), ("nuclear_availability", -0.002)]);
            b.build("simpson", None, "2019-01-01T00:00Z", 8760, 7)
        }
        "river" => {
            // regression of price on river flow = total path effect + f * a Var(s) / Var(river);
            // with a = 800, Var(s) = 1/2 and Var(river) = 480000 the confounding term is f / 1200
            let total = 5.0 * -0.002 + 2.0 * -0.008;
            let f = 2.0 * total * 1200.0;
            let mut b = Builder::new();
            b.node("river_flow", "m3/s", 2000.0, 400.0, &[("doy_cos", 800.0)])
                .node("nuclear_availability", "MW", 35000.0, 2000.0, &[("river_flow", 5.0)])
                .node("ror_generation", "MW", 1500.0, 300.0, &[("river_flow", 2.0)])
                .node(
                    "price",
                    "EUR/MWh",
                    200.0,
                    5.0,
                    &[("nuclear_availability", -0.002), ("ror_generation", -0.008), ("doy_cos", f)],
                );
            b.build("river", None, "2019-01-01T00:00Z", 17520, 3)
        }
        "nonlinear" => {
            let mut b = Builder::new();
            b.node("air_temperature", "°C", 12.0, 2.5, &[("doy_sin", -2.0), ("doy_cos", -8.0), ("hour_cos", -3.0)])
                .node("load", "MW", 45000.0, 2000.0, &[("hour_cos", -3000.0), ("is_working_day", 4000.0), ("air_temperature", -1500.0)])
                .transform("air_temperature", "load", Transform::Saturating { knot: 10.0, width: 1.5 })
                .node("nuclear_availability", "MW", 25000.0, 2500.0, &[("doy_cos", 2000.0), ("load", 0.4)])
                .seasonal("gas_price", "EUR/MWh", 30.0, 5.0, 15.0, 5.0)
                .node(
                    "price",
                    "EUR/MWh",
                    0.0,
                    3.0,
                    &[("load", 0.002), ("nuclear_availability", -0.002), ("gas_price", 1.5)],
                );
            b.build("nonlinear", None, "2019-01-01T00:00Z", 20000, 5)
        }
        other => Err(Error::invalid(format!(
            "unknown preset `{other}` (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}

/// The bundled sample regenerated from scratch.
pub fn generate_sample_fr() -> Result<FeatureFrame> {
    let spec = preset("fr_market")?.with_hours(SAMPLE_FR_HOURS).with_seed(SAMPLE_FR_SEED);
    let (frame, _) = generate(&spec)?;
    let keep: Vec<&str> = frame.names().filter(|n| !CYCLICAL_COLUMNS.contains(n)).collect();
    frame.select(&keep)
}

/// The bundled sample as shipped.
pub fn sample_fr() -> Result<FeatureFrame> {
    read_csv(SAMPLE_FR_CSV.as_bytes(), None)
}

/// Random DAG on `v0..v{p-1}` where each forward pair is an edge with probability `density`.
pub fn random_dag(p: usize, density: f64, seed: u64) -> CausalGraph {
    random_linear_scm(p, density, seed).graph().clone()
}

/// Linear SCM in normalized units over a random DAG: coefficients of magnitude
/// 0.3 to 0.8 with random sign, unit noise, standard normal roots.
pub fn random_linear_scm(p: usize, density: f64, seed: u64) -> LinearScm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..p).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    let mut coefs: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for j in 0..p {
        for i in j + 1..p {
            if rng.random::<f64>() < density {
                edges.push((names[j].clone(), names[i].clone()));
                let mag = rng.random_range(0.3..0.8);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                coefs.entry(names[i].clone()).or_default().insert(names[j].clone(), sign * mag);
            }
        }
    }
    let g = CausalGraph::new(names.clone(), edges).expect("forward edges form a DAG");
    let mut stats = NormalizationStats::default();
    let mut roots = BTreeMap::new();
    let mut noise = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        stats.columns.insert(name.clone(), ColumnStats { mean: 0.0, std: 1.0 });
        if g.parent_indices(i).is_empty() {
            roots.insert(name.clone(), (0..20_000).map(|_| rng.sample(StandardNormal)).collect());
        } else {
            noise.insert(name.clone(), 1.0);
        }
    }
    LinearScm::from_parts(g, &coefs, &noise, &roots, stats, BTreeMap::new()).expect("consistent parts")
}
