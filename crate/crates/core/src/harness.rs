//! Random instance generation and batch experiments.
//!
//! Instances come from a ChaCha8 stream keyed by the spec seed, so a
//! `(spec, seed)` pair names the same instance on every platform. A sweep runs
//! every mechanism on every generated instance, attaches the invariant checks
//! that apply to that mechanism, and returns rows in a fixed order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use num_traits::{One, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::bundle::Bundle;
use crate::mechanisms::{
    check_price_bounds, composite_any_m, greedy, mpu, mpu_modified, mpu_modified_rand, mpu_rand, rand_exp, rand_poly,
    MechanismError, OutcomeDistribution, PriceTrace, SeededCoins,
};
use crate::model::{check_allocation, welfare, Declaration, Demand, GoodUniverse, Instance};
use crate::oracle::{greedy_dual_certificate, optimal_welfare, OracleError};
use crate::rational::{format_rational, serde_rational, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid generator spec: {0}")]
    SpecInvalid(String),
    #[error("unknown mechanism `{0}`")]
    UnknownMechanism(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueDistribution {
    /// Integers drawn uniformly from `lo..=hi`.
    UniformInt { lo: i64, hi: i64 },
    /// `exp(U[ln lo, ln hi])` rounded to a multiple of `1/denominator`.
    LogUniform { lo: f64, hi: f64, denominator: i64 },
}

impl Default for ValueDistribution {
    fn default() -> Self {
        ValueDistribution::UniformInt { lo: 1, hi: 100 }
    }
}

fn default_one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub m: usize,
    /// Demands per bidder.
    pub k: usize,
    #[serde(default = "default_one")]
    pub b: u32,
    /// Largest bundle cardinality.
    pub d_cap: usize,
    #[serde(default)]
    pub values: ValueDistribution,
    #[serde(default)]
    pub seed: u64,
    /// Values pairwise distinct within each bidder.
    #[serde(default)]
    pub strict: bool,
}

impl GeneratorSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        GeneratorSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::SpecInvalid(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.m == 0 || self.m > crate::bundle::MAX_GOODS {
            return bad(format!("m must lie in 1..={}", crate::bundle::MAX_GOODS));
        }
        if self.b == 0 {
            return bad("b must be positive".into());
        }
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if self.d_cap == 0 || self.d_cap > self.m {
            return bad(format!("d_cap must lie in 1..={}", self.m));
        }
        if bundles_up_to(self.m, self.d_cap) < self.k as u128 {
            return bad(format!("fewer than k = {} bundles of size <= {}", self.k, self.d_cap));
        }
        match self.values {
            ValueDistribution::UniformInt { lo, hi } => {
                if lo < 0 || lo > hi {
                    return bad(format!("value range [{lo}, {hi}] is empty or negative"));
                }
                if self.strict && ((hi - lo) as u128 + 1) < self.k as u128 {
                    return bad(format!("range [{lo}, {hi}] cannot hold {} distinct values", self.k));
                }
            }
            ValueDistribution::LogUniform { lo, hi, denominator } => {
                if !(lo > 0.0 && lo <= hi && hi.is_finite()) || denominator <= 0 {
                    return bad("log-uniform needs 0 < lo <= hi and a positive denominator".into());
                }
                if hi * denominator as f64 > 1e15 {
                    return bad("log-uniform values too large for exact scaling".into());
                }
            }
        }
        Ok(())
    }
}

/// Number of nonempty subsets of `m` goods with at most `cap` members, saturating.
fn bundles_up_to(m: usize, cap: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for j in 1..=cap.min(m) {
        c = c.saturating_mul((m - j + 1) as u128) / j as u128;
        total = total.saturating_add(c);
    }
    total
}

fn draw_value(rng: &mut ChaCha8Rng, dist: &ValueDistribution) -> Rational {
    match *dist {
        ValueDistribution::UniformInt { lo, hi } => Rational::from_integer(rng.gen_range(lo..=hi) as i128),
        ValueDistribution::LogUniform { lo, hi, denominator } => {
            let x = rng.gen_range(lo.ln()..=hi.ln()).exp();
            let scaled = (x * denominator as f64).round().max(1.0) as i128;
            Rational::new(scaled, denominator as i128)
        }
    }
}

const MAX_REJECTIONS: usize = 10_000;

/// Deterministic instance for `spec.seed`.
pub fn generate(spec: &GeneratorSpec) -> Result<Instance, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut decls = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut bundles: Vec<Bundle> = Vec::with_capacity(spec.k);
        let mut tries = 0;
        while bundles.len() < spec.k {
            tries += 1;
            if tries > MAX_REJECTIONS {
                return Err(HarnessError::SpecInvalid("bundle sampling did not converge".into()));
            }
            let size = rng.gen_range(1..=spec.d_cap);
            let goods = sample(&mut rng, spec.m, size);
            let bundle = goods.iter().fold(Bundle::EMPTY, |acc, g| acc.union(Bundle::singleton(g)));
            if !bundles.contains(&bundle) {
                bundles.push(bundle);
            }
        }
        let mut values: Vec<Rational> = Vec::with_capacity(spec.k);
        let mut tries = 0;
        while values.len() < spec.k {
            tries += 1;
            if tries > MAX_REJECTIONS {
                return Err(HarnessError::SpecInvalid("distinct values did not converge".into()));
            }
            let v = draw_value(&mut rng, &spec.values);
            if !spec.strict || !values.contains(&v) {
                values.push(v);
            }
        }
        let demands = bundles.into_iter().zip(values).map(|(s, v)| Demand::new(s, v)).collect();
        decls.push(Declaration::new(demands).map_err(|e| HarnessError::SpecInvalid(e.to_string()))?);
    }
    let universe = GoodUniverse::new(spec.m, spec.b).map_err(|e| HarnessError::SpecInvalid(e.to_string()))?;
    Instance::new(universe, decls).map_err(|e| HarnessError::SpecInvalid(e.to_string()))
}

/// Mechanisms a sweep can run; parameters not listed come from [`SweepConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMechanism {
    Greedy,
    /// `mu` is the smallest power of two above the largest value.
    Mpu,
    MpuMod,
    MpuRand,
    MpuModRand,
    Composite,
    Randexp,
    Randpoly,
}

impl SweepMechanism {
    pub const ALL: [SweepMechanism; 8] = [
        SweepMechanism::Greedy,
        SweepMechanism::Mpu,
        SweepMechanism::MpuMod,
        SweepMechanism::MpuRand,
        SweepMechanism::MpuModRand,
        SweepMechanism::Composite,
        SweepMechanism::Randexp,
        SweepMechanism::Randpoly,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepMechanism::Greedy => "greedy",
            SweepMechanism::Mpu => "mpu",
            SweepMechanism::MpuMod => "mpu-mod",
            SweepMechanism::MpuRand => "mpu-rand",
            SweepMechanism::MpuModRand => "mpu-mod-rand",
            SweepMechanism::Composite => "composite",
            SweepMechanism::Randexp => "randexp",
            SweepMechanism::Randpoly => "randpoly",
        }
    }
}

impl std::str::FromStr for SweepMechanism {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepMechanism::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| HarnessError::UnknownMechanism(s.to_string()))
    }
}

/// Smallest power of two strictly above `v_max`, so `mu/2 <= v_max < mu`.
pub fn doubling_mu(v_max: Rational) -> Rational {
    let two = Rational::from_integer(2);
    let mut mu = Rational::one();
    while mu <= v_max {
        mu *= two;
    }
    while mu / two > v_max {
        mu /= two;
    }
    mu
}

/// `2·E·(sqrt(m)+1) >= opt`, decided exactly.
pub fn sqrt_bound_holds(expected: Rational, opt: Rational, m: usize) -> bool {
    let lhs = Rational::from_integer(2) * expected;
    let gap = opt - lhs;
    if gap <= Rational::zero() {
        return true;
    }
    lhs * lhs * Rational::from_integer(m as i128) >= gap * gap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Instances per spec; seeds are `spec.seed + j`.
    pub replicates: u64,
    pub workers: usize,
    #[serde(with = "serde_rational")]
    pub eps: Rational,
    /// Writes `micros = 0` so output is byte-stable.
    pub deterministic: bool,
    /// Where shrunk reproductions of failing rows go.
    pub repro_dir: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            replicates: 1,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            eps: crate::mechanisms::default_eps(),
            deterministic: false,
            repro_dir: None,
        }
    }
}

fn ser_opt_rational<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(r) => s.serialize_some(&format_rational(r)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub instance_id: usize,
    pub mechanism: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub b: u32,
    pub d: usize,
    /// Realized welfare, or the exact expectation for lottery mechanisms.
    #[serde(with = "serde_rational")]
    pub welfare: Rational,
    #[serde(serialize_with = "ser_opt_rational")]
    pub opt: Option<Rational>,
    pub ratio: Option<f64>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub cert_bound: Option<Rational>,
    pub flags: Vec<(String, bool)>,
    pub micros: u64,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.flags.iter().all(|(_, ok)| *ok)
    }

    pub fn failed_flags(&self) -> Vec<String> {
        let mut out: Vec<String> = self.flags.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.clone()).collect();
        if let Some(e) = &self.error {
            out.push(format!("error: {e}"));
        }
        out
    }

    fn flags_field(&self) -> String {
        let mut parts: Vec<String> =
            self.flags.iter().map(|(n, ok)| format!("{n}={}", if *ok { 1 } else { 0 })).collect();
        if let Some(e) = &self.error {
            parts.push(format!("error={}", e.replace([';', ',', '\n'], " ")));
        }
        parts.join(";")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Largest `OPT / welfare` per mechanism over rows with a known optimum.
    pub worst_ratio: BTreeMap<String, f64>,
    pub repro_files: Vec<PathBuf>,
}

impl SweepReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(SweepRow::passed)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        let opt_text = |v: &Option<Rational>| v.as_ref().map(format_rational).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.instance_id.to_string(),
                r.mechanism.clone(),
                r.seed.to_string(),
                r.n.to_string(),
                r.m.to_string(),
                r.k.to_string(),
                r.b.to_string(),
                r.d.to_string(),
                format_rational(&r.welfare),
                opt_text(&r.opt),
                r.ratio.map(|x| format!("{x:.6}")).unwrap_or_default(),
                opt_text(&r.cert_bound),
                r.flags_field(),
                r.micros.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes CSV or JSON depending on the file extension.
    pub fn write_file(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let mut f = std::io::BufWriter::new(file);
                f.write_all(self.to_json().as_bytes())?;
                f.write_all(b"\n")?;
                Ok(())
            }
            _ => self.write_csv(file),
        }
    }
}

pub const CSV_COLUMNS: [&str; 14] = [
    "instance_id",
    "mechanism",
    "seed",
    "n",
    "m",
    "k",
    "b",
    "d",
    "welfare",
    "opt",
    "ratio",
    "cert_bound",
    "flags",
    "micros",
];

struct Evaluation {
    welfare: Rational,
    opt: Option<Rational>,
    cert_bound: Option<Rational>,
    flags: Vec<(String, bool)>,
    micros: u64,
    error: Option<String>,
}

fn price_flags(flags: &mut Vec<(String, bool)>, instance: &Instance, trace: &PriceTrace, opt: Option<Rational>) {
    let report = check_price_bounds(instance, trace, opt);
    flags.push(("revenue".into(), report.revenue_bound));
    if let Some(ok) = report.opt_bound {
        flags.push(("opt_bound".into(), ok));
    }
    if let Some(ok) = report.ratio_bound {
        flags.push(("ratio_bound".into(), ok));
    }
    flags.push(("mu_cap".into(), report.no_sale_above_mu));
}

/// Runs one mechanism on one instance and evaluates its invariants.
fn evaluate(instance: &Instance, mech: SweepMechanism, seed: u64, eps: Rational) -> Evaluation {
    let opt = match optimal_welfare(instance) {
        Ok((v, _)) => Some(v),
        Err(OracleError::BudgetExceeded { .. }) => None,
        Err(e) => {
            return Evaluation {
                welfare: Rational::zero(),
                opt: None,
                cert_bound: None,
                flags: Vec::new(),
                micros: 0,
                error: Some(e.to_string()),
            }
        }
    };
    let mut flags: Vec<(String, bool)> = Vec::new();
    let mut cert_bound = None;
    let start = Instant::now();
    let run: Result<OutcomeDistribution, MechanismError> = (|| {
        Ok(match mech {
            SweepMechanism::Greedy => {
                let (alloc, trace) = greedy(instance, Default::default())?;
                let w = welfare(instance, &alloc);
                match greedy_dual_certificate(instance, &alloc, &trace) {
                    Ok(cert) => {
                        flags.push(("cert".into(), opt.map_or(true, |o| cert.bound >= o)));
                        cert_bound = Some(cert.bound);
                    }
                    Err(_) => flags.push(("cert".into(), false)),
                }
                if let Some(o) = opt {
                    let factor = Rational::from_integer(instance.d_prime() as i128 + 1);
                    flags.push(("approx".into(), factor * w >= o));
                }
                OutcomeDistribution::certain(alloc)
            }
            SweepMechanism::Mpu => {
                let (alloc, trace) = mpu(instance, doubling_mu(instance.max_value()))?;
                price_flags(&mut flags, instance, &trace, opt);
                OutcomeDistribution::certain(alloc)
            }
            SweepMechanism::MpuMod => {
                let (alloc, trace) = mpu_modified(instance, eps)?;
                price_flags(&mut flags, instance, &trace, opt);
                OutcomeDistribution::certain(alloc)
            }
            SweepMechanism::MpuRand => {
                let mu = doubling_mu(instance.max_value());
                OutcomeDistribution::certain(mpu_rand(instance, mu, &mut SeededCoins::new(seed))?.0)
            }
            SweepMechanism::MpuModRand => {
                OutcomeDistribution::certain(mpu_modified_rand(instance, eps, &mut SeededCoins::new(seed))?.0)
            }
            SweepMechanism::Composite => composite_any_m(instance, eps, &mut SeededCoins::new(seed))?,
            SweepMechanism::Randexp => {
                let dist = rand_exp(instance)?;
                if let (Some(o), k) = (opt, instance.k()) {
                    let e = dist.expected_welfare(instance);
                    flags.push(("approx".into(), k == 0 || e * Rational::from_integer(k as i128) >= o));
                }
                dist
            }
            SweepMechanism::Randpoly => {
                let dist = rand_poly(instance)?;
                if let Some(o) = opt {
                    flags.push(("approx".into(), sqrt_bound_holds(dist.expected_welfare(instance), o, instance.m())));
                }
                dist
            }
        })
    })();
    let micros = start.elapsed().as_micros() as u64;
    match run {
        Ok(dist) => {
            let feasible = dist.support.iter().all(|e| check_allocation(instance, &e.allocation).is_ok())
                && dist.total_probability() == Rational::one();
            flags.insert(0, ("feasible".into(), feasible));
            let w = dist.expected_welfare(instance);
            if let Some(o) = opt {
                flags.insert(1, ("ratio_ge_1".into(), o >= w));
            }
            Evaluation { welfare: w, opt, cert_bound, flags, micros, error: None }
        }
        Err(e) => {
            Evaluation { welfare: Rational::zero(), opt, cert_bound: None, flags, micros, error: Some(e.to_string()) }
        }
    }
}

fn ratio(opt: Rational, w: Rational) -> f64 {
    if w.is_zero() {
        if opt.is_zero() {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        to_f64(&(opt / w))
    }
}

/// One row, exactly as the sweep would produce it.
pub fn run_row(
    instance_id: usize,
    instance: &Instance,
    mech: SweepMechanism,
    seed: u64,
    config: &SweepConfig,
) -> SweepRow {
    let ev = evaluate(instance, mech, seed, config.eps);
    SweepRow {
        instance_id,
        mechanism: mech.label().to_string(),
        seed,
        n: instance.n(),
        m: instance.m(),
        k: instance.k(),
        b: instance.supply(),
        d: instance.d(),
        welfare: ev.welfare,
        opt: ev.opt,
        ratio: ev.opt.map(|o| ratio(o, ev.welfare)),
        cert_bound: ev.cert_bound,
        flags: ev.flags,
        micros: if config.deterministic { 0 } else { ev.micros },
        error: ev.error,
    }
}

fn still_fails(instance: &Instance, mech: SweepMechanism, seed: u64, eps: Rational, targets: &[String]) -> bool {
    let ev = evaluate(instance, mech, seed, eps);
    ev.flags.iter().any(|(n, ok)| !ok && targets.contains(n))
        || (ev.error.is_some() && targets.iter().any(|t| t.starts_with("error")))
}

/// Drops bidders, then single demands, while some originally failing flag
/// keeps failing.
pub fn shrink_failure(
    instance: &Instance,
    mech: SweepMechanism,
    seed: u64,
    eps: Rational,
    targets: &[String],
) -> Instance {
    let mut current = instance.clone();
    loop {
        let mut progressed = false;
        let decls = current.declarations().to_vec();
        for i in 0..decls.len() {
            if decls.len() == 1 {
                break;
            }
            let mut fewer = decls.clone();
            fewer.remove(i);
            let candidate = Instance::new(current.universe(), fewer).expect("subset of a valid instance");
            if still_fails(&candidate, mech, seed, eps, targets) {
                current = candidate;
                progressed = true;
                break;
            }
        }
        if progressed {
            continue;
        }
        'outer: for (i, decl) in decls.iter().enumerate() {
            for j in 0..decl.len() {
                let mut demands = decl.demands().to_vec();
                demands.remove(j);
                let d = Declaration::new(demands).expect("subset of a valid declaration");
                let candidate = current.with_declaration(i, d).expect("same goods");
                if still_fails(&candidate, mech, seed, eps, targets) {
                    current = candidate;
                    progressed = true;
                    break 'outer;
                }
            }
        }
        if !progressed {
            return current;
        }
    }
}

#[derive(Serialize)]
struct Repro<'a> {
    instance_id: usize,
    mechanism: &'a str,
    seed: u64,
    failed: Vec<String>,
    instance: &'a Instance,
}

/// Runs every mechanism on every `(spec, replicate)` instance.
///
/// Rows are ordered by instance id (specs in order, replicates within each),
/// then mechanism, then seed, independent of worker scheduling.
pub fn sweep(
    mechanisms: &[SweepMechanism],
    specs: &[GeneratorSpec],
    config: &SweepConfig,
) -> Result<SweepReport, HarnessError> {
    let mut instances = Vec::new();
    for spec in specs {
        for j in 0..config.replicates {
            let seed = spec.seed.wrapping_add(j);
            instances.push((seed, generate(&spec.with_seed(seed))?));
        }
    }
    let mut mechs = mechanisms.to_vec();
    mechs.sort_by_key(|m| m.label());
    mechs.dedup();
    let jobs: Vec<(usize, SweepMechanism)> =
        (0..instances.len()).flat_map(|i| mechs.iter().map(move |&m| (i, m))).collect();

    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|scope| {
        for _ in 0..config.workers.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(id, mech)) = jobs.get(j) else { break };
                let (seed, inst) = &instances[id];
                let row = run_row(id, inst, mech, *seed, config);
                done.lock().expect("no worker panicked").push(row);
            });
        }
    });
    let mut rows = done.into_inner().expect("no worker panicked");
    rows.sort_by(|a, b| (a.instance_id, &a.mechanism, a.seed).cmp(&(b.instance_id, &b.mechanism, b.seed)));

    let mut worst_ratio: BTreeMap<String, f64> = BTreeMap::new();
    for r in &rows {
        if let Some(x) = r.ratio {
            let slot = worst_ratio.entry(r.mechanism.clone()).or_insert(x);
            *slot = slot.max(x);
        }
    }

    let mut repro_files = Vec::new();
    if let Some(dir) = &config.repro_dir {
        for r in rows.iter().filter(|r| !r.passed()) {
            std::fs::create_dir_all(dir)?;
            let mech: SweepMechanism = r.mechanism.parse()?;
            let failed = r.failed_flags();
            let small = shrink_failure(&instances[r.instance_id].1, mech, r.seed, config.eps, &failed);
            let path = dir.join(format!("repro-{}-{}.json", r.instance_id, r.mechanism));
            let body =
                Repro { instance_id: r.instance_id, mechanism: &r.mechanism, seed: r.seed, failed, instance: &small };
            std::fs::write(&path, serde_json::to_string_pretty(&body).expect("repro serializes"))?;
            repro_files.push(path);
        }
    }
    Ok(SweepReport { rows, worst_ratio, repro_files })
}
