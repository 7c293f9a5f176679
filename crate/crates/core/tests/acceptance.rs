//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veriauction::audit::{
    build_graph, check_k_monotone, check_k_set_monotone, check_money_implementable, check_truthful_no_money,
    CycleVerdict, DeclarationDomain, DomainMode, DomainSpec, EdgeMode,
};
use veriauction::gallery::{prop10_graph, thm11_pair, thm12_pair, thm13_constraints_hold, thm13_feasibility_at};
use veriauction::harness::{generate, sqrt_bound_holds, GeneratorSpec, ValueDistribution};
use veriauction::mechanisms::{
    check_price_bounds, copies_within_ceil_log_bound, copies_within_log_bound, enumerate_coins, greedy, mpu_modified,
    mpu_modified_rand, rand_exp, rand_poly, rounding_probability, run_price_update, GreedyConfig, MechanismKind,
    PriceParams,
};
use veriauction::model::check_allocation;
use veriauction::rational::{format_rational, to_big, to_f64};
use veriauction::{
    extend_valuation, greedy_dual_certificate, optimal_welfare, sigma, welfare, Allocation, Bundle, Declaration,
    Demand, GoodUniverse, Instance, OutcomeDistribution, Rational,
};

fn int(v: i128) -> Rational {
    Rational::from_integer(v)
}

/// Feasibility bookkeeping shared by every suite.
#[derive(Default)]
struct Tally {
    runs: u64,
    infeasible: u64,
    first: Option<String>,
}

impl Tally {
    fn check(&mut self, suite: &str, inst: &Instance, alloc: &Allocation) -> bool {
        self.runs += 1;
        match check_allocation(inst, alloc) {
            Ok(()) => true,
            Err(e) => {
                self.infeasible += 1;
                if self.first.is_none() {
                    self.first = Some(format!("{suite}: {e} on {}", compact(&inst)));
                }
                false
            }
        }
    }

    fn check_dist(&mut self, suite: &str, inst: &Instance, dist: &OutcomeDistribution) -> bool {
        let mut ok = dist.total_probability() == Rational::one();
        for e in &dist.support {
            ok &= self.check(suite, inst, &e.allocation);
        }
        ok
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(n: usize, title: &str, v: &Verdict, secs: f64) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("criterion {n} [{tag}] {title}: {} ({secs:.1}s)", v.detail);
}

// ---------------------------------------------------------------- 1

fn negative_cycle() -> Verdict {
    let delta = Rational::new(1, 10);
    let complete = prop10_graph(delta, EdgeMode::Complete).expect("graph builds");
    let verification = prop10_graph(delta, EdgeMode::Verification).expect("graph builds");
    let w = |a, b| complete.weight(a, b).expect("complete graph has every arc");
    let weights = [w(0, 1), w(1, 2), w(2, 0)];
    let expected = [Rational::new(-9, 10), Rational::new(1, 10), int(0)];
    let cycle = weights.iter().fold(Rational::zero(), |a, x| a + x);
    let detected = matches!(check_money_implementable(&complete), CycleVerdict::NegativeCycle { .. });
    let no_negative = verification.arcs().all(|a| a.weight >= Rational::zero())
        && check_truthful_no_money(&verification).is_ok_and(|v| v.is_ok());
    Verdict {
        pass: weights == expected && cycle == Rational::new(-8, 10) && detected && no_negative,
        detail: format!(
            "weights {}, {}, {}; cycle {}; detected {detected}; verification graph nonnegative {no_negative}",
            format_rational(&weights[0]),
            format_rational(&weights[1]),
            format_rational(&weights[2]),
            format_rational(&cycle)
        ),
    }
}

// ---------------------------------------------------------------- 2 and 5 (exhaustive family)

/// Every 1- or 2-bundle collection over `m` goods with values in {1,2,3},
/// bundles listed by ascending bitmask, plus how each goods permutation acts.
struct Family {
    decls: Vec<Declaration>,
    act: Vec<Vec<usize>>,
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                let used = p.clone();
                (0..m).filter(move |g| !used.contains(g)).map(move |g| {
                    let mut q = p.clone();
                    q.push(g);
                    q
                })
            })
            .collect();
    }
    out
}

fn family(m: usize) -> Family {
    let bundles: Vec<u64> = (1u64..(1 << m)).collect();
    let mut keys: Vec<Vec<(u64, i128)>> = Vec::new();
    for &s in &bundles {
        for v in 1..=3 {
            keys.push(vec![(s, v)]);
        }
    }
    for (i, &s) in bundles.iter().enumerate() {
        for &t in &bundles[i + 1..] {
            for v in 1..=3 {
                for w in 1..=3 {
                    keys.push(vec![(s, v), (t, w)]);
                }
            }
        }
    }
    let index: HashMap<Vec<(u64, i128)>, usize> = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let act = permutations(m)
        .iter()
        .map(|p| {
            keys.iter()
                .map(|key| {
                    let mut image: Vec<(u64, i128)> = key
                        .iter()
                        .map(|&(s, v)| ((0..m).filter(|g| s >> g & 1 == 1).map(|g| 1u64 << p[g]).sum(), v))
                        .collect();
                    image.sort();
                    index[&image]
                })
                .collect()
        })
        .collect();
    let decls = keys
        .iter()
        .map(|key| {
            Declaration::new(key.iter().map(|&(s, v)| Demand::new(Bundle::from_bits(s), int(v))).collect())
                .expect("distinct bundles, positive values")
        })
        .collect();
    Family { decls, act }
}

/// Collections that are lexicographically smallest in their orbit under
/// `group`, each with its stabilizer.
fn reps(fam: &Family, group: &[usize]) -> Vec<(usize, Vec<usize>)> {
    (0..fam.decls.len())
        .filter(|&c| group.iter().all(|&p| fam.act[p][c] >= c))
        .map(|c| (c, group.iter().copied().filter(|&p| fam.act[p][c] == c).collect()))
        .collect()
}

#[derive(Default)]
struct ExhaustiveStats {
    instances: u64,
    greedy_bound_fail: u64,
    cert_fail: u64,
    randexp_fail: u64,
    randpoly_fail: u64,
    first_failure: Option<String>,
}

impl ExhaustiveStats {
    fn note(&mut self, what: &str, inst: &Instance) {
        if self.first_failure.is_none() {
            self.first_failure = Some(format!("{what} on {}", compact(&inst)));
        }
    }
}

fn check_family_instance(inst: &Instance, stats: &mut ExhaustiveStats, tally: &mut Tally) {
    stats.instances += 1;
    let (opt, opt_alloc) = optimal_welfare(inst).expect("tiny instances fit the budget");
    tally.check("oracle", inst, &opt_alloc);

    let (alloc, trace) = greedy(inst, GreedyConfig::default()).expect("single supply");
    tally.check("greedy", inst, &alloc);
    let w = welfare(inst, &alloc);
    if int(inst.d_prime() as i128 + 1) * w < opt {
        stats.greedy_bound_fail += 1;
        stats.note("greedy bound", inst);
    }
    match greedy_dual_certificate(inst, &alloc, &trace) {
        Ok(cert) if cert.bound >= opt => {}
        _ => {
            stats.cert_fail += 1;
            stats.note("certificate", inst);
        }
    }

    let exp = rand_exp(inst).expect("fits the budget");
    tally.check_dist("randexp", inst, &exp);
    if exp.expected_welfare(inst) * int(inst.k() as i128) < opt {
        stats.randexp_fail += 1;
        stats.note("randexp bound", inst);
    }
    let poly = rand_poly(inst).expect("single supply");
    tally.check_dist("randpoly", inst, &poly);
    if !sqrt_bound_holds(poly.expected_welfare(inst), opt, inst.m()) {
        stats.randpoly_fail += 1;
        stats.note("randpoly bound", inst);
    }
}

/// All instances with `n <= 3`, `m <= 4`, `k <= 2`, values in {1,2,3}, one
/// representative per orbit under relabeling the goods.
fn exhaustive_family(tally: &mut Tally) -> (ExhaustiveStats, u64) {
    let mut stats = ExhaustiveStats::default();
    let mut represented: u64 = 0;
    for m in 1..=4 {
        let fam = family(m);
        let universe = GoodUniverse::single(m).expect("m >= 1");
        let group: Vec<usize> = (0..fam.act.len()).collect();
        let size = fam.decls.len() as u64;
        represented += size + size * size + size * size * size;
        let d = &fam.decls;
        let mk = |ix: &[usize]| Instance::new(universe, ix.iter().map(|&i| d[i].clone()).collect()).expect("valid");
        for (c1, h1) in reps(&fam, &group) {
            check_family_instance(&mk(&[c1]), &mut stats, tally);
            for (c2, h2) in reps(&fam, &h1) {
                check_family_instance(&mk(&[c1, c2]), &mut stats, tally);
                for (c3, _) in reps(&fam, &h2) {
                    check_family_instance(&mk(&[c1, c2, c3]), &mut stats, tally);
                }
            }
        }
    }
    (stats, represented)
}

// ---------------------------------------------------------------- 3

fn random_bundle(rng: &mut ChaCha8Rng, m: usize) -> Bundle {
    loop {
        let bits = rng.gen_range(1u64..(1 << m));
        let b = Bundle::from_bits(bits);
        if b.len() <= 3 {
            return b;
        }
    }
}

fn random_context(rng: &mut ChaCha8Rng, m: usize) -> Instance {
    let spec = GeneratorSpec {
        n: rng.gen_range(2..=3),
        m,
        k: rng.gen_range(1..=2),
        b: 1,
        d_cap: m.min(3),
        values: ValueDistribution::UniformInt { lo: 1, hi: 8 },
        seed: rng.gen(),
        strict: false,
    };
    generate(&spec).expect("valid spec")
}

fn random_grid(rng: &mut ChaCha8Rng) -> Vec<Rational> {
    let mut pool: Vec<i128> = (1..=8).collect();
    pool.shuffle(rng);
    let mut grid: Vec<i128> = pool[..4].to_vec();
    grid.sort();
    grid.into_iter().map(int).collect()
}

struct AuditStats {
    domains: usize,
    checks: usize,
    violations: usize,
    disagreements: usize,
    first: Option<String>,
}

fn truthfulness_audits(tally: &mut Tally) -> AuditStats {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA0D17);
    let mut stats = AuditStats { domains: 0, checks: 0, violations: 0, disagreements: 0, first: None };
    let mechanisms = [
        MechanismKind::Greedy(GreedyConfig::default()),
        MechanismKind::MpuModified { eps: veriauction::mechanisms::default_eps() },
    ];
    for round in 0..240 {
        let m = rng.gen_range(2..=4);
        let context = random_context(&mut rng, m);
        let bidder = rng.gen_range(0..context.n());
        let unknown = round % 2 == 1;
        let pool_size = if unknown { rng.gen_range(2..=3) } else { rng.gen_range(1..=2) };
        let mut pool: Vec<Bundle> = Vec::new();
        while pool.len() < pool_size {
            let b = random_bundle(&mut rng, m);
            if !pool.contains(&b) {
                pool.push(b);
            }
        }
        let spec = DomainSpec {
            bidder,
            mode: if unknown { DomainMode::Unknown } else { DomainMode::Known },
            pool,
            values: random_grid(&mut rng),
            max_bundles: Some(2),
            strict: false,
        };
        let domain = DeclarationDomain::from_spec(&spec).expect("valid domain");
        stats.domains += 1;
        for mech in &mechanisms {
            let graph = build_graph(mech, &context, &domain, EdgeMode::Verification).expect("mechanism runs");
            for (decl, out) in graph.vertices.iter().zip(&graph.outcomes) {
                let inst = context.with_declaration(bidder, decl.clone()).expect("fits");
                tally.check_dist("audit", &inst, out);
            }
            let edge_ok = check_truthful_no_money(&graph).expect("verification graph").is_ok();
            let report = if unknown {
                check_k_set_monotone(mech, &context, &domain)
            } else {
                check_k_monotone(mech, &context, &domain)
            }
            .expect("deterministic mechanism");
            stats.checks += 1;
            if !edge_ok || !report.is_ok() {
                stats.violations += 1;
                if stats.first.is_none() {
                    stats.first =
                        Some(format!("{} on {} bidder {bidder}: {report:?}", mech.label(), compact(&context)));
                }
            }
            if !report.agrees() || report.graph_ok != edge_ok {
                stats.disagreements += 1;
            }
        }
    }
    stats
}

// ---------------------------------------------------------------- 4

fn random_small_instance(rng: &mut ChaCha8Rng, n_max: usize, supplies: &[u32]) -> Instance {
    let m = rng.gen_range(1..=4);
    let k = if m == 1 { 1 } else { rng.gen_range(1..=2) };
    let spec = GeneratorSpec {
        n: rng.gen_range(1..=n_max),
        m,
        k,
        b: *supplies.choose(rng).expect("nonempty"),
        d_cap: rng.gen_range(1..=m),
        values: ValueDistribution::UniformInt { lo: 1, hi: 10 },
        seed: rng.gen(),
        strict: false,
    };
    generate(&spec).expect("valid spec")
}

struct PriceStats {
    runs: usize,
    infeasible: usize,
    revenue_fail: usize,
    opt_fail: usize,
    ratio_fail: usize,
    copies_fail: usize,
    copies_ceil_fail: usize,
    first_copies: Option<String>,
}

fn price_update_checks(tally: &mut Tally) -> PriceStats {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9A1CE);
    let eps = veriauction::mechanisms::default_eps();
    let mut s = PriceStats {
        runs: 0,
        infeasible: 0,
        revenue_fail: 0,
        opt_fail: 0,
        ratio_fail: 0,
        copies_fail: 0,
        copies_ceil_fail: 0,
        first_copies: None,
    };
    for _ in 0..1000 {
        let inst = random_small_instance(&mut rng, 5, &[1, 2]);
        let (opt, _) = optimal_welfare(&inst).expect("fits");
        let (alloc, trace) = mpu_modified(&inst, eps).expect("positive values");
        s.runs += 1;
        if !tally.check("mpu-mod", &inst, &alloc) {
            s.infeasible += 1;
        }
        let r = check_price_bounds(&inst, &trace, Some(opt));
        s.revenue_fail += usize::from(!r.revenue_bound);
        s.opt_fail += usize::from(r.opt_bound != Some(true));
        s.ratio_fail += usize::from(r.ratio_bound != Some(true));

        // Same order and mu, rate 2^{1/b}, nothing stops overselling.
        let params =
            PriceParams { mu: trace.mu, rate_base: 2, supply_tracking: false, max_bidder_first: true, rounding: None };
        let (_, over) = run_price_update(&inst, &params, &mut veriauction::mechanisms::AllHeads).expect("runs");
        if !copies_within_log_bound(&over, inst.m()) {
            s.copies_fail += 1;
            if s.first_copies.is_none() {
                s.first_copies = Some(format!("levels {:?} on {}", over.final_levels(), compact(&inst)));
            }
        }
        s.copies_ceil_fail += usize::from(!copies_within_ceil_log_bound(&over, inst.m()));
    }
    s
}

// ---------------------------------------------------------------- 5 (coin enumeration)

struct CoinStats {
    instances: usize,
    vectors: usize,
    failures: usize,
    worst_margin: f64,
}

fn coin_enumeration(tally: &mut Tally) -> CoinStats {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0125);
    let eps = veriauction::mechanisms::default_eps();
    let mut s = CoinStats { instances: 0, vectors: 0, failures: 0, worst_margin: f64::INFINITY };
    for _ in 0..500 {
        let inst = random_small_instance(&mut rng, 4, &[1, 2]);
        let (opt, _) = optimal_welfare(&inst).expect("fits");
        let q = rounding_probability(inst.d(), inst.supply(), inst.m());
        let bits = inst.n() - 1;
        let dist = enumerate_coins(&inst, bits, q, |coins| {
            let (alloc, _) = mpu_modified_rand(&inst, eps, coins)?;
            assert_eq!(coins.consumed(), bits, "one coin per non-max bidder");
            Ok(alloc)
        })
        .expect("enumerable");
        for o in &dist.outcomes {
            tally.check("mpu-mod-rand", &inst, &o.allocation);
        }
        s.instances += 1;
        s.vectors += dist.outcomes.len();
        let total_p: f64 = dist.outcomes.iter().map(|o| o.probability).sum();
        let expected = dist.expected_welfare();
        let target = q / 8.0 * to_f64(&opt);
        let margin = expected - target;
        s.worst_margin = s.worst_margin.min(margin / to_f64(&opt).max(1.0));
        if (total_p - 1.0).abs() > 1e-12 || margin < -1e-12 {
            s.failures += 1;
        }
    }
    s
}

// ---------------------------------------------------------------- 6

fn gallery_checks() -> Verdict {
    let d = Rational::new(1, 10);
    let t11 = thm11_pair(d).expect("valid delta");
    let t12 = thm12_pair(d).expect("valid delta");
    let r11 = t11.fact("greedy ratio instance 2").map(|f| f.observed.clone()).unwrap_or_default();
    let r12 = t12.fact("greedy expected-welfare ratio").map(|f| f.observed.clone()).unwrap_or_default();
    let low = thm13_feasibility_at(Rational::new(109, 100));
    let rho = Rational::new(12, 10);
    let high = thm13_feasibility_at(rho);
    let witness_ok = high.witness.as_ref().is_some_and(|(p, q)| thm13_constraints_hold(&to_big(&rho), p, q));
    let witness = high
        .witness
        .as_ref()
        .map(|(p, q)| format!("({:.6}, {:.6})", big_f64(p), big_f64(q)))
        .unwrap_or_else(|| "none".into());
    Verdict {
        pass: t11.all_hold()
            && t12.all_hold()
            && r11 == "21/11"
            && r12 == "49/40"
            && !low.feasible
            && high.feasible
            && witness_ok,
        detail: format!(
            "ratio pair {r11}, expected-ratio pair {r12}; rho 1.09 feasible {}; rho 1.2 feasible {} witness {witness} valid {witness_ok}",
            low.feasible, high.feasible
        ),
    }
}

fn big_f64(x: &num_rational::BigRational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------- 7 (extension invariants)

fn extension_invariants() -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    let mut failures = 0;
    let pairs = 100_000;
    for _ in 0..pairs {
        let m = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=4);
        let mut demands: Vec<Demand> = Vec::new();
        while demands.len() < k.min((1 << m) - 1) {
            let b = Bundle::from_bits(rng.gen_range(1u64..(1 << m)));
            if demands.iter().all(|d| d.bundle != b) {
                demands.push(Demand::new(b, int(rng.gen_range(0..=6))));
            }
        }
        let decl = Declaration::new(demands).expect("valid");
        let s = Bundle::from_bits(rng.gen_range(0u64..(1 << m)));
        let t = s.union(Bundle::from_bits(rng.gen_range(0u64..(1 << m))));
        let ext = extend_valuation(&decl, s);
        let sig = sigma(&decl, s);
        let mut ok = sig.is_subset(s)
            && extend_valuation(&decl, sig) == ext
            && sigma(&decl, sig) == sig
            && extend_valuation(&decl, t) >= ext
            && (sig.is_empty() || decl.value_of(sig) == Some(ext));
        for d in decl.demands() {
            if d.bundle.is_subset(s) {
                ok &= ext >= d.value;
            }
            ok &= extend_valuation(&decl, d.bundle) >= d.value;
        }
        failures += u64::from(!ok);
    }
    (pairs, failures)
}

// ----------------------------------------------------------------

fn compact<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_default()
}

fn main() -> ExitCode {
    let mut tally = Tally::default();
    let mut all = true;

    let t = Instant::now();
    let v = negative_cycle();
    let secs = t.elapsed().as_secs_f64();
    let v = Verdict { pass: v.pass && secs < 1.0, detail: v.detail };
    report(1, "greedy admits a negative cycle, verification removes it", &v, secs);
    all &= v.pass;

    let t = Instant::now();
    let (ex, represented) = exhaustive_family(&mut tally);
    let ex_secs = t.elapsed().as_secs_f64();
    let v = Verdict {
        pass: ex.greedy_bound_fail == 0 && ex.cert_fail == 0,
        detail: format!(
            "{} orbit representatives covering {represented} instances; bound failures {}, certificate failures {}{}",
            ex.instances,
            ex.greedy_bound_fail,
            ex.cert_fail,
            ex.first_failure.as_deref().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    };
    report(2, "greedy within (d'+1) of OPT with a feasible dual certificate", &v, ex_secs);
    all &= v.pass;

    let t = Instant::now();
    let au = truthfulness_audits(&mut tally);
    let v = Verdict {
        pass: au.domains >= 100 && au.violations == 0 && au.disagreements == 0,
        detail: format!(
            "{} domains, {} mechanism checks, {} violations, {} disagreements{}",
            au.domains,
            au.checks,
            au.violations,
            au.disagreements,
            au.first.map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    };
    report(3, "greedy and max-bidder-first price update are truthful on random domains", &v, t.elapsed().as_secs_f64());
    all &= v.pass;

    let t = Instant::now();
    let ps = price_update_checks(&mut tally);
    let v = Verdict {
        pass: ps.infeasible == 0 && ps.revenue_fail == 0 && ps.opt_fail == 0 && ps.ratio_fail == 0 && ps.copies_fail == 0,
        detail: format!(
            "{} runs; infeasible {}, revenue bound {}, opt bound {}, ratio bound {}, copies over b*log2(4bm) {} (over the ceiling {}){}",
            ps.runs,
            ps.infeasible,
            ps.revenue_fail,
            ps.opt_fail,
            ps.ratio_fail,
            ps.copies_fail,
            ps.copies_ceil_fail,
            ps.first_copies.map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    };
    report(4, "price update feasible, per-run bounds exact, bounded overselling", &v, t.elapsed().as_secs_f64());
    all &= v.pass;

    let t = Instant::now();
    let cs = coin_enumeration(&mut tally);
    let v = Verdict {
        pass: cs.failures == 0 && ex.randexp_fail == 0 && ex.randpoly_fail == 0,
        detail: format!(
            "rounding: {} instances, {} coin vectors, {} below q/8*OPT (worst normalized margin {:.3e}); lotteries on the criterion-2 family: rank-slice failures {}, sqrt-split failures {}",
            cs.instances, cs.vectors, cs.failures, cs.worst_margin, ex.randexp_fail, ex.randpoly_fail
        ),
    };
    report(5, "randomized mechanisms meet their expected-welfare bounds", &v, t.elapsed().as_secs_f64() + ex_secs);
    all &= v.pass;

    let t = Instant::now();
    let v = gallery_checks();
    report(6, "lower-bound gallery", &v, t.elapsed().as_secs_f64());
    all &= v.pass;

    let t = Instant::now();
    let (pairs, ext_fail) = extension_invariants();
    let v = Verdict {
        pass: tally.infeasible == 0 && ext_fail == 0,
        detail: format!(
            "{} mechanism outputs checked, {} infeasible; {pairs} (declaration, bundle) pairs, {ext_fail} extension failures{}",
            tally.runs,
            tally.infeasible,
            tally.first.map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    };
    report(7, "feasibility everywhere and extension invariants", &v, t.elapsed().as_secs_f64());
    all &= v.pass;

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
