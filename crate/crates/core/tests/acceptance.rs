//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::time::Instant;

use femto_ffr::femto_control::{compute_spillage, kkt_recover, verify_suite, waterfill, OracleInstance, PowerAllocation};
use femto_ffr::harness::{run_scenario, ScenarioConfig, ScenarioOutput};
use femto_ffr::radio::Direction;
use femto_ffr::rate_model::Mode;
use femto_ffr::stats::{max_cdf_excess, percentile, sorted, Summary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_utility, dot};

const DL: Direction = Direction::Downlink;
const UL: Direction = Direction::Uplink;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn oracle_suite() -> Outcome {
    let t = Instant::now();
    let counts = verify_suite(100, 7);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        counts.pareto_pass == counts.total && secs < 60.0,
        format!("{}/{} waterfilled allocations Pareto optimal in {secs:.1} s", counts.pareto_pass, counts.total),
    )
}

fn all_active_instance(seed: u64, n: usize, m: &[usize]) -> (OracleInstance, PowerAllocation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut inst = OracleInstance::random(&mut rng, n, m);
        inst.lambda.iter_mut().for_each(|l| *l *= 100.0);
        let alloc = inst.waterfilled().unwrap();
        if alloc.p.iter().flatten().all(|&p| p > 0.0) {
            return (inst, alloc);
        }
    }
}

fn kkt_round_trip() -> Outcome {
    let t = Instant::now();
    let counts = verify_suite(100, 7);
    // Non-optimal allocations: inflate `p + floor` fourfold on one coordinate
    // of one femto while the others still pin the loads.
    let shapes = [(3usize, vec![1usize, 1]), (2, vec![1, 1])];
    let mut rejected = 0;
    let mut weakest = f64::INFINITY;
    let negatives = 100;
    for (seed, (n, m)) in (0..negatives as u64).zip(shapes.iter().cycle()) {
        let (inst, alloc) = all_active_instance(1000 + seed, *n, m);
        let u = inst.utility();
        let k = (seed % 2) as usize;
        let mut bad = alloc.clone();
        bad.p[0][k] = 4.0 * (alloc.p[0][k] + u.floor(0, k)) - u.floor(0, k);
        let res = kkt_recover(&inst, &bad).map(|r| r.residual).unwrap_or(f64::INFINITY);
        weakest = weakest.min(res);
        rejected += (res > 1e-3) as usize;
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        counts.kkt_pass == counts.total && rejected == negatives && secs < 60.0,
        format!(
            "{}/{} optimal residuals < 1e-6, {rejected}/{negatives} perturbed residuals > 1e-3 (min {weakest:.2e}), {secs:.1} s",
            counts.kkt_pass, counts.total
        ),
    )
}

fn waterfill_vs_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cases = 90;
    let (mut worst_gap, mut worst_slack, mut worst_violation) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..cases {
        let k = 1 + case % 3;
        let inst = OracleInstance::random(&mut rng, 1, &vec![1; k]);
        let u = inst.utility();
        let r = compute_spillage(&inst.gain_matrix(), &inst.loads).r;
        let cap = if case % 2 == 0 { None } else { Some(rng.gen_range(0.05..2.0)) };
        let lambda = inst.lambda[0];
        let s = waterfill(&u, 0, &r[0], lambda, cap).unwrap();
        let best = brute_force_utility(&u, &r[0], lambda, cap);
        let got = u.utility(0, &s.p);
        worst_gap = worst_gap.max((best - got) / best.abs().max(1e-300));
        let mut slack = 1.0 - dot(&r[0], &s.p) / lambda;
        if let Some(c) = cap {
            slack = slack.min(1.0 - dot(&u.weights, &s.p) / c);
        }
        worst_slack = worst_slack.max(slack);
        worst_violation = worst_violation.max(-slack);
    }
    outcome(
        worst_gap <= 1e-6 && worst_slack <= 1e-9 && worst_violation <= 1e-9,
        format!(
            "{cases} instances, worst utility shortfall {worst_gap:.1e}, binding slack {worst_slack:.1e}, overshoot {worst_violation:.1e}"
        ),
    )
}

fn stats(out: &ScenarioOutput, mode: Mode, dir: Direction) -> Summary {
    Summary::of(&out.samples(mode, dir))
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn convergence(out: &ScenarioOutput) -> Outcome {
    let d = out.report.direction(DL).unwrap();
    let f = d.within_target_fraction.unwrap_or(0.0);
    outcome(
        f >= 0.97,
        format!("{:.2}% of {} DL macro receivers within target + 0.1 dB", 100.0 * f, d.receivers),
    )
}

fn dl_headline(out: &ScenarioOutput) -> Outcome {
    let med = stats(out, Mode::Subband, DL).median.unwrap_or(f64::NAN);
    let loss = out.report.rate(Mode::Subband, DL).unwrap().macro_loss;
    outcome(
        within(med, 2.0, 3.2) && within(loss, 0.02, 0.10),
        format!("median {med:.3} bps/Hz (want 2.0..3.2), macro loss {:.2}% (want 2..10%)", 100.0 * loss),
    )
}

fn ul_headline(out: &ScenarioOutput) -> Outcome {
    let med = stats(out, Mode::Subband, UL).median.unwrap_or(f64::NAN);
    let loss = out.report.rate(Mode::Subband, UL).unwrap().macro_loss;
    let rise = out.report.direction(UL).unwrap().noise_rise_within_0_6_db.unwrap_or(0.0);
    outcome(
        within(med, 1.0, 2.0) && within(loss, 0.03, 0.10) && rise >= 0.95,
        format!(
            "median {med:.3} bps/Hz (want 1.0..2.0), macro loss {:.2}% (want 3..10%), {:.1}% of cell-subbands rise <= 0.6 dB",
            100.0 * loss,
            100.0 * rise
        ),
    )
}

fn orderings(out: &ScenarioOutput) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;

    // (a) JD never raises the CDF; the widest vertical gap sits below the median.
    let sub_dl = out.samples(Mode::Subband, DL);
    let jd_dl = out.samples(Mode::SubbandJd, DL);
    let (s_dl, j_dl) = (sorted(&sub_dl), sorted(&jd_dl));
    let (above, _) = max_cdf_excess(&j_dl, &s_dl);
    let (gap, at) = max_cdf_excess(&s_dl, &j_dl);
    let med_dl = percentile(&s_dl, 0.5).unwrap_or(f64::NAN);
    let a = above <= 0.0 && gap > 0.0 && at < med_dl;
    pass &= a;
    parts.push(format!(
        "(a) {} jd excess {above:.3}, widest gap {gap:.3} at {at:.2} vs median {med_dl:.2}",
        if a { "ok" } else { "FAIL" }
    ));

    // (b)
    let jd_gain = stats(out, Mode::SubbandJd, UL).median.unwrap_or(f64::NAN) - stats(out, Mode::Subband, UL).median.unwrap_or(f64::NAN);
    let b = jd_gain <= 0.3;
    pass &= b;
    parts.push(format!("(b) {} UL jd median gain {jd_gain:.3}", if b { "ok" } else { "FAIL" }));

    // (c)
    let ul_sub = stats(out, Mode::Subband, UL).median.unwrap_or(f64::NAN);
    let ul_flat = stats(out, Mode::NoSubband, UL).median.unwrap_or(f64::NAN);
    let c = ul_sub > ul_flat;
    pass &= c;
    parts.push(format!("(c) {} UL median {ul_sub:.3} vs no-subband {ul_flat:.3}", if c { "ok" } else { "FAIL" }));

    // (d)
    let ds = stats(out, Mode::Subband, DL);
    let dn = stats(out, Mode::NoSubband, DL);
    let (ms, mn) = (ds.median.unwrap_or(f64::NAN), dn.median.unwrap_or(f64::NAN));
    let (is, in_) = (ds.iqr().unwrap_or(f64::NAN), dn.iqr().unwrap_or(f64::NAN));
    let rel = (ms - mn).abs() / mn;
    let d = rel <= 0.2 && is < in_;
    pass &= d;
    parts.push(format!(
        "(d) {} DL medians {ms:.3} vs {mn:.3} ({:.0}% apart), IQR {is:.3} vs {in_:.3}",
        if d { "ok" } else { "FAIL" },
        100.0 * rel
    ));

    // (e) per drop the orthog links at the ceiling sit exactly at 5·η.
    for dir in [DL, UL] {
        let (mut at_cap, mut links) = (0usize, 0usize);
        for drop in &out.drops {
            let eta = drop.directions.iter().find(|o| o.direction == dir).unwrap().eta;
            let se = &drop.report(Mode::Orthog, dir).unwrap().se;
            links += se.len();
            at_cap += se.iter().filter(|&&x| (x - 5.0 * eta).abs() <= 1e-9 * (5.0 * eta).max(1e-12)).count();
        }
        let mass = at_cap as f64 / links.max(1) as f64;
        let o = sorted(&out.samples(Mode::Orthog, dir));
        let s = sorted(&out.samples(Mode::Subband, dir));
        let below = (10..=75).all(|p| {
            let q = p as f64 / 100.0;
            percentile(&o, q).unwrap_or(f64::NAN) < percentile(&s, q).unwrap_or(f64::NAN)
        });
        let e = mass >= 0.01 && below;
        pass &= e;
        parts.push(format!(
            "(e{dir}) {} {:.1}% at 5·eta, below subband over p10..p75: {below}",
            if e { "ok" } else { "FAIL" },
            100.0 * mass
        ));
    }
    outcome(pass, parts.join("; "))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "oracle suite", oracle_suite()));
    results.push((2, "kkt round trip", kkt_round_trip()));
    results.push((3, "waterfill vs grid", waterfill_vs_grid()));

    let cfg = ScenarioConfig::default();
    let t = Instant::now();
    let first = run_scenario(&cfg).expect("paper-scale scenario");
    let secs = t.elapsed().as_secs_f64();
    eprintln!("paper-scale scenario: {} drops in {secs:.1} s", first.drops.len());
    results.push((4, "convergence", convergence(&first)));
    results.push((5, "downlink headline", dl_headline(&first)));
    results.push((6, "uplink headline", ul_headline(&first)));
    results.push((7, "mode orderings", orderings(&first)));

    let second = run_scenario(&cfg).expect("paper-scale scenario");
    let same = first.report.to_json() == second.report.to_json();
    results.push((
        8,
        "deterministic reproduction",
        outcome(same, format!("summary.json {}", if same { "identical" } else { "differs" })),
    ));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.pass) as usize;
    }
    println!("{}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
