//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coded_caching::baselines::scheme1_for;
use coded_caching::combinatorics::{int, rat, Rational, UserSet};
use coded_caching::equal_cache::{man_placement, rate_eq};
use coded_caching::incremental::{merged_view, refine_placement};
use coded_caching::plan::Layer;
use coded_caching::simulator::{verify, DemandMode, Instance};
use coded_caching::unequal::{rate_ueq, two_stage_scheme, unequal_params, Scenario, UnequalConfig};

type Outcome = Result<String, String>;

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn quarters(n: usize) -> Vec<Rational> {
    (0..=4 * n as i64).map(|q| rat(q, 4)).collect()
}

fn grid_systems() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for n in 4..=6 {
        for k in 3..=4 {
            out.push((n, k));
        }
    }
    out
}

fn check_instance(instance: &Instance, mode: DemandMode) -> Result<usize, String> {
    let formula = instance.rate().map_err(|e| format!("{instance}: {e}"))?;
    let summary = verify(instance, mode, 0x5eed, None).map_err(|e| format!("{instance}: {e}"))?;
    if let Some(bad) = summary.first_failure() {
        return Err(format!("{instance}: {}", bad.to_record(summary.f_bits)));
    }
    if summary.worst_load != formula {
        return Err(format!("{instance}: worst load {} != formula {formula}", summary.worst_load));
    }
    Ok(summary.reports.len())
}

fn worked_example() -> Outcome {
    let eq = rate_eq(4, 4, &int(1)).map_err(|e| e.to_string())?;
    let cfg = UnequalConfig::new(4, 4, 3, int(2), int(1)).map_err(|e| e.to_string())?;
    let ueq = rate_ueq(&cfg).map_err(|e| e.to_string())?.rate;
    if eq != rat(3, 2) || ueq != int(1) {
        return Err(format!("rate_eq(4,4,1) = {eq}, rate_ueq(4,4,3,2,1) = {ueq}"));
    }
    Ok(format!("rate_eq = {eq}, rate_ueq = {ueq}"))
}

/// One transmission as (file, stage-1 set, final holders, target, length) per part, sorted.
type TxShape = Vec<(usize, Vec<usize>, Vec<usize>, usize, Rational)>;

fn delivery_structure() -> Outcome {
    let cfg = UnequalConfig::new(4, 4, 3, int(2), int(1)).map_err(|e| e.to_string())?;
    let (_, plan) = two_stage_scheme(&cfg, &[1, 2, 3, 4]).map_err(|e| e.to_string())?;
    let mut got: Vec<TxShape> = plan
        .transmissions
        .iter()
        .map(|tx| {
            let mut parts: TxShape = tx
                .parts
                .iter()
                .map(|p| {
                    let id = &p.segment.id;
                    (
                        id.file,
                        id.stage1_set.members().to_vec(),
                        id.holders().members().to_vec(),
                        p.target,
                        p.segment.length.clone(),
                    )
                })
                .collect();
            parts.sort();
            parts
        })
        .collect();
    got.sort();

    // Files A, B, C, D are 1..=4, requested by users 1..=4 in that order.
    let q = rat(1, 4);
    let e = rat(1, 8);
    let pair = |f: usize, u: usize| vec![(f, vec![4], vec![4], u, q.clone()), (4, vec![u], vec![u], 4, q.clone())];
    let mut want: Vec<TxShape> = vec![
        pair(1, 1),
        pair(2, 2),
        pair(3, 3),
        // A''_2 + B''_1 + C'_1
        vec![
            (1, vec![2], vec![2, 3], 1, e.clone()),
            (2, vec![1], vec![1, 3], 2, e.clone()),
            (3, vec![1], vec![1, 2], 3, e.clone()),
        ],
        // A''_3 + B'_3 + C'_2
        vec![
            (1, vec![3], vec![2, 3], 1, e.clone()),
            (2, vec![3], vec![1, 3], 2, e.clone()),
            (3, vec![2], vec![1, 2], 3, e.clone()),
        ],
    ];
    for tx in &mut want {
        tx.sort();
    }
    want.sort();
    if got != want {
        return Err(format!("plan differs:\n  got  {got:?}\n  want {want:?}"));
    }
    Ok(format!("{} transmissions, total load {}", plan.len(), plan.total_load))
}

fn oracle_equivalence() -> Outcome {
    let mut points = 0usize;
    let mut demands = 0usize;
    for (n, k) in grid_systems() {
        for m in quarters(n) {
            demands += check_instance(&Instance::Equal { n, k, m: m.clone() }, DemandMode::Distinct)?;
            points += 1;
            for l in 1..k {
                for mhat in quarters(n).into_iter().filter(|mh| *mh >= m) {
                    let cfg = UnequalConfig::new(n, k, l, mhat, m.clone()).map_err(|e| e.to_string())?;
                    demands += check_instance(&Instance::Proposed(cfg), DemandMode::Distinct)?;
                    points += 1;
                }
            }
        }
    }
    Ok(format!("{points} points, {demands} demand vectors"))
}

fn exhaustive_decoding() -> Outcome {
    let equal: Vec<Rational> = vec![int(0), rat(1, 2), int(1), rat(3, 2), int(2), rat(11, 4), int(4)];
    let proposed: Vec<(usize, Rational, Rational)> = vec![
        (3, int(2), int(1)),
        (1, int(3), rat(1, 2)),
        (2, rat(5, 2), rat(3, 4)),
        (3, int(4), int(1)),
        (2, int(2), int(2)),
        (1, rat(7, 4), int(0)),
        (3, rat(13, 4), rat(9, 4)),
    ];
    let mut runs = 0;
    for m in &equal {
        runs += check_instance(&Instance::Equal { n: 4, k: 4, m: m.clone() }, DemandMode::Exhaustive)?;
    }
    for (l, mhat, m) in &proposed {
        let cfg = UnequalConfig::new(4, 4, *l, mhat.clone(), m.clone()).map_err(|e| e.to_string())?;
        runs += check_instance(&Instance::Proposed(cfg), DemandMode::Exhaustive)?;
    }
    Ok(format!("{} equal + {} proposed cache points, {runs} demand vectors", equal.len(), proposed.len()))
}

fn per_user(view: &BTreeMap<(usize, UserSet), Rational>, user: usize) -> BTreeMap<(usize, UserSet), Rational> {
    view.iter().filter(|((_, h), _)| h.contains(user)).map(|(key, len)| (key.clone(), len.clone())).collect()
}

fn merge_equivalence() -> Outcome {
    let mut cases = 0;
    for k in 1..=5 {
        for n in k..=5 {
            for t in 0..k {
                let base = man_placement(n, k, t, Layer::Alpha, &int(1));
                let refined = refine_placement(&base, n, k, t).map_err(|e| format!("({n},{k},{t}): {e}"))?;
                let direct = man_placement(n, k, t + 1, Layer::Alpha, &int(1));
                let got = merged_view(&refined);
                let want = merged_view(&direct);
                for user in 1..=k {
                    if per_user(&got, user) != per_user(&want, user) {
                        return Err(format!("(N,K,t) = ({n},{k},{t}): user {user} contents differ"));
                    }
                    if refined.cached_length(user) != direct.cached_length(user) {
                        return Err(format!("(N,K,t) = ({n},{k},{t}): user {user} cache size differs"));
                    }
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (N,K,t) cases"))
}

fn degenerate_limits() -> Outcome {
    let mut checks = 0;
    let mut boundaries = 0;
    for (n, k) in grid_systems() {
        let nq = int(n as i64);
        let r = |m: &Rational| rate_eq(n, k, m).map_err(|e| e.to_string());
        if r(&nq)? != int(0) || r(&int(0))? != int(k as i64) {
            return Err(format!("endpoint identity fails at (N,K) = ({n},{k})"));
        }
        for l in 1..k {
            for m in quarters(n) {
                let same = UnequalConfig::new(n, k, l, m.clone(), m.clone()).map_err(|e| e.to_string())?;
                if rate_ueq(&same).map_err(|e| e.to_string())?.rate != r(&m)? {
                    return Err(format!("rate_ueq({n},{k},{l},{m},{m}) != rate_eq"));
                }
                checks += 1;

                // Phi is the larger cache at which M' reaches N; both scenario
                // formulas must agree there.
                let top = UnequalConfig::new(n, k, l, nq.clone(), m.clone()).map_err(|e| e.to_string())?;
                let params = unequal_params(&top).map_err(|e| e.to_string())?;
                let Some(phi) = params.phi.clone() else { continue };
                if phi < m || phi > nq {
                    continue;
                }
                let at = UnequalConfig::new(n, k, l, phi.clone(), m.clone()).map_err(|e| e.to_string())?;
                let at_params = unequal_params(&at).map_err(|e| e.to_string())?;
                let s1 = rate_ueq(&at).map_err(|e| e.to_string())?.rate;
                let s2 = params.scenario2_rate(l, &int(1)).map_err(|e| e.to_string())?;
                if at_params.mprime.as_ref() != Some(&nq) || at_params.scenario != Scenario::One || s1 != s2 {
                    return Err(format!("discontinuity at ({n},{k},{l},Mhat={phi},M={m}): {s1} vs {s2}"));
                }
                boundaries += 1;
            }
        }
    }
    Ok(format!("{checks} equal-limit points, {boundaries} scenario boundaries"))
}

fn scheme_ordering() -> Outcome {
    let mut worst_gap: Option<Rational> = None;
    let mut samples = 0;
    for q in 0..=20 {
        let m = rat(q, 6);
        let cfg = UnequalConfig::new(10, 4, 2, &m * int(3), m.clone()).map_err(|e| e.to_string())?;
        let ours = rate_ueq(&cfg).map_err(|e| e.to_string())?.rate;
        let baseline = scheme1_for(&cfg, 64).map_err(|e| e.to_string())?.rate;
        if ours > baseline {
            return Err(format!("M = {m}: proposed {ours} > scheme1 {baseline}"));
        }
        let gap = baseline - ours;
        if worst_gap.as_ref().is_none_or(|g| gap > *g) {
            worst_gap = Some(gap);
        }
        samples += 1;
    }
    let widest = worst_gap.map(|g| format!("{:.4}", coded_caching::combinatorics::to_f64(&g))).unwrap_or_default();
    Ok(format!("{samples} points, widest margin {widest}"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "worked-example rates are exact",
            budget: Duration::from_secs(1),
            run: worked_example,
        },
        Criterion {
            id: 2,
            name: "worked-example delivery structure",
            budget: Duration::from_secs(1),
            run: delivery_structure,
        },
        Criterion {
            id: 3,
            name: "simulated worst-case load equals formula on grid",
            budget: Duration::from_secs(600),
            run: oracle_equivalence,
        },
        Criterion {
            id: 4,
            name: "exhaustive demands decode for (4,4)",
            budget: Duration::from_secs(120),
            run: exhaustive_decoding,
        },
        Criterion {
            id: 5,
            name: "refined placement merges into next placement",
            budget: Duration::from_secs(60),
            run: merge_equivalence,
        },
        Criterion {
            id: 6,
            name: "degenerate limits and scenario continuity",
            budget: Duration::from_secs(60),
            run: degenerate_limits,
        },
        Criterion {
            id: 7,
            name: "proposed rate never above layered baseline",
            budget: Duration::from_secs(300),
            run: scheme_ordering,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; took {elapsed:.1?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {} ({detail}; {elapsed:.1?})", c.id, c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {} ({detail})", c.id, c.name);
            }
        }
    }
    println!(
        "NOTE criterion 8: factor against the optimisation-based scheme is not asserted; \
         it needs externally computed rates, which `sweep --external-rates` compares against"
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
