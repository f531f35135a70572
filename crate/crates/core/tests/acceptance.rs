//! One PASS/FAIL line per acceptance criterion, all on the file-backed
//! store. Exits non-zero when any criterion fails.

mod support;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use support::*;
use trailkit_core::engine::{self, LevelStatus, Overall, ProgressBook};
use trailkit_core::gateway::Method;
use trailkit_core::{ActivityId, FileStore, Request, Role, Storage, Trail, TrailProgress};

const SCENARIO_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const SUITE_BUDGET: Duration = Duration::from_secs(60);
const ORACLE_MIN_CASES: usize = 1_000;
const ORDER_FIXTURES: usize = 200;
const ORDER_PERMUTATIONS: usize = 20;
const MONOTONE_HISTORIES: usize = 1_000;
const SEED: u64 = 20_240_301;

type Outcome = Result<String, String>;

struct Store {
    dirs: Vec<tempfile::TempDir>,
}

impl Store {
    fn fresh(&mut self) -> Box<dyn Storage> {
        let dir = tempfile::tempdir().expect("temp dir");
        let store = FileStore::open(dir.path()).expect("file store");
        self.dirs.push(dir);
        Box::new(store)
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn two_level_scenario(store: &mut Store) -> Outcome {
    let started = Instant::now();
    let (gw, fx) = seeded_gateway(store.fresh());
    let t = token(&gw, Role::Student);
    let trail = fx.two_level_trail.0;
    let post = gw.dispatch(
        &Request::new(Method::Post, "/results")
            .bearer(&t)
            .json(&json!({"trail": trail, "activity": fx.simcec.0, "success": true})),
    );
    ensure(post.status == 200, || format!("POST /results gave {}", post.status))?;
    let view = gw
        .dispatch(&Request::new(Method::Get, &format!("/trails/{trail}/view")).bearer(&t))
        .json_value();
    let elapsed = started.elapsed();
    let got = json!({
        "statuses": [view["levels"][0]["status"], view["levels"][1]["status"]],
        "simcec_done": view["levels"][0]["activities"][0]["done"],
        "grade": view["grade"],
        "deadline": view["deadline"],
    });
    let want = json!({
        "statuses": ["Completed", "InProgress"],
        "simcec_done": true,
        "grade": "-",
        "deadline": "open",
    });
    ensure(got == want, || format!("got {got}"))?;
    ensure(elapsed < SCENARIO_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("[Completed, InProgress], done, grade \"-\", deadline open in {elapsed:?}"))
}

fn three_level_shape(store: &mut Store) -> Outcome {
    use LevelStatus::{Completed as C, InProgress as P, Locked as L};
    let (gw, fx) = seeded_gateway(store.fresh());
    let mut portal = gw.into_portal();
    let id = fx.three_level_trail;
    let sizes: Vec<usize> = portal.trail(id).unwrap().levels.iter().map(|l| l.activity_ids.len()).collect();
    ensure(sizes == [4, 3, 2], || format!("level sizes {sizes:?}"))?;
    let initial = portal.progress(fx.student, id).unwrap().level_status;
    ensure(initial == [P, L, L], || format!("initial {initial:?}"))?;

    let a = fx.three_level_activities;
    let walk = [
        (a[1], [P, L, L]),
        (a[3], [P, L, L]),
        (a[7], [P, L, L]),
        (a[2], [C, P, L]),
        (a[5], [C, P, L]),
        (a[6], [C, C, P]),
        (a[8], [C, C, P]),
        (a[7], [C, C, C]),
    ];
    for (step, (activity, want)) in walk.into_iter().enumerate() {
        let _ = portal.record_result(fx.student, id, activity, true);
        let now = portal.progress(fx.student, id).unwrap();
        ensure(now.level_status == want, || format!("step {step}: {:?}", now.level_status))?;
        // a level is Completed only if it and every earlier level evaluate complete
        for (i, s) in now.level_status.iter().enumerate() {
            let complete = (1..=i + 1).all(|l| {
                portal.evaluate_level(fx.student, id, l).unwrap().overall == Overall::LevelComplete
            });
            ensure(*s != C || complete, || format!("step {step}: level {} completed early", i + 1))?;
        }
    }
    let done = portal.progress(fx.student, id).unwrap();
    ensure(done.trail_complete, || "trail not complete".into())?;
    Ok("4/3/2 levels, [InProgress, Locked, Locked], completed in order".into())
}

fn verdict_of(trail: &Trail, level: usize, succeeded: &BTreeSet<ActivityId>) -> OracleVerdict {
    let mut sets = vec![BTreeSet::new(); trail.levels.len()];
    sets[level - 1] = succeeded.clone();
    let v = engine::evaluate_level(&progress_with(trail, sets), &trail.levels, level).unwrap();
    (
        v.categories.iter().map(|(c, r)| (*c, r.success_value, r.minimum, r.achieved)).collect(),
        v.overall == Overall::LevelComplete,
    )
}

fn oracle(rng: &mut ChaCha8Rng) -> Outcome {
    let started = Instant::now();
    let mut cases = 0;
    let mut trails = 0;
    while cases < ORACLE_MIN_CASES || trails < 300 {
        trails += 1;
        let mut trail = random_trail(rng, trails, SMALL);
        for li in 0..trail.levels.len() {
            for thresholds in threshold_grid(&trail.levels[li].config) {
                trail.levels[li].config.thresholds = thresholds;
                for subset in subsets(&trail.levels[li].activity_ids) {
                    let want = oracle_verdict(&trail.levels[li], &subset);
                    let got = verdict_of(&trail, li + 1, &subset);
                    ensure(got == want, || format!("trail {trails} level {}: {got:?} vs {want:?}", li + 1))?;
                    cases += 1;
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < ORACLE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} cases over {trails} trails agree in {elapsed:?}"))
}

fn order_independence(rng: &mut ChaCha8Rng) -> Outcome {
    let mut runs = 0;
    for f in 0..ORDER_FIXTURES {
        let trail = random_trail(rng, f as u64 + 1, SMALL);
        let blocks: Vec<Vec<(ActivityId, bool)>> = trail
            .levels
            .iter()
            .map(|l| {
                let ids: Vec<_> = l.activity_ids.iter().copied().collect();
                (0..rng.random_range(1..8))
                    .map(|_| (ids[rng.random_range(0..ids.len())], rng.random_bool(0.7)))
                    .collect()
            })
            .collect();
        let reference = engine::replay(STUDENT, &trail, &events(&trail, &blocks.concat())).unwrap();
        for _ in 0..ORDER_PERMUTATIONS {
            let mut shuffled = blocks.clone();
            for b in &mut shuffled {
                b.shuffle(rng);
            }
            let got = engine::replay(STUDENT, &trail, &events(&trail, &shuffled.concat())).unwrap();
            ensure(got == reference, || format!("fixture {f}: {got:?} vs {reference:?}"))?;
            runs += 1;
        }
    }
    Ok(format!("{ORDER_FIXTURES} fixtures x {ORDER_PERMUTATIONS} permutations, {runs} identical"))
}

/// Live processing of a history: the progress after each event and the book.
fn live(trail: &Trail, history: &[(ActivityId, bool)]) -> (ProgressBook, Vec<TrailProgress>) {
    let mut book = ProgressBook::new();
    book.init_progress(STUDENT, trail).unwrap();
    let mut steps = vec![book.get(STUDENT, trail.id).unwrap().clone()];
    for e in events(trail, history) {
        let _ = book.record_result(e, trail);
        steps.push(book.get(STUDENT, trail.id).unwrap().clone());
    }
    (book, steps)
}

fn histories(rng: &mut ChaCha8Rng) -> Vec<(Trail, Vec<(ActivityId, bool)>)> {
    (0..MONOTONE_HISTORIES)
        .map(|i| {
            let trail = random_trail(rng, i as u64 + 1, SMALL);
            let len = rng.random_range(0..30);
            let h = random_history(rng, &trail, len);
            (trail, h)
        })
        .collect()
}

fn monotonicity(data: &[(Trail, Vec<(ActivityId, bool)>)], rng: &mut ChaCha8Rng) -> Outcome {
    let mut transitions = 0;
    for (i, (trail, history)) in data.iter().enumerate() {
        // every prefix is an accepted history; extend each by one more event
        let (_, steps) = live(trail, history);
        for pair in steps.windows(2) {
            ensure(no_demotion(&pair[0], &pair[1]), || format!("history {i}: {:?} -> {:?}", pair[0], pair[1]))?;
            transitions += 1;
        }
        let mut extended = history.clone();
        extended.extend(random_history(rng, trail, 1));
        let (_, more) = live(trail, &extended);
        let (a, b) = (&more[more.len() - 2], &more[more.len() - 1]);
        ensure(no_demotion(a, b), || format!("history {i} extension"))?;
        transitions += 1;
    }
    Ok(format!("{} histories, {transitions} appended events, no demotion", data.len()))
}

fn replay_determinism(data: &[(Trail, Vec<(ActivityId, bool)>)], store: &mut Store) -> Outcome {
    for (i, (trail, history)) in data.iter().enumerate() {
        let (book, _) = live(trail, history);
        let live_now = book.get(STUDENT, trail.id).unwrap();
        let replayed = engine::replay(STUDENT, trail, book.events()).unwrap();
        ensure(&replayed == live_now, || format!("history {i}: replay differs"))?;
        let model = oracle_progress(trail, history);
        ensure(&model == live_now, || format!("history {i}: live differs from the cursor model"))?;
    }
    // and through the file store: reopen and recover
    let dir = tempfile::tempdir().unwrap();
    let (gw, fx) = seeded_gateway(Box::new(FileStore::open(dir.path()).unwrap()));
    let mut portal = gw.into_portal();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0xF11E);
    let all: Vec<ActivityId> = fx.three_level_activities.to_vec();
    for _ in 0..60 {
        let a = all[rng.random_range(0..all.len())];
        let _ = portal.record_result(fx.student, fx.three_level_trail, a, rng.random_bool(0.6));
    }
    let before: Vec<TrailProgress> = portal.progress_records().cloned().collect();
    drop(portal);
    let mut reopened = trailkit_core::Portal::open(
        Box::new(FileStore::open(dir.path()).unwrap()),
        trailkit_core::service::system_clock(),
    )
    .map_err(|e| e.to_string())?;
    let report = reopened.snapshot_and_recover().map_err(|e| e.to_string())?;
    let after: Vec<TrailProgress> = reopened.progress_records().cloned().collect();
    ensure(before == after, || "reopened store differs".into())?;
    store.dirs.push(dir);
    Ok(format!(
        "{} generated histories plus a {}-event file log replay exactly",
        data.len(),
        report.events
    ))
}

const GOLDEN_HCARD: &str = include_str!("golden/hcard_aluno1.json");

fn microformats(store: &mut Store) -> Outcome {
    let (gw, fx) = seeded_gateway(store.fresh());
    let mut portal = gw.into_portal();
    let card = portal.export_hcard(fx.student).unwrap().to_canonical_json();
    ensure(card == GOLDEN_HCARD, || format!("h-card bytes differ: {card}"))?;

    portal.record_result(fx.student, fx.two_level_trail, fx.simcec, true).unwrap();
    portal.set_grade(fx.mediator, fx.two_level_trail, fx.student, "8").unwrap();
    let parse = |s: String| -> Value { serde_json::from_str(&s).unwrap() };
    let card = parse(card);
    let resume = parse(portal.export_hresume(fx.student).unwrap().to_canonical_json());
    let list = parse(
        portal
            .activity_list_review(fx.mediator, &Default::default())
            .unwrap()
            .to_canonical_json(),
    );
    let kinds = |v: &Value, p: &str| -> Vec<Value> {
        v["properties"][p].as_array().map(|a| a.iter().map(|i| i["type"].clone()).collect()).unwrap_or_default()
    };
    let events = resume["properties"]["experience"].as_array().cloned().unwrap_or_default();
    let graded: Vec<&Value> = events.iter().filter(|e| e["properties"]["review"].is_array()).collect();
    let rules = [
        ("institution h-card in h-card", kinds(&card, "org") == [json!(["h-card"])]),
        ("h-card in h-resume", kinds(&resume, "contact") == [json!(["h-card"])]),
        (
            "h-event per trail in h-resume",
            events.len() == 2 && events.iter().all(|e| e["type"] == json!(["h-event"])),
        ),
        (
            "grade h-review in h-event",
            graded.len() == 1
                && kinds(graded[0], "review") == [json!(["h-review"])]
                && graded[0]["properties"]["review"][0]["properties"]["rating"] == json!(["8"]),
        ),
        (
            "dublincore in list h-review",
            list["type"] == json!(["h-review"])
                && !kinds(&list, "item").is_empty()
                && kinds(&list, "item").iter().all(|t| *t == json!(["dublincore"])),
        ),
    ];
    for (name, ok) in rules {
        ensure(ok, || format!("nesting rule failed: {name}"))?;
    }
    Ok("golden h-card byte-identical; 5/5 nesting rules hold".into())
}

fn role_matrix(store: &mut Store) -> Outcome {
    let (checked, deviations) = role_matrix_deviations(|| store.fresh());
    ensure(deviations.is_empty(), || format!("{} deviations: {:?}", deviations.len(), deviations))?;
    Ok(format!("{checked} (caller, endpoint) cells, 0 deviations"))
}

fn main() {
    let suite_started = Instant::now();
    let mut store = Store { dirs: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = 0;
    let mut report = |name: &str, outcome: std::thread::Result<Outcome>| {
        let line = match outcome {
            Ok(Ok(detail)) => format!("PASS {name}: {detail}"),
            Ok(Err(why)) => format!("FAIL {name}: {why}"),
            Err(_) => format!("FAIL {name}: panicked"),
        };
        if line.starts_with("FAIL") {
            failures += 1;
        }
        println!("{line}");
    };

    let data = histories(&mut ChaCha8Rng::seed_from_u64(SEED + 1));
    report("two-level-scenario", catch_unwind(AssertUnwindSafe(|| two_level_scenario(&mut store))));
    report("three-level-shape", catch_unwind(AssertUnwindSafe(|| three_level_shape(&mut store))));
    report("oracle-equivalence", catch_unwind(AssertUnwindSafe(|| oracle(&mut rng))));
    report("order-independence", catch_unwind(AssertUnwindSafe(|| order_independence(&mut rng))));
    report("monotonicity", catch_unwind(AssertUnwindSafe(|| monotonicity(&data, &mut rng))));
    report("replay-determinism", catch_unwind(AssertUnwindSafe(|| replay_determinism(&data, &mut store))));
    report("microformat-golden", catch_unwind(AssertUnwindSafe(|| microformats(&mut store))));
    report("role-matrix", catch_unwind(AssertUnwindSafe(|| role_matrix(&mut store))));

    let elapsed = suite_started.elapsed();
    let within = elapsed < SUITE_BUDGET;
    report(
        "file-store-suite-time",
        Ok(if within {
            Ok(format!("all criteria on the file store in {elapsed:?}"))
        } else {
            Err(format!("took {elapsed:?}"))
        }),
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
