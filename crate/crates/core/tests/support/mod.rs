//! Shared by the integration tests and the acceptance binary: an evaluator
//! written straight from the level rules, a progression simulator that does
//! not share code with the engine, and seeded trail/history generators.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use trailkit_core::engine::LevelStatus;
use trailkit_core::trails::{EvaluationConfig, Level, TrailState};
use trailkit_core::{AccountId, ActivityId, Category, ResultEvent, Trail, TrailId, TrailProgress};

pub const STUDENT: AccountId = AccountId(1);

/// Per configured category: (success value, minimum, achieved); plus the
/// level outcome.
pub type OracleVerdict = (Vec<(Category, u32, u32, bool)>, bool);

/// Counts, for each configured category, the succeeded activities whose
/// selection contains it, then ANDs the comparisons.
pub fn oracle_verdict(level: &Level, succeeded: &BTreeSet<ActivityId>) -> OracleVerdict {
    let mut rows = Vec::new();
    let mut all_objectives_achieved = true;
    for (&category, &minimum) in &level.config.thresholds {
        let mut success_value = 0;
        for activity in &level.activity_ids {
            if !succeeded.contains(activity) {
                continue;
            }
            if let Some(selected) = level.config.selections.get(activity) {
                if selected.contains(&category) {
                    success_value += 1;
                }
            }
        }
        let achieved = success_value >= minimum;
        if !achieved {
            all_objectives_achieved = false;
        }
        rows.push((category, success_value, minimum, achieved));
    }
    (rows, all_objectives_achieved)
}

/// Progression modelled as a cursor over the levels: results for levels
/// past the cursor are dropped, successes at or below it are remembered, and
/// the cursor moves while the level under it is satisfied.
pub fn oracle_progress(trail: &Trail, history: &[(ActivityId, bool)]) -> TrailProgress {
    let n = trail.levels.len();
    let mut done: Vec<BTreeSet<ActivityId>> = vec![BTreeSet::new(); n];
    let mut cursor = 0;
    let settle = |cursor: &mut usize, done: &Vec<BTreeSet<ActivityId>>| {
        while *cursor < n && oracle_verdict(&trail.levels[*cursor], &done[*cursor]).1 {
            *cursor += 1;
        }
    };
    settle(&mut cursor, &done);
    for &(activity, success) in history {
        let Some(at) = trail.levels.iter().position(|l| l.activity_ids.contains(&activity)) else {
            continue;
        };
        if at > cursor || !success {
            continue;
        }
        done[at].insert(activity);
        if at == cursor {
            settle(&mut cursor, &done);
        }
    }
    let level_status = (0..n)
        .map(|i| match i.cmp(&cursor) {
            std::cmp::Ordering::Less => LevelStatus::Completed,
            std::cmp::Ordering::Equal => LevelStatus::InProgress,
            std::cmp::Ordering::Greater => LevelStatus::Locked,
        })
        .collect();
    TrailProgress {
        student: STUDENT,
        trail: trail.id,
        level_status,
        succeeded_activities: done,
        trail_complete: cursor == n,
    }
}

/// Limits for [`random_trail`].
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_levels: usize,
    pub max_activities: usize,
    pub max_categories: usize,
    /// Size of the category pool the activities draw from; small pools make
    /// selections overlap.
    pub pool: usize,
}

pub const SMALL: Shape = Shape {
    max_levels: 3,
    max_activities: 3,
    max_categories: 2,
    pool: 4,
};

/// A published trail with legal thresholds: every selected category has a
/// minimum in `0..=coverage`, and nothing else does.
pub fn random_trail<R: Rng>(rng: &mut R, id: u64, shape: Shape) -> Trail {
    let mut pool: Vec<Category> = Category::ALL.to_vec();
    pool.shuffle(rng);
    pool.truncate(shape.pool);
    let mut next_activity = id * 100 + 1;
    let levels = (1..=rng.random_range(1..=shape.max_levels))
        .map(|index| {
            let mut activity_ids = BTreeSet::new();
            let mut selections = BTreeMap::new();
            for _ in 0..rng.random_range(1..=shape.max_activities) {
                let a = ActivityId(next_activity);
                next_activity += 1;
                activity_ids.insert(a);
                let k = rng.random_range(0..=shape.max_categories);
                let cats: BTreeSet<Category> = pool.choose_multiple(rng, k).copied().collect();
                if !cats.is_empty() {
                    selections.insert(a, cats);
                }
            }
            let mut config = EvaluationConfig {
                selections,
                thresholds: BTreeMap::new(),
            };
            for c in config.selected_categories() {
                let cover = config.coverage(c);
                config.thresholds.insert(c, rng.random_range(0..=cover));
            }
            Level {
                index,
                activity_ids,
                config,
            }
        })
        .collect();
    Trail {
        id: TrailId(id),
        name: format!("generated {id}"),
        description: String::new(),
        author_id: AccountId(2),
        levels,
        state: TrailState::Published,
        assignments: Vec::new(),
    }
}

/// Every legal threshold map for the level's selections.
pub fn threshold_grid(config: &EvaluationConfig) -> Vec<BTreeMap<Category, u32>> {
    let mut grid = vec![BTreeMap::new()];
    for c in config.selected_categories() {
        let cover = config.coverage(c);
        grid = grid
            .into_iter()
            .flat_map(|m| {
                (0..=cover).map(move |t| {
                    let mut m = m.clone();
                    m.insert(c, t);
                    m
                })
            })
            .collect();
    }
    grid
}

/// All subsets of a small set.
pub fn subsets(items: &BTreeSet<ActivityId>) -> Vec<BTreeSet<ActivityId>> {
    let items: Vec<_> = items.iter().copied().collect();
    (0..1u32 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| *a)
                .collect()
        })
        .collect()
}

/// Random results over the trail's activities, with the odd unknown id.
pub fn random_history<R: Rng>(rng: &mut R, trail: &Trail, len: usize) -> Vec<(ActivityId, bool)> {
    let all: Vec<ActivityId> = trail
        .levels
        .iter()
        .flat_map(|l| l.activity_ids.iter().copied())
        .collect();
    (0..len)
        .map(|_| {
            let a = if rng.random_bool(0.05) {
                ActivityId(999_999)
            } else {
                *all.choose(rng).expect("levels are non-empty")
            };
            (a, rng.random_bool(0.6))
        })
        .collect()
}

pub fn at(seq: usize) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 12, 0, 0).unwrap() + chrono::Duration::seconds(seq as i64)
}

pub fn events(trail: &Trail, history: &[(ActivityId, bool)]) -> Vec<ResultEvent> {
    history
        .iter()
        .enumerate()
        .map(|(i, &(activity, success))| ResultEvent {
            student: STUDENT,
            trail: trail.id,
            activity,
            success,
            received_at: at(i),
            late: false,
        })
        .collect()
}

/// Progress with the given per-level success sets and statuses left as
/// the caller wants them; only the sets matter to evaluation.
pub fn progress_with(trail: &Trail, succeeded: Vec<BTreeSet<ActivityId>>) -> TrailProgress {
    TrailProgress {
        student: STUDENT,
        trail: trail.id,
        level_status: vec![LevelStatus::Locked; trail.levels.len()],
        succeeded_activities: succeeded,
        trail_complete: false,
    }
}

/// True when no level moved backwards between `before` and `after`.
pub fn no_demotion(before: &TrailProgress, after: &TrailProgress) -> bool {
    let rank = |s: LevelStatus| match s {
        LevelStatus::Locked => 0,
        LevelStatus::InProgress => 1,
        LevelStatus::Completed => 2,
    };
    before
        .level_status
        .iter()
        .zip(&after.level_status)
        .all(|(b, a)| rank(*a) >= rank(*b))
        && (!before.trail_complete || after.trail_complete)
}

// gateway helpers

use trailkit_core::fixtures::{self, Fixtures, FIXTURE_PASSWORD};
use trailkit_core::gateway::Method;
use trailkit_core::service::system_clock;
use trailkit_core::{Gateway, Portal, Request, Response, Role, Storage};

pub fn seeded_gateway(storage: Box<dyn Storage>) -> (Gateway, Fixtures) {
    let mut portal = Portal::open(storage, system_clock()).expect("store opens");
    let fx = fixtures::install(&mut portal).expect("fixtures install");
    (Gateway::new(portal), fx)
}

pub fn email_of(role: Role) -> &'static str {
    match role {
        Role::Admin => "admin@fixtures.local",
        Role::Developer => "dev1@email.com",
        Role::Mediator => "teste5@email.com",
        Role::Student => "aluno1@email.com",
    }
}

pub fn login(gw: &Gateway, email: &str, password: &str) -> Response {
    gw.dispatch(
        &Request::new(Method::Post, "/sessions")
            .json(&serde_json::json!({ "email": email, "password": password })),
    )
}

pub fn token(gw: &Gateway, role: Role) -> String {
    let resp = login(gw, email_of(role), FIXTURE_PASSWORD);
    assert_eq!(resp.status, 201, "{}", String::from_utf8_lossy(&resp.body));
    resp.json_value()["token"].as_str().expect("token").to_owned()
}

/// Who may call what, written out by page area: the public pages, the
/// developer registration area, the admin moderation area, the mediator
/// trail and class area, and the student trail area. Profile export is
/// open to every signed-in user.
pub struct Cell {
    pub method: Method,
    pub path: fn(&Fixtures) -> String,
    /// `None` for public endpoints.
    pub roles: Option<&'static [Role]>,
}

const ALL_ROLES: &[Role] = &[Role::Mediator, Role::Student, Role::Developer, Role::Admin];

pub const ROLE_MATRIX: &[Cell] = &[
    Cell { method: Method::Get, path: |_| "/taxonomy".into(), roles: None },
    Cell { method: Method::Get, path: |_| "/openapi.json".into(), roles: None },
    Cell { method: Method::Post, path: |_| "/users".into(), roles: None },
    Cell { method: Method::Post, path: |_| "/sessions".into(), roles: None },
    Cell { method: Method::Post, path: |_| "/activities".into(), roles: Some(&[Role::Developer]) },
    Cell { method: Method::Delete, path: |f| format!("/activities/{}", f.simcec.0), roles: Some(&[Role::Developer]) },
    Cell { method: Method::Post, path: |f| format!("/activities/{}/moderation", f.simcec.0), roles: Some(&[Role::Admin]) },
    Cell { method: Method::Post, path: |_| "/admin/recovery".into(), roles: Some(&[Role::Admin]) },
    Cell { method: Method::Get, path: |_| "/activities".into(), roles: Some(ALL_ROLES) },
    Cell { method: Method::Get, path: |f| format!("/activities/{}/dublincore", f.simcec.0), roles: Some(ALL_ROLES) },
    Cell { method: Method::Get, path: |f| format!("/activities/{}/package", f.simcec.0), roles: Some(ALL_ROLES) },
    Cell { method: Method::Get, path: |_| "/me/export".into(), roles: Some(ALL_ROLES) },
    Cell { method: Method::Get, path: |_| "/classes".into(), roles: Some(&[Role::Mediator, Role::Student]) },
    Cell { method: Method::Post, path: |_| "/classes".into(), roles: Some(&[Role::Mediator]) },
    Cell { method: Method::Patch, path: |f| format!("/classes/{}", f.class.0), roles: Some(&[Role::Mediator]) },
    Cell { method: Method::Delete, path: |f| format!("/classes/{}", f.class.0), roles: Some(&[Role::Mediator]) },
    Cell { method: Method::Get, path: |_| "/trails".into(), roles: Some(&[Role::Mediator, Role::Student]) },
    Cell { method: Method::Post, path: |_| "/trails".into(), roles: Some(&[Role::Mediator]) },
    Cell { method: Method::Put, path: |f| format!("/trails/{}/levels", f.two_level_trail.0), roles: Some(&[Role::Mediator]) },
    Cell { method: Method::Post, path: |f| format!("/trails/{}/assignments", f.two_level_trail.0), roles: Some(&[Role::Mediator]) },
    Cell { method: Method::Put, path: |f| format!("/trails/{}/grades/{}", f.two_level_trail.0, f.student.0), roles: Some(&[Role::Mediator]) },
    Cell { method: Method::Get, path: |f| format!("/trails/{}/view", f.two_level_trail.0), roles: Some(&[Role::Student]) },
    Cell { method: Method::Post, path: |_| "/results".into(), roles: Some(&[Role::Student]) },
    Cell { method: Method::Get, path: |f| format!("/progress/{}", f.two_level_trail.0), roles: Some(&[Role::Student]) },
];

/// What one matrix cell did.
#[derive(Debug, PartialEq, Eq)]
pub enum Gate {
    /// Refused at the gate (401 or 403 FORBIDDEN_ROLE).
    Refused(u16),
    /// Reached the handler; the status is whatever the handler returned.
    Passed(u16),
}

pub fn gate_of(resp: &Response) -> Gate {
    let code = resp.json_value()["error"]["code"].as_str().map(str::to_owned);
    match (resp.status, code.as_deref()) {
        (401, Some("UNAUTHENTICATED")) => Gate::Refused(401),
        (403, Some("FORBIDDEN_ROLE")) => Gate::Refused(403),
        (s, _) => Gate::Passed(s),
    }
}

/// Runs every (caller, endpoint) pair against fresh fixtures from
/// `store` and returns the cells that disagree with [`ROLE_MATRIX`].
pub fn role_matrix_deviations(mut store: impl FnMut() -> Box<dyn Storage>) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut deviations = Vec::new();
    let callers: Vec<Option<Role>> = std::iter::once(None).chain(Role::ALL.map(Some)).collect();
    for cell in ROLE_MATRIX {
        for caller in &callers {
            let (gw, fx) = seeded_gateway(store());
            let path = (cell.path)(&fx);
            let mut req = Request::new(cell.method, &path);
            if let Some(role) = caller {
                req = req.bearer(&token(&gw, *role));
            }
            let got = gate_of(&gw.dispatch(&req));
            let allowed = match (cell.roles, caller) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(roles), Some(r)) => roles.contains(r),
            };
            let ok = match (&got, allowed, caller) {
                (Gate::Passed(s), true, _) => *s != 404 && *s != 405,
                (Gate::Refused(401), false, None) => true,
                (Gate::Refused(403), false, Some(_)) => true,
                _ => false,
            };
            checked += 1;
            if !ok {
                deviations.push(format!("{} {} as {:?}: {:?}", cell.method.as_str(), path, caller, got));
            }
        }
    }
    (checked, deviations)
}
