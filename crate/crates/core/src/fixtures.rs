//! Seed data: a two-level trail over SIMCEC and SIMTAMI, and a three-level
//! trail with 4/3/2 activities per level.
//!
//! All fixture accounts share [`FIXTURE_PASSWORD`].

use crate::accounts::{Role, UserProfile};
use crate::catalog::{ActivityDraft, ActivityKind, Decision};
use crate::ids::{AccountId, ActivityId, ClassId, TrailId};
use crate::service::{Portal, PortalResult};
use crate::taxonomy::{Category, Domain, Selector};
use crate::trails::{LevelSpec, TrailDocument};

pub const FIXTURE_PASSWORD: &str = "trailkit-fixture";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fixtures {
    pub admin: AccountId,
    pub developer: AccountId,
    pub mediator: AccountId,
    pub student: AccountId,
    pub class: ClassId,
    pub simcec: ActivityId,
    pub simtami: ActivityId,
    /// Two levels: SIMCEC, then SIMTAMI.
    pub two_level_trail: TrailId,
    /// Three levels of 4, 3 and 2 activities.
    pub three_level_trail: TrailId,
    pub three_level_activities: [ActivityId; 9],
}

fn profile(given: &str, family: &str, email: &str) -> UserProfile {
    UserProfile {
        given_name: given.into(),
        family_name: family.into(),
        email: email.into(),
        institution_name: "XXX".into(),
        institution_acronym: "XX".into(),
        course: "XXXXX".into(),
    }
}

pub fn aluno1_profile() -> UserProfile {
    profile("Aluno1", "Sobrenome1", "aluno1@email.com")
}

fn draft(name: &str, description: &str, area: &str, kind: ActivityKind, objectives: Vec<Selector>) -> ActivityDraft {
    ActivityDraft {
        name: Some(name.into()),
        description: Some(description.into()),
        area: Some(area.into()),
        kind: Some(kind),
        format: Some("Unity Web Player".into()),
        language: Some("pt-BR".into()),
        license_notes: Some("Uso educacional".into()),
        objectives,
        image_ref: Some(format!("{}.png", name.to_lowercase())),
    }
}

fn approved(portal: &mut Portal, dev: AccountId, admin: AccountId, d: ActivityDraft) -> PortalResult<ActivityId> {
    let package = format!("package:{}", d.name.as_deref().unwrap_or_default());
    let id = portal.submit_activity(dev, d, package.as_bytes())?.activity.id;
    portal.moderate_activity(admin, id, Decision::Approved, None)?;
    Ok(id)
}

pub fn simcec_draft() -> ActivityDraft {
    draft(
        "SIMCEC",
        "O SIMCEC (Simulador Colaborativo para Treinamento de Equipes Cirúrgicas) tem como \
         objetivo principal auxiliar no processo de educação e avaliação de estudantes em nível \
         de graduação e técnico de cursos de saúde a respeito dos aspectos básicos presentes nos \
         procedimentos cirúrgicos.",
        "odontologia",
        ActivityKind::SeriousGame,
        vec![Domain::Cognitive.into(), Domain::Psychomotor.into()],
    )
}

pub fn simtami_draft() -> ActivityDraft {
    draft(
        "SIMTAMI",
        "Simulador de Treinamento da Administração de Medicamentos Injetáveis",
        "saúde",
        ActivityKind::VirtualEnvironment,
        vec![
            Domain::Cognitive.into(),
            Domain::Affective.into(),
            Domain::Psychomotor.into(),
        ],
    )
}

/// Level 1: SIMCEC evaluated on every cognitive and psychomotor category,
/// minimum 1 each. Level 2: SIMTAMI on all three domains, minimum 1 each.
pub fn two_level_document(simcec: ActivityId, simtami: ActivityId) -> TrailDocument {
    let both: Vec<Selector> = vec![Domain::Cognitive.into(), Domain::Psychomotor.into()];
    let all: Vec<Selector> = Domain::ALL.into_iter().map(Selector::from).collect();
    TrailDocument {
        name: "Trilha com dois níveis".into(),
        description: "descrição de trilha com dois níveis.".into(),
        levels: vec![
            LevelSpec {
                activities: vec![simcec],
                selections: [(simcec, both.clone())].into(),
                thresholds: both.iter().map(|&s| (s, 1)).collect(),
            },
            LevelSpec {
                activities: vec![simtami],
                selections: [(simtami, all.clone())].into(),
                thresholds: all.iter().map(|&s| (s, 1)).collect(),
            },
        ],
    }
}

/// Three levels over nine activities. Level 1 needs any three of four
/// `remember` activities and one of two `imitation`; level 2 needs two of
/// three `apply` plus the single `valuing` activity; level 3 needs both
/// `create` activities.
pub fn three_level_document(a: [ActivityId; 9]) -> TrailDocument {
    use Category::*;
    let sel = |id: ActivityId, cats: &[Category]| (id, cats.iter().map(|&c| Selector::from(c)).collect::<Vec<_>>());
    TrailDocument {
        name: "Trilha com três níveis".into(),
        description: "Quatro, três e duas atividades por nível.".into(),
        levels: vec![
            LevelSpec {
                activities: a[0..4].to_vec(),
                selections: [
                    sel(a[0], &[Remember, Imitation]),
                    sel(a[1], &[Remember, Imitation]),
                    sel(a[2], &[Remember]),
                    sel(a[3], &[Remember]),
                ]
                .into(),
                thresholds: [(Remember.into(), 3), (Imitation.into(), 1)].into(),
            },
            LevelSpec {
                activities: a[4..7].to_vec(),
                selections: [
                    sel(a[4], &[Apply]),
                    sel(a[5], &[Apply]),
                    sel(a[6], &[Apply, Valuing]),
                ]
                .into(),
                thresholds: [(Apply.into(), 2), (Valuing.into(), 1)].into(),
            },
            LevelSpec {
                activities: a[7..9].to_vec(),
                selections: [sel(a[7], &[Create, Precision]), sel(a[8], &[Create])].into(),
                thresholds: [(Create.into(), 2), (Precision.into(), 0)].into(),
            },
        ],
    }
}

/// Installs both fixtures into an empty portal.
pub fn install(portal: &mut Portal) -> PortalResult<Fixtures> {
    let admin = portal
        .provision_admin(profile("Admin", "Portal", "admin@fixtures.local"), FIXTURE_PASSWORD)?
        .id;
    let developer = portal
        .register_user(profile("Dev1", "LabTEVE", "dev1@email.com"), Role::Developer, FIXTURE_PASSWORD)?
        .id;
    let mediator = portal
        .register_user(profile("Teste5", "", "teste5@email.com"), Role::Mediator, FIXTURE_PASSWORD)?
        .id;
    let student = portal
        .register_user(aluno1_profile(), Role::Student, FIXTURE_PASSWORD)?
        .id;
    let class = portal
        .create_class(mediator, "Turma 01", "Turma de teste", [student].into())?
        .id;

    let simcec = approved(portal, developer, admin, simcec_draft())?;
    let simtami = approved(portal, developer, admin, simtami_draft())?;
    let two = portal.create_trail_from_document(mediator, &two_level_document(simcec, simtami))?;
    portal.assign_trail(mediator, two.id, class, None)?;

    use Category::*;
    let objectives: [&[Category]; 9] = [
        &[Remember, Imitation],
        &[Remember, Imitation],
        &[Remember, Understand],
        &[Remember],
        &[Apply],
        &[Apply, Analyze],
        &[Apply, Valuing],
        &[Create, Precision],
        &[Create],
    ];
    let mut ids = [ActivityId(0); 9];
    for (i, cats) in objectives.iter().enumerate() {
        let level = match i {
            0..=3 => 1,
            4..=6 => 2,
            _ => 3,
        };
        let d = draft(
            &format!("Atividade {}.{}", level, i + 1),
            "Atividade de exemplo",
            "saúde",
            if i % 2 == 0 { ActivityKind::SeriousGame } else { ActivityKind::VirtualEnvironment },
            cats.iter().map(|&c| Selector::from(c)).collect(),
        );
        ids[i] = approved(portal, developer, admin, d)?;
    }
    let three = portal.create_trail_from_document(mediator, &three_level_document(ids))?;
    portal.assign_trail(mediator, three.id, class, None)?;

    Ok(Fixtures {
        admin,
        developer,
        mediator,
        student,
        class,
        simcec,
        simtami,
        two_level_trail: two.id,
        three_level_trail: three.id,
        three_level_activities: ids,
    })
}
