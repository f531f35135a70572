//! Accounts with a single role each, their sessions, and classes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ids::{AccountId, ClassId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Mediator,
    Student,
    Developer,
    Admin,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Mediator, Role::Student, Role::Developer, Role::Admin];
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub given_name: String,
    pub family_name: String,
    pub email: String,
    #[serde(default)]
    pub institution_name: String,
    #[serde(default)]
    pub institution_acronym: String,
    #[serde(default)]
    pub course: String,
}

impl UserProfile {
    pub fn display_name(&self) -> String {
        match (self.given_name.trim(), self.family_name.trim()) {
            (g, "") => g.to_owned(),
            ("", f) => f.to_owned(),
            (g, f) => format!("{g} {f}"),
        }
    }
}

/// Salted SHA-256 credential digest. The plaintext is never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasswordDigest {
    salt: String,
    digest: String,
}

impl PasswordDigest {
    pub fn new(password: &str) -> Self {
        let mut salt = [0u8; 16];
        rand::rng().fill_bytes(&mut salt);
        let salt = hex::encode(salt);
        let digest = Self::compute(&salt, password);
        PasswordDigest { salt, digest }
    }

    fn compute(salt: &str, password: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(salt.as_bytes());
        hasher.update([0u8]);
        hasher.update(password.as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn verify(&self, password: &str) -> bool {
        let candidate = Self::compute(&self.salt, password);
        // Compare every byte regardless of where the first mismatch is.
        candidate
            .bytes()
            .zip(self.digest.bytes())
            .fold(candidate.len() == self.digest.len(), |ok, (a, b)| ok & (a == b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub id: AccountId,
    pub profile: UserProfile,
    pub role: Role,
    pub password_hash: PasswordDigest,
}

/// Identity of whoever is invoking an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caller {
    pub id: AccountId,
    pub role: Role,
}

impl From<&Account> for Caller {
    fn from(a: &Account) -> Self {
        Caller {
            id: a.id,
            role: a.role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Class {
    pub id: ClassId,
    pub name: String,
    pub description: String,
    pub mediator_id: AccountId,
    pub student_ids: BTreeSet<AccountId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassChanges {
    pub name: Option<String>,
    pub description: Option<String>,
    pub students: Option<BTreeSet<AccountId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub account_id: AccountId,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccountsError {
    #[error("email already registered")]
    DuplicateEmail,
    #[error("email must not be empty")]
    EmptyEmail,
    #[error("admin accounts cannot be self-registered")]
    AdminSelfRegistrationForbidden,
    #[error("invalid credentials")]
    InvalidCredentials,
    #[error("caller is not a mediator")]
    NotMediator,
    #[error("unknown student {0}")]
    UnknownStudent(AccountId),
    #[error("account {0} is not a student")]
    NonStudentMember(AccountId),
    #[error("class name must not be empty")]
    EmptyName,
    #[error("caller does not own the class")]
    NotOwner,
    #[error("class has trails in progress")]
    TrailsInProgress,
    #[error("unknown class {0}")]
    UnknownClass(ClassId),
    #[error("unknown user {0}")]
    UnknownUser(AccountId),
}

/// Accounts and classes. Sessions live in memory only.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Directory {
    accounts: BTreeMap<AccountId, Account>,
    classes: BTreeMap<ClassId, Class>,
    next_account: u64,
    next_class: u64,
    #[serde(skip)]
    sessions: HashMap<String, Session>,
}

impl Directory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_user(
        &mut self,
        profile: UserProfile,
        role: Role,
        password: &str,
    ) -> Result<&Account, AccountsError> {
        if role == Role::Admin {
            return Err(AccountsError::AdminSelfRegistrationForbidden);
        }
        self.insert_account(profile, role, password)
    }

    /// Admin accounts come from configuration, never from the public endpoint.
    pub fn provision_admin(
        &mut self,
        profile: UserProfile,
        password: &str,
    ) -> Result<&Account, AccountsError> {
        self.insert_account(profile, Role::Admin, password)
    }

    fn insert_account(
        &mut self,
        mut profile: UserProfile,
        role: Role,
        password: &str,
    ) -> Result<&Account, AccountsError> {
        profile.email = profile.email.trim().to_owned();
        if profile.email.is_empty() {
            return Err(AccountsError::EmptyEmail);
        }
        if self.find_by_email(&profile.email).is_some() {
            return Err(AccountsError::DuplicateEmail);
        }
        self.next_account += 1;
        let id = AccountId(self.next_account);
        let account = Account {
            id,
            profile,
            role,
            password_hash: PasswordDigest::new(password),
        };
        Ok(self.accounts.entry(id).or_insert(account))
    }

    pub fn find_by_email(&self, email: &str) -> Option<&Account> {
        let email = email.trim();
        self.accounts
            .values()
            .find(|a| a.profile.email.eq_ignore_ascii_case(email))
    }

    pub fn account(&self, id: AccountId) -> Option<&Account> {
        self.accounts.get(&id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn authenticate(&mut self, email: &str, password: &str) -> Result<Session, AccountsError> {
        let account = match self.find_by_email(email) {
            Some(a) => a,
            None => {
                // Burn the same hashing work as a real check.
                let _ = PasswordDigest::compute("0000", password);
                return Err(AccountsError::InvalidCredentials);
            }
        };
        if !account.password_hash.verify(password) {
            return Err(AccountsError::InvalidCredentials);
        }
        let mut raw = [0u8; 32];
        rand::rng().fill_bytes(&mut raw);
        let session = Session {
            token: hex::encode(raw),
            account_id: account.id,
            role: account.role,
        };
        self.sessions.insert(session.token.clone(), session.clone());
        Ok(session)
    }

    pub fn session(&self, token: &str) -> Option<&Session> {
        self.sessions.get(token)
    }

    pub fn create_class(
        &mut self,
        caller: Caller,
        name: &str,
        description: &str,
        students: BTreeSet<AccountId>,
    ) -> Result<&Class, AccountsError> {
        if caller.role != Role::Mediator {
            return Err(AccountsError::NotMediator);
        }
        let name = name.trim();
        if name.is_empty() {
            return Err(AccountsError::EmptyName);
        }
        self.check_students(&students)?;
        self.next_class += 1;
        let id = ClassId(self.next_class);
        let class = Class {
            id,
            name: name.to_owned(),
            description: description.to_owned(),
            mediator_id: caller.id,
            student_ids: students,
        };
        Ok(self.classes.entry(id).or_insert(class))
    }

    fn check_students(&self, students: &BTreeSet<AccountId>) -> Result<(), AccountsError> {
        for id in students {
            match self.accounts.get(id) {
                None => return Err(AccountsError::UnknownStudent(*id)),
                Some(a) if a.role != Role::Student => {
                    return Err(AccountsError::NonStudentMember(*id))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    fn owned_class(&self, caller: Caller, id: ClassId) -> Result<&Class, AccountsError> {
        let class = self
            .classes
            .get(&id)
            .ok_or(AccountsError::UnknownClass(id))?;
        if class.mediator_id != caller.id {
            return Err(AccountsError::NotOwner);
        }
        Ok(class)
    }

    pub fn update_class(
        &mut self,
        caller: Caller,
        id: ClassId,
        changes: ClassChanges,
    ) -> Result<&Class, AccountsError> {
        self.owned_class(caller, id)?;
        if let Some(name) = &changes.name {
            if name.trim().is_empty() {
                return Err(AccountsError::EmptyName);
            }
        }
        if let Some(students) = &changes.students {
            self.check_students(students)?;
        }
        let class = self.classes.get_mut(&id).expect("checked above");
        if let Some(name) = changes.name {
            class.name = name.trim().to_owned();
        }
        if let Some(description) = changes.description {
            class.description = description;
        }
        if let Some(students) = changes.students {
            class.student_ids = students;
        }
        Ok(class)
    }

    /// Deletes the class. Member accounts are untouched.
    pub fn remove_class(
        &mut self,
        caller: Caller,
        id: ClassId,
        in_progress: impl FnOnce(&Class) -> bool,
    ) -> Result<Class, AccountsError> {
        let class = self.owned_class(caller, id)?;
        if in_progress(class) {
            return Err(AccountsError::TrailsInProgress);
        }
        Ok(self.classes.remove(&id).expect("checked above"))
    }

    pub fn class(&self, id: ClassId) -> Option<&Class> {
        self.classes.get(&id)
    }

    pub fn classes(&self) -> impl Iterator<Item = &Class> {
        self.classes.values()
    }

    pub fn classes_of_student(&self, student: AccountId) -> impl Iterator<Item = &Class> {
        self.classes
            .values()
            .filter(move |c| c.student_ids.contains(&student))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(email: &str) -> UserProfile {
        UserProfile {
            given_name: "Aluno1".into(),
            family_name: "Sobrenome1".into(),
            email: email.into(),
            institution_name: "XXX".into(),
            institution_acronym: "XX".into(),
            course: "XXXXX".into(),
        }
    }

    fn mediator(dir: &mut Directory) -> Caller {
        let mut p = profile("teste5@email.com");
        p.given_name = "Teste5".into();
        Caller::from(dir.register_user(p, Role::Mediator, "pw").unwrap())
    }

    #[test]
    fn register_student_and_reject_duplicates() {
        let mut dir = Directory::new();
        let acc = dir
            .register_user(profile("aluno1@email.com"), Role::Student, "pw")
            .unwrap();
        assert_eq!(acc.role, Role::Student);
        assert_eq!(acc.profile.given_name, "Aluno1");
        assert_ne!(acc.password_hash.digest, "pw");
        assert_eq!(
            dir.register_user(profile("aluno1@email.com"), Role::Developer, "x")
                .unwrap_err(),
            AccountsError::DuplicateEmail
        );
        assert_eq!(
            dir.register_user(profile("root@email.com"), Role::Admin, "x")
                .unwrap_err(),
            AccountsError::AdminSelfRegistrationForbidden
        );
    }

    #[test]
    fn authenticate_paths() {
        let mut dir = Directory::new();
        dir.register_user(profile("aluno1@email.com"), Role::Student, "secret")
            .unwrap();
        let s = dir.authenticate("aluno1@email.com", "secret").unwrap();
        assert_eq!(s.role, Role::Student);
        assert_eq!(dir.session(&s.token).unwrap().account_id, s.account_id);
        let wrong = dir.authenticate("aluno1@email.com", "nope").unwrap_err();
        let ghost = dir.authenticate("ghost@email.com", "secret").unwrap_err();
        assert_eq!(wrong, ghost);
        assert_eq!(wrong.to_string(), ghost.to_string());
    }

    #[test]
    fn class_membership_rules() {
        let mut dir = Directory::new();
        let med = mediator(&mut dir);
        let student = dir
            .register_user(profile("aluno1@email.com"), Role::Student, "pw")
            .unwrap()
            .id;
        let dev = dir
            .register_user(profile("dev1@email.com"), Role::Developer, "pw")
            .unwrap()
            .id;
        let class = dir
            .create_class(med, "Turma 01", "desc", [student].into())
            .unwrap();
        assert_eq!(class.name, "Turma 01");
        assert!(dir.create_class(med, "T", "", BTreeSet::new()).is_ok());
        assert_eq!(
            dir.create_class(med, "T", "", [dev].into()).unwrap_err(),
            AccountsError::NonStudentMember(dev)
        );
        assert_eq!(
            dir.create_class(med, "T", "", [AccountId(999)].into())
                .unwrap_err(),
            AccountsError::UnknownStudent(AccountId(999))
        );
        let as_student = Caller {
            id: student,
            role: Role::Student,
        };
        assert_eq!(
            dir.create_class(as_student, "T", "", BTreeSet::new())
                .unwrap_err(),
            AccountsError::NotMediator
        );
    }

    #[test]
    fn update_and_remove_class() {
        let mut dir = Directory::new();
        let med = mediator(&mut dir);
        let student = dir
            .register_user(profile("aluno1@email.com"), Role::Student, "pw")
            .unwrap()
            .id;
        let id = dir
            .create_class(med, "Turma 01", "", [student].into())
            .unwrap()
            .id;
        let changes = ClassChanges {
            name: Some("Turma 02".into()),
            ..Default::default()
        };
        assert_eq!(dir.update_class(med, id, changes).unwrap().name, "Turma 02");
        assert_eq!(dir.classes().next().unwrap().name, "Turma 02");

        let other = {
            let mut p = profile("med2@email.com");
            p.given_name = "Other".into();
            Caller::from(dir.register_user(p, Role::Mediator, "pw").unwrap())
        };
        assert_eq!(
            dir.remove_class(other, id, |_| false).unwrap_err(),
            AccountsError::NotOwner
        );
        assert_eq!(
            dir.remove_class(med, id, |_| true).unwrap_err(),
            AccountsError::TrailsInProgress
        );
        dir.remove_class(med, id, |_| false).unwrap();
        assert!(dir.account(student).is_some());
        assert_eq!(
            dir.remove_class(med, id, |_| false).unwrap_err(),
            AccountsError::UnknownClass(id)
        );
    }

    #[test]
    fn directory_round_trips_without_sessions() {
        let mut dir = Directory::new();
        dir.register_user(profile("aluno1@email.com"), Role::Student, "pw")
            .unwrap();
        dir.authenticate("aluno1@email.com", "pw").unwrap();
        let json = serde_json::to_string(&dir).unwrap();
        let mut back: Directory = serde_json::from_str(&json).unwrap();
        assert!(back.sessions.is_empty());
        assert!(back.authenticate("aluno1@email.com", "pw").is_ok());
    }
}
