//! Certificates: named inequalities with enclosed sides and verdicts.

use serde::{Deserialize, Serialize};

use crate::num::{Bounds, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">")]
    Gt,
}

impl Relation {
    /// Sound verdict: the relation must hold for every point of both
    /// enclosures.
    pub fn holds(self, lhs: &Bounds, rhs: &Bounds) -> bool {
        match self {
            Relation::Lt => lhs.hi < rhs.lo,
            Relation::Le => lhs.hi <= rhs.lo,
            Relation::Gt => lhs.lo > rhs.hi,
            Relation::Eq => lhs.is_exact() && lhs == rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub relation: Relation,
    pub lhs: Bounds,
    pub rhs: Bounds,
    pub pass: bool,
    /// How the left side was obtained.
    pub reduction: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub subject: String,
    pub entries: Vec<Entry>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub children: Vec<Certificate>,
}

impl Certificate {
    pub fn new(subject: impl Into<String>) -> Certificate {
        Certificate { subject: subject.into(), ..Default::default() }
    }

    pub fn check(
        &mut self,
        name: impl Into<String>,
        lhs: Bounds,
        relation: Relation,
        rhs: Bounds,
        reduction: impl Into<String>,
    ) -> bool {
        let pass = relation.holds(&lhs, &rhs);
        self.entries.push(Entry { name: name.into(), relation, lhs, rhs, pass, reduction: reduction.into() });
        pass
    }

    pub fn check_exact(&mut self, name: impl Into<String>, lhs: Rational, relation: Relation, rhs: Rational, reduction: impl Into<String>) -> bool {
        self.check(name, Bounds::exact(lhs), relation, Bounds::exact(rhs), reduction)
    }

    /// Record a structural invariant as `violations = 0`.
    pub fn invariant(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) -> bool {
        let lhs = if ok { 0 } else { 1 };
        self.check_exact(name, crate::num::int(lhs), Relation::Eq, crate::num::int(0), detail)
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Every own entry and every child passes.
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass) && self.children.iter().all(Certificate::passed)
    }

    pub fn own_passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .entries
            .iter()
            .filter(|e| !e.pass)
            .map(|e| format!("{}: {}", self.subject, e.name))
            .collect();
        for c in &self.children {
            out.extend(c.failures());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat};

    #[test]
    fn verdicts_are_sound() {
        let wide = Bounds::new(rat(1, 3), rat(2, 3));
        assert!(Relation::Lt.holds(&wide, &Bounds::exact(rat(3, 4))));
        assert!(!Relation::Lt.holds(&wide, &Bounds::exact(rat(1, 2))));
        assert!(!Relation::Eq.holds(&wide, &wide));
        assert!(Relation::Le.holds(&Bounds::exact(int(1)), &Bounds::exact(int(1))));
    }

    #[test]
    fn pass_needs_every_entry() {
        let mut c = Certificate::new("t");
        c.check_exact("a", int(0), Relation::Lt, int(1), "exact");
        assert!(c.passed());
        let mut child = Certificate::new("child");
        child.invariant("schedule", false, "broken");
        c.children.push(child);
        assert!(!c.passed());
        assert!(c.own_passed());
        assert_eq!(c.failures(), vec!["child: schedule".to_string()]);
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Certificate>(&j).unwrap(), c);
    }
}
