//! Scenario profiles: per-cell calibration targets and the relation
//! vocabulary the backbone generator draws from.

use super::AttackVector;
use crate::graph::Label;

pub(crate) type Triple = (&'static str, &'static str, &'static str);

/// Backbone relations present in every web-serving graph, paired with the
/// relative edge-budget weight of each. Weights skew toward memory and file
/// traffic so that a few clusters absorb most of the ~24:1 edge/node ratio.
pub(crate) const CORE: [(Triple, f64); 28] = [
    (("task", "WasInformedBy", "task"), 6.0),
    (("process_memory", "WasGeneratedBy", "task"), 14.0),
    (("task", "Used", "process_memory"), 14.0),
    (("process_memory", "WasDerivedFrom", "process_memory"), 9.0),
    (("file", "WasGeneratedBy", "task"), 5.0),
    (("task", "Used", "file"), 6.0),
    (("file", "WasDerivedFrom", "file"), 3.0),
    (("file", "WasDerivedFrom", "path"), 4.0),
    (("path", "WasGeneratedBy", "task"), 4.0),
    (("inode", "WasDerivedFrom", "path"), 4.0),
    (("task", "Used", "inode"), 5.0),
    (("inode", "WasGeneratedBy", "task"), 4.0),
    (("inode", "WasDerivedFrom", "inode"), 2.0),
    (("socket", "WasGeneratedBy", "task"), 3.0),
    (("task", "Used", "socket"), 4.0),
    (("socket", "WasDerivedFrom", "address"), 1.5),
    (("packet", "WasDerivedFrom", "socket"), 2.0),
    (("socket", "WasDerivedFrom", "packet"), 2.0),
    (("task", "WasAssociatedWith", "machine"), 0.5),
    (("argv", "WasGeneratedBy", "task"), 1.5),
    (("task", "Used", "argv"), 1.5),
    (("envp", "WasGeneratedBy", "task"), 1.0),
    (("msg", "WasGeneratedBy", "task"), 2.5),
    (("task", "Used", "msg"), 2.5),
    (("pipe", "WasGeneratedBy", "task"), 1.5),
    (("task", "Used", "pipe"), 1.5),
    (("shm", "WasGeneratedBy", "task"), 1.5),
    (("task", "Used", "shm"), 1.5),
];

/// Indices into `CORE` of the forum-message relations a stored-XSS attack
/// inflates.
pub(crate) const MSG_CORE: [usize; 2] = [22, 23];

/// Relations a graph may carry beyond the core; the per-graph relation-count
/// draw decides how many, so relation sets vary within a class.
pub(crate) const OPTIONAL: [Triple; 6] = [
    ("task", "Used", "envp"),
    ("process_memory", "WasDerivedFrom", "file"),
    ("file", "WasDerivedFrom", "process_memory"),
    ("msg", "WasDerivedFrom", "msg"),
    ("shm", "WasDerivedFrom", "process_memory"),
    ("packet", "WasDerivedFrom", "packet"),
];

pub(crate) const OPTIONAL_WEIGHT: f64 = 1.0;
pub(crate) const EXCLUSIVE_WEIGHT: f64 = 1.2;

/// The single relation a brute-force attack graph consists of.
pub(crate) const BRUTE_FORCE_MOTIF: Triple = ("socket", "WasDerivedFrom", "socket");

/// Node-type proportions of the backbone clusters; every type appears in at
/// least one core relation, so every backbone graph populates all of them.
pub(crate) const TYPE_SHARES: [(&str, f64); 14] = [
    ("task", 0.13),
    ("process_memory", 0.17),
    ("path", 0.14),
    ("inode", 0.13),
    ("file", 0.12),
    ("socket", 0.08),
    ("msg", 0.06),
    ("argv", 0.04),
    ("envp", 0.03),
    ("pipe", 0.03),
    ("shm", 0.03),
    ("address", 0.02),
    ("packet", 0.015),
    ("machine", 0.005),
];

/// Calibration targets per (vector, class): average nodes, edges, and
/// relation-type count.
pub(crate) fn cell_targets(vector: AttackVector, label: Label) -> (f64, f64, u32) {
    use AttackVector::*;
    match (vector, label) {
        (XssStored, Label::Benign) => (19_436.0, 463_682.0, 30),
        (XssStored, Label::Attack) => (19_547.0, 480_179.0, 31),
        (XssReflected, Label::Benign) => (33_481.0, 824_276.0, 31),
        (XssReflected, Label::Attack) => (24_435.0, 666_705.0, 32),
        (XssDom, Label::Benign) => (31_243.0, 753_519.0, 30),
        (XssDom, Label::Attack) => (30_261.0, 751_133.0, 32),
        (ClInjection, Label::Benign) => (32_996.0, 793_318.0, 29),
        (ClInjection, Label::Attack) => (25_720.0, 631_633.0, 30),
        (SqlInjection, Label::Benign) => (22_903.0, 543_266.0, 30),
        (SqlInjection, Label::Attack) => (29_576.0, 733_375.0, 30),
        (BruteForce, Label::Benign) => (21_518.0, 517_101.0, 30),
        (BruteForce, Label::Attack) => (418.0, 416.0, 1),
    }
}

/// How an attack graph departs from the benign backbone of its vector.
pub(crate) struct AttackProfile {
    /// Relations never generated for the benign class.
    pub exclusives: &'static [Triple],
    /// Probability that one attack graph carries the exclusives; below 1.0
    /// the relation set alone cannot separate the classes.
    pub exclusive_prob: f64,
    /// Multiplicative boost range for the `MSG_CORE` weights — the
    /// frequency-style signal of repeated forum posts.
    pub msg_boost: Option<(f64, f64)>,
}

pub(crate) fn attack_profile(vector: AttackVector) -> AttackProfile {
    use AttackVector::*;
    match vector {
        // The stored attack looks like benign posting: the payload store is
        // present in a minority of graphs and the main signal is message
        // multiplicity, keeping this the hardest class.
        XssStored => AttackProfile {
            exclusives: &[("msg", "WasDerivedFrom", "file")],
            exclusive_prob: 0.4,
            msg_boost: Some((1.2, 1.9)),
        },
        // Popup handling pulls request text into renderer memory.
        XssReflected => AttackProfile {
            exclusives: &[("process_memory", "WasDerivedFrom", "msg")],
            exclusive_prob: 1.0,
            msg_boost: None,
        },
        // DOM rewrite: in-memory document feeds messages and URL paths.
        XssDom => AttackProfile {
            exclusives: &[
                ("msg", "WasDerivedFrom", "process_memory"),
                ("path", "WasDerivedFrom", "msg"),
            ],
            exclusive_prob: 1.0,
            msg_boost: None,
        },
        // Injected command line built from request text.
        ClInjection => AttackProfile {
            exclusives: &[("argv", "WasDerivedFrom", "msg")],
            exclusive_prob: 1.0,
            msg_boost: None,
        },
        // Secondary query chain writes the database file straight from the
        // request.
        SqlInjection => AttackProfile {
            exclusives: &[("file", "WasDerivedFrom", "msg")],
            exclusive_prob: 1.0,
            msg_boost: None,
        },
        BruteForce => AttackProfile {
            exclusives: &[BRUTE_FORCE_MOTIF],
            exclusive_prob: 1.0,
            msg_boost: None,
        },
    }
}
