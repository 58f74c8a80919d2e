use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const TRIALS_PER_BLOCK: usize = 16;
pub const SURFACE_BLOCK_SECONDS: f64 = 180.0;
pub const BLOCK_DURATION_TOLERANCE_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentId {
    /// Swinging-device switching: four load sequences of three blocks.
    E1,
    /// Extended swinging-device switching: four switching schedules of five
    /// learning blocks.
    E2,
    /// Tactile-surface switching: three switching types of three timed
    /// free-exploration blocks.
    E3,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentId::E1 => "E1",
            ExperimentId::E2 => "E2",
            ExperimentId::E3 => "E3",
        })
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "E1" => Ok(ExperimentId::E1),
            "E2" => Ok(ExperimentId::E2),
            "E3" => Ok(ExperimentId::E3),
            other => Err(format!("unknown experiment `{other}` (expected E1, E2 or E3)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factor {
    pub name: &'static str,
    pub levels: Vec<&'static str>,
    pub within_subjects: bool,
}

/// Block sequence of one between-subjects condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionLayout {
    pub name: String,
    pub aliases: Vec<String>,
    pub blocks: Vec<String>,
}

impl ConditionLayout {
    fn new(name: &str, aliases: &[&str], blocks: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            aliases: aliases.iter().map(|a| a.to_string()).collect(),
            blocks: blocks.iter().map(|b| b.to_string()).collect(),
        }
    }

    fn matches(&self, label: &str) -> bool {
        let key = condition_key(label);
        condition_key(&self.name) == key || self.aliases.iter().any(|a| condition_key(a) == key)
    }
}

/// Lower-cased with separators removed, so `"L, U, L"` matches `"LUL"`.
fn condition_key(label: &str) -> String {
    label
        .chars()
        .filter(|c| !matches!(c, ' ' | ',' | '-' | '_' | '/'))
        .flat_map(char::to_lowercase)
        .collect()
}

pub(crate) fn labels_match(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Design {
    pub experiment: ExperimentId,
    pub factors: Vec<Factor>,
    pub conditions: Vec<ConditionLayout>,
    /// Trial count per block for reach tasks; `None` for timed blocks.
    pub trials_per_block: Option<usize>,
    /// Nominal block length for timed blocks.
    pub block_duration_s: Option<f64>,
    /// 1-based block where switching is introduced, when common to all
    /// conditions.
    pub switch_block: Option<usize>,
}

impl Design {
    pub fn for_experiment(id: ExperimentId) -> Self {
        match id {
            ExperimentId::E1 => Self::e1(),
            ExperimentId::E2 => Self::e2(),
            ExperimentId::E3 => Self::e3(),
        }
    }

    /// 2 (device) x 3 (learning blocks) x 4 (sequence) x 16 (trials).
    pub fn e1() -> Self {
        Self {
            experiment: ExperimentId::E1,
            factors: vec![
                Factor { name: "swinging device", levels: vec!["unloaded", "loaded"], within_subjects: false },
                Factor { name: "learning block", levels: vec!["learning", "unlearning", "relearning"], within_subjects: true },
                Factor { name: "sequence", levels: vec!["L,U,L", "U,L,U", "L,U,U", "U,L,L"], within_subjects: false },
                Factor { name: "trial", levels: vec![], within_subjects: true },
            ],
            conditions: vec![
                ConditionLayout::new("LUL", &["L, U, L"], &["L", "U", "L"]),
                ConditionLayout::new("ULU", &["U, L, U"], &["U", "L", "U"]),
                ConditionLayout::new("LUU", &["L, U, U"], &["L", "U", "U"]),
                ConditionLayout::new("ULL", &["U, L, L"], &["U", "L", "L"]),
            ],
            trials_per_block: Some(TRIALS_PER_BLOCK),
            block_duration_s: None,
            switch_block: None,
        }
    }

    /// 2 (device) x 4 (switching) x 5 (learning blocks) x 16 (trials).
    pub fn e2() -> Self {
        let blocks = ["L", "U", "SL", "SU", "TL"];
        Self {
            experiment: ExperimentId::E2,
            factors: vec![
                Factor { name: "swinging device", levels: vec!["unloaded", "loaded"], within_subjects: false },
                Factor { name: "switching", levels: vec!["interleaved", "early", "late", "control"], within_subjects: false },
                Factor {
                    name: "learning block",
                    levels: vec!["learning", "unlearning", "secondary learning", "secondary unlearning", "tertiary learning"],
                    within_subjects: true,
                },
                Factor { name: "trial", levels: vec![], within_subjects: true },
            ],
            conditions: vec![
                ConditionLayout::new("interleaved", &["alternate"], &blocks),
                ConditionLayout::new("early", &[], &blocks),
                ConditionLayout::new("late", &[], &blocks),
                ConditionLayout::new("control", &["none"], &blocks),
            ],
            trials_per_block: Some(TRIALS_PER_BLOCK),
            block_duration_s: None,
            switch_block: None,
        }
    }

    /// 3 (switching type) x 3 (surface block), three minutes per block.
    pub fn e3() -> Self {
        Self {
            experiment: ExperimentId::E3,
            factors: vec![
                Factor { name: "switching type", levels: vec!["hard", "weak", "reverse"], within_subjects: false },
                Factor { name: "surface block", levels: vec!["1", "2", "3"], within_subjects: true },
            ],
            conditions: vec![
                ConditionLayout::new("hard", &[], &["Magnetic", "Honey", "Ice"]),
                ConditionLayout::new("weak", &[], &["Bumpy", "Rubber", "Sandpaper"]),
                ConditionLayout::new("reverse", &[], &["Honey", "Bumpy", "Sand"]),
            ],
            trials_per_block: None,
            block_duration_s: Some(SURFACE_BLOCK_SECONDS),
            switch_block: Some(2),
        }
    }

    pub fn condition(&self, label: &str) -> Option<&ConditionLayout> {
        self.conditions.iter().find(|c| c.matches(label))
    }

    pub fn is_timed(&self) -> bool {
        self.block_duration_s.is_some()
    }
}
