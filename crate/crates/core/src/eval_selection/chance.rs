use num_rational::Ratio;

use crate::corpus::QuestionType;

/// Chance level of one condition, kept unreduced as `successes / cases`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chance {
    pub successes: u64,
    pub cases: u64,
}

impl Chance {
    pub fn ratio(self) -> Ratio<u64> {
        Ratio::new(self.successes, self.cases)
    }

    pub fn value(self) -> f64 {
        self.successes as f64 / self.cases as f64
    }
}

impl std::fmt::Display for Chance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.successes, self.cases)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChanceTable {
    pub all: Chance,
    pub different_spans: Chance,
    pub same_span: Chance,
}

fn enumerate(
    include: impl Fn(QuestionType, QuestionType) -> bool,
    success: impl Fn(QuestionType, QuestionType) -> bool,
) -> Chance {
    let mut c = Chance { successes: 0, cases: 0 };
    for truth in QuestionType::ALL {
        for pred in QuestionType::ALL {
            if include(truth, pred) {
                c.cases += 1;
                c.successes += success(truth, pred) as u64;
            }
        }
    }
    c
}

/// Enumerates the truth by uniform-prediction grid under each success map.
pub fn chance_by_enumeration() -> ChanceTable {
    ChanceTable {
        all: enumerate(|_, _| true, |t, p| t == p),
        different_spans: enumerate(|_, _| true, |t, p| t.shares_span() == p.shares_span()),
        same_span: enumerate(|t, p| t.shares_span() && p.shares_span(), |t, p| t == p),
    }
}
