//! Confusion-matrix evaluation with Violent as the positive class.

use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    /// Tallies (truth, prediction) pairs; the result is order-independent.
    pub fn tally<I: IntoIterator<Item = (Label, Label)>>(pairs: I) -> Self {
        let mut m = Self::default();
        for pair in pairs {
            match pair {
                (Label::Violent, Label::Violent) => m.tp += 1,
                (Label::Benign, Label::Violent) => m.fp += 1,
                (Label::Benign, Label::Benign) => m.tn += 1,
                (Label::Violent, Label::Benign) => m.fn_ += 1,
            }
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Metrics whose denominator was zero and were therefore reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct UndefinedFlags {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    /// No violent sentences: TPR and FNR undefined.
    pub positive_rates: bool,
    /// No benign sentences: TNR and FPR undefined.
    pub negative_rates: bool,
}

impl UndefinedFlags {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.positive_rates || self.negative_rates
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub tpr: f64,
    pub fpr: f64,
    pub tnr: f64,
    pub fnr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// F1 of the violent class.
    pub f1: f64,
    /// Mean of the violent-class and benign-class F1.
    pub f1_macro: f64,
    pub rates: Rates,
    pub undefined: UndefinedFlags,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn f1_score(p: f64, r: f64) -> (f64, bool) {
    if p + r == 0.0 {
        (0.0, true)
    } else {
        (2.0 * p * r / (p + r), false)
    }
}

impl EvalReport {
    /// Computes every metric from the matrix. Zero denominators give 0 and
    /// set the matching flag. An empty matrix has accuracy 0.
    pub fn from_matrix(matrix: ConfusionMatrix) -> Self {
        let ConfusionMatrix { tp, fp, tn, fn_ } = matrix;
        let (accuracy, _) = ratio(tp + tn, matrix.total());
        let (precision, p_undef) = ratio(tp, tp + fp);
        let (recall, r_undef) = ratio(tp, tp + fn_);
        let (f1, f1_undef) = f1_score(precision, recall);

        let (neg_precision, _) = ratio(tn, tn + fn_);
        let (neg_recall, _) = ratio(tn, tn + fp);
        let (neg_f1, _) = f1_score(neg_precision, neg_recall);

        let (tpr, pos_undef) = ratio(tp, tp + fn_);
        let (fnr, _) = ratio(fn_, tp + fn_);
        let (tnr, neg_undef) = ratio(tn, tn + fp);
        let (fpr, _) = ratio(fp, tn + fp);

        Self {
            matrix,
            accuracy,
            precision,
            recall,
            f1,
            f1_macro: (f1 + neg_f1) / 2.0,
            rates: Rates { tpr, fpr, tnr, fnr },
            undefined: UndefinedFlags {
                precision: p_undef,
                recall: r_undef,
                f1: f1_undef,
                positive_rates: pos_undef,
                negative_rates: neg_undef,
            },
        }
    }

    /// Human-readable table.
    pub fn render_text(&self) -> String {
        let m = &self.matrix;
        let mut s = String::new();
        let _ = writeln!(s, "                  predicted violent  predicted benign");
        let _ = writeln!(s, "actual violent    {:>17}  {:>16}", format!("TP {}", m.tp), format!("FN {}", m.fn_));
        let _ = writeln!(s, "actual benign     {:>17}  {:>16}", format!("FP {}", m.fp), format!("TN {}", m.tn));
        let _ = writeln!(s);
        let _ = writeln!(s, "accuracy   {}", self.accuracy);
        let _ = writeln!(s, "precision  {}{}", self.precision, flag(self.undefined.precision));
        let _ = writeln!(s, "recall     {}{}", self.recall, flag(self.undefined.recall));
        let _ = writeln!(s, "f1         {}{}", self.f1, flag(self.undefined.f1));
        let _ = writeln!(s, "f1 (macro) {}", self.f1_macro);
        let _ = writeln!(s, "TPR {}  FNR {}{}", self.rates.tpr, self.rates.fnr, flag(self.undefined.positive_rates));
        let _ = writeln!(s, "TNR {}  FPR {}{}", self.rates.tnr, self.rates.fpr, flag(self.undefined.negative_rates));
        s
    }

    /// Machine-readable document. `config_echo` is copied verbatim.
    pub fn to_json(&self, config_echo: serde_json::Value) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            accuracy: f64,
            precision: f64,
            recall: f64,
            f1_positive: f64,
            f1_macro: f64,
            matrix: &'a ConfusionMatrix,
            rates: &'a Rates,
            undefined: &'a UndefinedFlags,
            config_echo: serde_json::Value,
        }
        let doc = Doc {
            accuracy: self.accuracy,
            precision: self.precision,
            recall: self.recall,
            f1_positive: self.f1,
            f1_macro: self.f1_macro,
            matrix: &self.matrix,
            rates: &self.rates,
            undefined: &self.undefined,
            config_echo,
        };
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    }
}

fn flag(undefined: bool) -> &'static str {
    if undefined {
        "  (undefined)"
    } else {
        ""
    }
}
