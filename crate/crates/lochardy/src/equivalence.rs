//! Ratio table for the maximal-function characterisations of `h^{p(.)}`.
//!
//! Eight quantities are computed per family member; for every ordered pair
//! the table records the smallest and largest ratio over the family and
//! their spread `max / min`.

use lochardy_core::exponent::ExponentField;
use lochardy_core::littlewood_paley::{build_filter_bank, hp_norm};
use lochardy_core::luxemburg::norm;
use lochardy_core::maximal::{
    default_psi0, full_radius, grand_maximal, local_nontangential_maximal, local_vertical_maximal, peetre_maximal,
    GrandMode, TestFunctionDictionary,
};
use lochardy_core::stats::Bracket;
use lochardy_core::GridFunction;
use rayon::prelude::*;
use serde::Serialize;

pub const QUANTITIES: [&str; 8] = ["G_N", "G_N^0", "G~_N", "G~_N^0", "M_psi0", "M*_psi0", "psi**_AB", "h_norm"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquivalenceConfig {
    /// Derivative order of the dictionaries.
    pub order: usize,
    /// Use the four-radius dictionaries.
    pub doubled: bool,
    pub peetre_a: f64,
    pub peetre_b: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig { order: lochardy_core::maximal::DEFAULT_N, doubled: false, peetre_a: 2.0, peetre_b: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairStats {
    pub min: f64,
    pub max: f64,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceTable {
    pub quantities: Vec<String>,
    /// Per member, the eight quasi-norms in [`QUANTITIES`] order.
    pub norms: Vec<[f64; 8]>,
    /// `pairs[a][b]` summarises `||Q_a f|| / ||Q_b f||`.
    pub pairs: Vec<Vec<PairStats>>,
    pub skipped: usize,
}

impl EquivalenceTable {
    pub fn all_finite(&self) -> bool {
        self.pairs.iter().flatten().all(|s| s.min.is_finite() && s.max.is_finite() && s.min > 0.0)
    }

    /// Largest relative change of a pair spread against another table.
    pub fn max_spread_change(&self, other: &EquivalenceTable) -> f64 {
        let mut worst: f64 = 0.0;
        for (ra, rb) in self.pairs.iter().zip(&other.pairs) {
            for (a, b) in ra.iter().zip(rb) {
                worst = worst.max(lochardy_core::stats::relative_change(a.spread, b.spread));
            }
        }
        worst
    }

    /// Rows `a`, columns `b`, cells `min..max` of the ratio bracket.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ratio");
        for q in &self.quantities {
            s.push(',');
            s.push_str(q);
        }
        s.push('\n');
        for (qa, row) in self.quantities.iter().zip(&self.pairs) {
            s.push_str(qa);
            for c in row {
                s.push_str(&format!(",{:.6e}..{:.6e}", c.min, c.max));
            }
            s.push('\n');
        }
        s
    }
}

/// The eight quasi-norms of one member.
pub fn member_norms(
    f: &GridFunction,
    p: &ExponentField,
    local: &TestFunctionDictionary,
    full: &TestFunctionDictionary,
    cfg: &EquivalenceConfig,
) -> anyhow::Result<[f64; 8]> {
    let g = *f.grid();
    let psi = default_psi0(g.dim());
    let bank = build_filter_bank(g, g.level())?;
    let fields = [
        grand_maximal(f, full, GrandMode::Vertical)?.values,
        grand_maximal(f, local, GrandMode::Vertical)?.values,
        grand_maximal(f, full, GrandMode::NonTangential)?.values,
        grand_maximal(f, local, GrandMode::NonTangential)?.values,
        local_vertical_maximal(f, &psi).values,
        local_nontangential_maximal(f, &psi).values,
        peetre_maximal(f, &psi, cfg.peetre_a, cfg.peetre_b)?.values,
    ];
    let mut out = [0.0; 8];
    for (o, v) in out.iter_mut().zip(&fields) {
        *o = norm(v, p)?;
    }
    out[7] = hp_norm(f, p, &bank)?;
    Ok(out)
}

pub fn dictionaries(n: usize, half_width: f64, cfg: &EquivalenceConfig) -> anyhow::Result<(TestFunctionDictionary, TestFunctionDictionary)> {
    let make = |r: f64| {
        if cfg.doubled {
            TestFunctionDictionary::doubled(n, cfg.order, r, half_width)
        } else {
            TestFunctionDictionary::new(n, cfg.order, r, half_width)
        }
    };
    Ok((make(1.0)?, make(full_radius(n))?))
}

/// Ratio table over a family; members whose quantities vanish are skipped.
pub fn equivalence_table(
    family: &[GridFunction],
    p: &ExponentField,
    cfg: &EquivalenceConfig,
) -> anyhow::Result<EquivalenceTable> {
    let g = *p.grid();
    let (local, full) = dictionaries(g.dim(), g.half_width(), cfg)?;
    let computed: Vec<[f64; 8]> = family
        .par_iter()
        .map(|f| member_norms(f, p, &local, &full, cfg))
        .collect::<anyhow::Result<_>>()?;
    let kept: Vec<[f64; 8]> = computed.iter().copied().filter(|v| v.iter().all(|x| *x > 0.0)).collect();
    let mut pairs = Vec::with_capacity(8);
    for a in 0..8 {
        let mut row = Vec::with_capacity(8);
        for b in 0..8 {
            let br = Bracket::from_values(kept.iter().map(|v| v[a] / v[b]));
            row.push(PairStats { min: br.min, max: br.max, spread: br.spread() });
        }
        pairs.push(row);
    }
    Ok(EquivalenceTable {
        quantities: QUANTITIES.iter().map(|s| s.to_string()).collect(),
        skipped: computed.len() - kept.len(),
        norms: computed,
        pairs,
    })
}
