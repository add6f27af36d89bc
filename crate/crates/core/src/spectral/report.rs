use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    analytic_ft, growth_from_ft, minimal_epsilon, sign_changes, verdict_from_values, Convention, GridSpectrum,
    StabilizerSolution, Verdict, ORACLE_NOISE_FLOOR,
};
use crate::error::Result;
use crate::kernels::KernelSpec;

/// Sign disagreements between the closed form and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignDiscrepancy {
    /// Number of resolved oracle modes whose sign differs.
    pub modes: usize,
    /// Range of tabulated `ξ` over which they occur.
    pub xi_min: f64,
    pub xi_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub kernel: KernelSpec,
    pub dim: usize,
    /// Background constant `C` in the growth rate.
    pub c: f64,
    pub xi_grid: Vec<f64>,
    pub analytic_ft: Vec<f64>,
    /// Oracle values in tabulated units, `None` outside the resolved band.
    pub oracle_ft: Vec<Option<f64>>,
    pub growth_gen: Vec<f64>,
    pub growth_disc: Vec<f64>,
    pub verdict_gen: Verdict,
    pub verdict_disc: Verdict,
    pub oracle_verdict: Option<(Verdict, Verdict)>,
    pub sign_changes: Vec<f64>,
    pub discrepancy: Option<SignDiscrepancy>,
    pub convention: Option<Convention>,
    pub stabilizer: Option<StabilizerSolution>,
}

impl SpectrumReport {
    /// Analytic columns on `xi_grid`, plus oracle columns when a spectrum is given.
    pub fn build(
        k: &KernelSpec,
        xi_grid: &[f64],
        c: f64,
        dim: usize,
        oracle: Option<(&GridSpectrum, Convention)>,
    ) -> Result<Self> {
        super::check_grid(xi_grid)?;
        let analytic = xi_grid
            .iter()
            .map(|&xi| analytic_ft(k, xi, dim))
            .collect::<Result<Vec<_>>>()?;
        let growth_gen: Vec<f64> = xi_grid
            .iter()
            .zip(&analytic)
            .map(|(&xi, &ft)| growth_from_ft(super::Direction::Generator, c, xi, ft))
            .collect();
        let growth_disc = growth_gen.iter().map(|g| -g).collect();
        let (verdict_gen, verdict_disc) = verdict_from_values(analytic.iter().copied(), 0.0);

        let mut oracle_ft = vec![None; xi_grid.len()];
        let mut oracle_verdict = None;
        let mut discrepancy = None;
        if let Some((spectrum, conv)) = oracle {
            for (slot, &xi) in oracle_ft.iter_mut().zip(xi_grid) {
                *slot = spectrum.interpolate(conv.cycle_xi(xi)).map(|v| v / conv.amplitude);
            }
            let floor = spectrum.noise_floor(ORACLE_NOISE_FLOOR);
            let resolved: Vec<(f64, f64)> = spectrum.modes().into_iter().skip(1).collect();
            oracle_verdict = Some(verdict_from_values(resolved.iter().map(|m| m.1), floor));

            let mut hits: Vec<f64> = Vec::new();
            for (nu, o) in resolved {
                if o.abs() <= floor {
                    continue;
                }
                let xi = conv.table_xi(nu);
                let a = analytic_ft(k, xi, dim)?;
                if a != 0.0 && a.signum() != o.signum() {
                    hits.push(xi);
                }
            }
            if let (Some(&lo), Some(&hi)) = (hits.first(), hits.last()) {
                discrepancy = Some(SignDiscrepancy {
                    modes: hits.len(),
                    xi_min: lo,
                    xi_max: hi,
                });
            }
        }

        let stabilizer = match k {
            KernelSpec::Stabilized { base, stabilizer, .. } => minimal_epsilon(base, stabilizer, xi_grid, dim).ok(),
            _ => None,
        };

        Ok(Self {
            kernel: k.clone(),
            dim,
            c,
            xi_grid: xi_grid.to_vec(),
            analytic_ft: analytic,
            oracle_ft,
            growth_gen,
            growth_disc,
            verdict_gen,
            verdict_disc,
            oracle_verdict,
            sign_changes: sign_changes(k, xi_grid, dim)?,
            discrepancy,
            convention: oracle.map(|o| o.1),
            stabilizer,
        })
    }

    /// Oracle verdict if present, else the analytic one.
    pub fn effective_verdict(&self) -> (Verdict, Verdict) {
        self.oracle_verdict.unwrap_or((self.verdict_gen, self.verdict_disc))
    }

    pub fn has_discrepancy(&self) -> bool {
        self.discrepancy.is_some()
            || self
                .oracle_verdict
                .is_some_and(|v| v != (self.verdict_gen, self.verdict_disc))
    }

    /// Columns: `xi,analytic_ft,oracle_ft,growth_gen,growth_disc`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,analytic_ft,oracle_ft,growth_gen,growth_disc\n");
        for i in 0..self.xi_grid.len() {
            let oracle = self.oracle_ft[i].map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.xi_grid[i], self.analytic_ft[i], oracle, self.growth_gen[i], self.growth_disc[i]
            );
        }
        out
    }

    pub fn summary(&self) -> SpectrumSummary {
        SpectrumSummary {
            kernel: self.kernel.to_string(),
            dim: self.dim,
            c: self.c,
            grid_points: self.xi_grid.len(),
            verdict_gen: self.verdict_gen,
            verdict_disc: self.verdict_disc,
            oracle_verdict_gen: self.oracle_verdict.map(|v| v.0),
            oracle_verdict_disc: self.oracle_verdict.map(|v| v.1),
            discrepancy: self.has_discrepancy(),
            sign_discrepancy: self.discrepancy.clone(),
            sign_changes: self.sign_changes.clone(),
            convention: self.convention,
            epsilon_min: self.stabilizer.as_ref().map(|s| s.epsilon_min),
            margin: self.stabilizer.as_ref().map(|s| s.margin),
        }
    }
}

/// JSON-friendly digest of a [`SpectrumReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub kernel: String,
    pub dim: usize,
    pub c: f64,
    pub grid_points: usize,
    pub verdict_gen: Verdict,
    pub verdict_disc: Verdict,
    pub oracle_verdict_gen: Option<Verdict>,
    pub oracle_verdict_disc: Option<Verdict>,
    pub discrepancy: bool,
    pub sign_discrepancy: Option<SignDiscrepancy>,
    pub sign_changes: Vec<f64>,
    pub convention: Option<Convention>,
    pub epsilon_min: Option<f64>,
    pub margin: Option<f64>,
}

/// A published stability verdict for one kernel, 1-D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub name: String,
    pub kernel: KernelSpec,
    pub generator_stable: bool,
    pub discriminator_stable: bool,
    pub note: Option<String>,
}

/// Reference verdicts for Cramér, Gaussian, rational quadratic with
/// α ∈ {1/2, 1, 2, 3}, and the elastic kernel.
pub fn reference_rows() -> Vec<ReferenceRow> {
    let row = |name: &str, kernel: KernelSpec, g: bool, d: bool, note: Option<&str>| ReferenceRow {
        name: name.into(),
        kernel,
        generator_stable: g,
        discriminator_stable: d,
        note: note.map(Into::into),
    };
    vec![
        row(
            "cramer",
            KernelSpec::cramer(),
            true,
            false,
            Some("a second derivation states the transform of -|x| is negative (generator unstable); the oracle decides"),
        ),
        row("gaussian_rbf", KernelSpec::gaussian(1.0), true, false, None),
        row("rq_alpha_0.5", KernelSpec::rational_quadratic(0.5), true, false, None),
        row(
            "rq_alpha_1",
            KernelSpec::rational_quadratic(1.0),
            true,
            false,
            Some("printed with e^{+|xi|}; evaluated with e^{-|xi|}"),
        ),
        row(
            "rq_alpha_2",
            KernelSpec::rational_quadratic(2.0),
            false,
            false,
            Some("printed with e^{+|xi|}; the closed form changes sign at |xi| = 8, but the profile is a Gaussian scale mixture with a positive transform"),
        ),
        row(
            "rq_alpha_3",
            KernelSpec::rational_quadratic(3.0),
            true,
            false,
            Some("printed with e^{+|xi|}; evaluated with e^{-|xi|}"),
        ),
        row("elastic", KernelSpec::elastic(), true, false, None),
    ]
}

/// One reference row checked against the closed form and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCheck {
    pub name: String,
    pub kernel: String,
    pub reference: (bool, bool),
    pub analytic: (Verdict, Verdict),
    pub oracle: (Verdict, Verdict),
    pub analytic_matches_reference: bool,
    pub oracle_matches_reference: bool,
    pub discrepancy: bool,
    pub sign_changes: Vec<f64>,
    pub note: Option<String>,
    /// The reference cells are reproduced, or the oracle contradicts them
    /// and the contradiction is flagged.
    pub reproduced: bool,
}

impl ReferenceRow {
    pub fn check(&self, xi_grid: &[f64], spectrum: &GridSpectrum, conv: Convention) -> Result<RowCheck> {
        let report = SpectrumReport::build(&self.kernel, xi_grid, 1.0, 1, Some((spectrum, conv)))?;
        let reference = (self.generator_stable, self.discriminator_stable);
        let stable = |v: (Verdict, Verdict)| (v.0.is_stable(), v.1.is_stable());
        let analytic = (report.verdict_gen, report.verdict_disc);
        let oracle = report.effective_verdict();
        let analytic_matches_reference = stable(analytic) == reference;
        let oracle_matches_reference = stable(oracle) == reference;
        let discrepancy = report.has_discrepancy();
        Ok(RowCheck {
            name: self.name.clone(),
            kernel: self.kernel.to_string(),
            reference,
            analytic,
            oracle,
            analytic_matches_reference,
            oracle_matches_reference,
            discrepancy,
            sign_changes: report.sign_changes,
            note: self.note.clone(),
            reproduced: (analytic_matches_reference && oracle_matches_reference)
                || (!oracle_matches_reference && discrepancy),
        })
    }
}
