//! Track-mode ISAC signal design.
//!
//! In track mode every antenna transmits the same DD amplitude profile `p`
//! scaled by a beamforming weight, `vec(W_i) = β_i p`. Radar SNR then depends
//! only on `β` through `β^T D_rad β*`, while the communication rate depends on
//! both through `-log det (I + (p p^T) ⊙ G(β))^{-1}`. The design is solved in
//! two stages: `β` maximises the weighted quadratic form
//! `ρ D_rad + (1-ρ) D_com` (a Rayleigh quotient), then `q = p ⊙ p` is
//! water-filled over the diagonal of `G(β)`.

use nalgebra::Cholesky;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{delay_doppler_shift, ArrayGeometry, CommChannel, RadarScene};
use crate::comm_rx::hermitize;
use crate::transforms::kron_dft_rows;
use crate::{CMatrix, CVector, OtfsError, OtfsParams, Result};

/// Trade-off weight `ρ ∈ [0, 1]`; 1 favours radar, 0 communication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsacWeight(f64);

impl IsacWeight {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(OtfsError::InvalidArgument(format!("ISAC weight must lie in [0, 1], got {rho}")));
        }
        Ok(Self(rho))
    }

    pub fn rho(&self) -> f64 {
        self.0
    }
}

/// Output of the two-stage design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub rho: f64,
    /// Unit-norm TX beamformer.
    pub beta: CVector,
    /// DD amplitudes, `Σ p_i² = NM`.
    pub p: Vec<f64>,
    /// DD powers `p ⊙ p`.
    pub q: Vec<f64>,
    /// Value of the weighted Rayleigh quotient at `beta`.
    pub objective: f64,
    pub snr_rad: f64,
    /// Exact `-log det R_LMMSE` at `(p, beta)` [nats].
    pub rate: f64,
}

/// `(1/σ²) Σ_k |α_k|² a_T(θ_k) a_T^H(θ_k)`.
fn quadratic_form<'a>(
    paths: impl Iterator<Item = &'a crate::channel::PathTuple>,
    geometry: &ArrayGeometry,
    sigma2: f64,
) -> CMatrix {
    let mut d = CMatrix::zeros(geometry.n_tx, geometry.n_tx);
    for p in paths {
        let a = geometry.tx_steering(p.theta);
        d += &a * a.adjoint() * Complex64::from(p.alpha.norm_sqr() / sigma2);
    }
    d
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(OtfsError::InvalidArgument(format!("noise variance must be positive, got {sigma2}")));
    }
    Ok(())
}

/// `D_rad` from the (estimated) radar scene and `D_com` from the
/// communication channel.
pub fn build_quadratic_forms(
    scene: &RadarScene,
    channel: &CommChannel,
    geometry: &ArrayGeometry,
    sigma2: f64,
) -> Result<(CMatrix, CMatrix)> {
    check_sigma2(sigma2)?;
    Ok((
        quadratic_form(scene.targets.iter(), geometry, sigma2),
        quadratic_form(channel.paths.iter(), geometry, sigma2),
    ))
}

/// `β^T D_rad β* = Σ_k |α_k|² |β^T a_T(θ_k)|² / σ²`.
pub fn radar_snr(beta: &CVector, scene: &RadarScene, geometry: &ArrayGeometry, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let d = quadratic_form(scene.targets.iter(), geometry, sigma2);
    quadratic_value(beta, &d)
}

/// `β^T D β*` for Hermitian `D`.
pub fn quadratic_value(beta: &CVector, d: &CMatrix) -> Result<f64> {
    if beta.len() != d.nrows() {
        return Err(OtfsError::DimensionMismatch("beamformer length != form size".into()));
    }
    let conj = beta.map(|v| v.conj());
    Ok((beta.transpose() * d * conj)[(0, 0)].re)
}

/// Dominant eigenpair of the weighted form and the resulting beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSolution {
    pub beta: CVector,
    pub objective: f64,
}

/// `β = conj(v)` for the dominant unit eigenvector `v` of
/// `ρ D_rad + (1-ρ) D_com`, found by power iteration from the
/// largest-norm column. The eigenvector phase is fixed so its first
/// non-negligible entry is real positive.
pub fn solve_beamformer(d_rad: &CMatrix, d_com: &CMatrix, weight: IsacWeight) -> Result<BeamformerSolution> {
    if d_rad.shape() != d_com.shape() || d_rad.nrows() != d_rad.ncols() {
        return Err(OtfsError::DimensionMismatch("quadratic forms must be square and equal-sized".into()));
    }
    let rho = weight.rho();
    let d = d_rad * Complex64::from(rho) + d_com * Complex64::from(1.0 - rho);
    let scale = d.norm();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(OtfsError::Degenerate(
            "weighted form is zero: every unit beamformer is optimal (canonical choice: uniform 1/sqrt(N_T))".into(),
        ));
    }
    let v = dominant_eigenvector(&d)?;
    let objective = (v.adjoint() * &d * &v)[(0, 0)].re;
    Ok(BeamformerSolution {
        beta: v.map(|x| x.conj()),
        objective,
    })
}

fn dominant_eigenvector(d: &CMatrix) -> Result<CVector> {
    let n = d.nrows();
    let start = (0..n)
        .max_by(|&a, &b| d.column(a).norm().total_cmp(&d.column(b).norm()))
        .unwrap_or(0);
    let mut v: CVector = d.column(start).into_owned();
    v /= Complex64::from(v.norm());
    let mut lambda = 0.0;
    let mut converged = false;
    for _ in 0..100_000 {
        let mut w = d * &v;
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        w /= Complex64::from(norm);
        let next = (w.adjoint() * d * &w)[(0, 0)].re;
        let moved = (&w - &v * phase_align(&v, &w)).norm();
        v = w;
        if (next - lambda).abs() <= 1e-10 * next.abs().max(1e-300) && moved < 1e-8 {
            converged = true;
            break;
        }
        lambda = next;
    }
    if !converged {
        // Slow convergence means a near-tie at the top of the spectrum; use
        // a direct Hermitian eigensolver instead.
        let eig = d.clone().symmetric_eigen();
        let k = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .ok_or_else(|| OtfsError::Numeric("empty matrix".into()))?;
        v = eig.eigenvectors.column(k).into_owned();
    }
    Ok(canonical_phase(v))
}

/// Unit-modulus factor aligning `a` to `b`.
fn phase_align(a: &CVector, b: &CVector) -> Complex64 {
    let ip = a.dotc(b);
    if ip.norm() > 0.0 {
        ip / ip.norm()
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn canonical_phase(mut v: CVector) -> CVector {
    let tol = 1e-12 * v.norm();
    if let Some(first) = v.iter().find(|x| x.norm() > tol).copied() {
        let rot = first.conj() / first.norm();
        v *= rot;
    }
    v
}

/// Paths grouped by angle; `H_T(β) = Σ_g (β^T a_T(θ_g)) H_g`.
struct PathGroups {
    angles: Vec<f64>,
    members: Vec<Vec<(Complex64, f64, f64)>>,
}

fn group_paths(channel: &CommChannel) -> PathGroups {
    let mut angles: Vec<f64> = Vec::new();
    let mut members: Vec<Vec<(Complex64, f64, f64)>> = Vec::new();
    for p in &channel.paths {
        match angles.iter().position(|&a| a == p.theta) {
            Some(g) => members[g].push((p.alpha, p.tau, p.nu)),
            None => {
                angles.push(p.theta);
                members.push(vec![(p.alpha, p.tau, p.nu)]);
            }
        }
    }
    PathGroups { angles, members }
}

/// Column `j` of `Σ_k h_k C(ν_k) F^H B(τ_k) F (F_M^H ⊗ I_N)`.
fn operator_column(params: &OtfsParams, taps: &[(Complex64, f64, f64)], j: usize) -> Vec<Complex64> {
    let nm = params.nm();
    let mut unit = vec![Complex64::new(0.0, 0.0); nm];
    unit[j] = Complex64::new(1.0, 0.0);
    let tx = kron_dft_rows(&unit, params.n, params.m, true);
    let mut col = vec![Complex64::new(0.0, 0.0); nm];
    for &(h, tau, nu) in taps {
        if h == Complex64::new(0.0, 0.0) {
            continue;
        }
        let rx = delay_doppler_shift(&tx, tau, nu, params);
        col.iter_mut().zip(&rx).for_each(|(o, &e)| *o += h * e);
    }
    col
}

fn effective_taps(beta: &CVector, channel: &CommChannel, geometry: &ArrayGeometry) -> Result<Vec<(Complex64, f64, f64)>> {
    if beta.len() != geometry.n_tx {
        return Err(OtfsError::DimensionMismatch("beamformer length != N_T".into()));
    }
    Ok(channel
        .paths
        .iter()
        .map(|p| {
            let gain = (beta.transpose() * geometry.tx_steering(p.theta))[(0, 0)];
            (p.alpha * gain, p.tau, p.nu)
        })
        .collect())
}

/// Dense DD correlation matrix
/// `G = (1/σ²) (F_M ⊗ I_N) H_T^H H_T (F_M^H ⊗ I_N)`,
/// `H_T = Σ_k α_k (β^T a_T(θ_k)) C(ν_k) F^H B(τ_k) F`.
pub fn build_g(
    beta: &CVector,
    channel: &CommChannel,
    geometry: &ArrayGeometry,
    params: &OtfsParams,
    sigma2: f64,
) -> Result<CMatrix> {
    check_sigma2(sigma2)?;
    let taps = effective_taps(beta, channel, geometry)?;
    let nm = params.nm();
    let mut phi = CMatrix::zeros(nm, nm);
    for j in 0..nm {
        phi.column_mut(j).copy_from_slice(&operator_column(params, &taps, j));
    }
    let mut g = phi.adjoint() * &phi / Complex64::from(sigma2);
    hermitize(&mut g);
    Ok(g)
}

/// Diagonal of `G` from column norms of `H_T (F_M^H ⊗ I_N)`, without
/// forming any NM×NM matrix.
pub fn g_diagonal(
    beta: &CVector,
    channel: &CommChannel,
    geometry: &ArrayGeometry,
    params: &OtfsParams,
    sigma2: f64,
) -> Result<Vec<f64>> {
    check_sigma2(sigma2)?;
    let taps = effective_taps(beta, channel, geometry)?;
    Ok((0..params.nm())
        .map(|j| operator_column(params, &taps, j).iter().map(|v| v.norm_sqr()).sum::<f64>() / sigma2)
        .collect())
}

/// `I + (p p^T) ⊙ G`.
fn information_from_pg(p: &[f64], g: &CMatrix) -> Result<CMatrix> {
    if g.nrows() != p.len() || g.ncols() != p.len() {
        return Err(OtfsError::DimensionMismatch("G must be len(p) × len(p)".into()));
    }
    if p.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(OtfsError::InvalidArgument("DD amplitudes must be finite and nonnegative".into()));
    }
    let n = p.len();
    let mut a = CMatrix::from_fn(n, n, |i, j| g[(i, j)] * (p[i] * p[j]));
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    hermitize(&mut a);
    Ok(a)
}

/// `R_LMMSE(p, β) = (I + (p p^T) ⊙ G)^{-1}`.
pub fn lmmse_cov_from_pg(p: &[f64], g: &CMatrix) -> Result<CMatrix> {
    let a = information_from_pg(p, g)?;
    let chol = Cholesky::new(a).ok_or_else(|| OtfsError::Numeric("I + (pp^T)⊙G not positive definite".into()))?;
    let mut r = chol.inverse();
    hermitize(&mut r);
    Ok(r)
}

/// Exact rate `log det (I + (p p^T) ⊙ G)` [nats], via Cholesky.
pub fn rate_from_pg(p: &[f64], g: &CMatrix) -> Result<f64> {
    crate::comm_rx::log_det_hpd(&information_from_pg(p, g)?)
}

/// Small-Doppler-spread approximation `Σ_i log(1 + q_i β^T D_com β*)`.
pub fn approx_rate_common_gain(q: &[f64], beta: &CVector, d_com: &CMatrix) -> Result<f64> {
    let gain = quadratic_value(beta, d_com)?;
    Ok(q.iter().map(|&qi| (1.0 + qi * gain).ln()).sum())
}

/// Diagonal-`G` approximation `Σ_i log(1 + q_i g_i)`.
pub fn approx_rate_diagonal(q: &[f64], g: &[f64]) -> Result<f64> {
    if q.len() != g.len() {
        return Err(OtfsError::DimensionMismatch("q and g differ in length".into()));
    }
    Ok(q.iter().zip(g).map(|(&qi, &gi)| (1.0 + qi * gi).ln()).sum())
}

/// Water-filling `q_i = max(0, μ - 1/g_i)` with `Σ q_i = budget`.
///
/// The water level is found exactly by sorting the gains and growing the
/// active set from the strongest channel.
pub fn waterfill(g: &[f64], budget: f64) -> Result<Vec<f64>> {
    if g.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(OtfsError::InvalidArgument("channel gains must be finite and nonnegative".into()));
    }
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(OtfsError::InvalidArgument(format!("budget must be nonnegative, got {budget}")));
    }
    let mut order: Vec<usize> = (0..g.len()).filter(|&i| g[i] > 0.0).collect();
    if order.is_empty() {
        return Err(OtfsError::Degenerate("all channel gains are zero".into()));
    }
    order.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    for (k, &i) in order.iter().enumerate() {
        inv_sum += 1.0 / g[i];
        let candidate = (budget + inv_sum) / (k + 1) as f64;
        if candidate <= 1.0 / g[i] {
            break;
        }
        level = candidate;
    }
    Ok(g.iter()
        .map(|&gi| if gi > 0.0 { (level - 1.0 / gi).max(0.0) } else { 0.0 })
        .collect())
}

/// `|β^T a_T(θ)|²` over an angle axis.
pub fn beampattern(beta: &CVector, geometry: &ArrayGeometry, theta_axis: &[f64]) -> Vec<f64> {
    theta_axis
        .iter()
        .map(|&t| (beta.transpose() * geometry.tx_steering(t))[(0, 0)].norm_sqr())
        .collect()
}

/// Precomputed quantities for repeated designs over one scene and channel.
///
/// Comm paths are grouped by angle, and the cross Gram matrices
/// `Φ_g^H Φ_h / σ²` of the per-group operators are cached, so `G(β)` for a
/// new `β` is a weighted sum instead of a fresh NM³ product. The cache is
/// only built when there are at most `MAX_CACHED_GROUPS` distinct angles.
pub struct IsacDesigner {
    params: OtfsParams,
    geometry: ArrayGeometry,
    sigma2: f64,
    channel: CommChannel,
    d_rad: CMatrix,
    d_com: CMatrix,
    angles: Vec<f64>,
    cross: Option<Vec<Vec<CMatrix>>>,
}

const MAX_CACHED_GROUPS: usize = 2;

impl IsacDesigner {
    pub fn new(
        scene: &RadarScene,
        channel: &CommChannel,
        geometry: &ArrayGeometry,
        params: &OtfsParams,
        sigma2: f64,
    ) -> Result<Self> {
        if channel.paths.is_empty() {
            return Err(OtfsError::InvalidArgument("communication channel needs at least one path".into()));
        }
        crate::channel::validate_paths(channel.paths.iter(), params)?;
        let (d_rad, d_com) = build_quadratic_forms(scene, channel, geometry, sigma2)?;
        let groups = group_paths(channel);
        let cross = (groups.angles.len() <= MAX_CACHED_GROUPS).then(|| {
            let nm = params.nm();
            let phis: Vec<CMatrix> = groups
                .members
                .iter()
                .map(|taps| {
                    let mut phi = CMatrix::zeros(nm, nm);
                    for j in 0..nm {
                        phi.column_mut(j).copy_from_slice(&operator_column(params, taps, j));
                    }
                    phi
                })
                .collect();
            phis.iter()
                .map(|a| phis.iter().map(|b| a.adjoint() * b / Complex64::from(sigma2)).collect())
                .collect()
        });
        Ok(Self {
            params: *params,
            geometry: *geometry,
            sigma2,
            channel: channel.clone(),
            d_rad,
            d_com,
            angles: groups.angles,
            cross,
        })
    }

    pub fn d_rad(&self) -> &CMatrix {
        &self.d_rad
    }

    pub fn d_com(&self) -> &CMatrix {
        &self.d_com
    }

    /// `G(β)`.
    pub fn g_matrix(&self, beta: &CVector) -> Result<CMatrix> {
        let Some(cross) = &self.cross else {
            return build_g(beta, &self.channel, &self.geometry, &self.params, self.sigma2);
        };
        let coeff: Vec<Complex64> = self
            .angles
            .iter()
            .map(|&t| (beta.transpose() * self.geometry.tx_steering(t))[(0, 0)])
            .collect();
        let nm = self.params.nm();
        let mut g = CMatrix::zeros(nm, nm);
        for (a, row) in cross.iter().enumerate() {
            for (b, m) in row.iter().enumerate() {
                g += m * (coeff[a].conj() * coeff[b]);
            }
        }
        hermitize(&mut g);
        Ok(g)
    }

    /// Run both design stages for one trade-off weight.
    pub fn design(&self, weight: IsacWeight) -> Result<DesignResult> {
        let sol = solve_beamformer(&self.d_rad, &self.d_com, weight)?;
        let g = self.g_matrix(&sol.beta)?;
        let diag: Vec<f64> = g.diagonal().iter().map(|v| v.re.max(0.0)).collect();
        let q = waterfill(&diag, self.params.nm() as f64)?;
        let p: Vec<f64> = q.iter().map(|v| v.sqrt()).collect();
        let rate = rate_from_pg(&p, &g)?;
        let snr_rad = quadratic_value(&sol.beta, &self.d_rad)?;
        Ok(DesignResult {
            rho: weight.rho(),
            beta: sol.beta,
            p,
            q,
            objective: sol.objective,
            snr_rad,
            rate,
        })
    }
}

/// Two-stage ISAC design for a single weight.
pub fn design_tradeoff(
    scene: &RadarScene,
    channel: &CommChannel,
    weight: IsacWeight,
    geometry: &ArrayGeometry,
    params: &OtfsParams,
    sigma2: f64,
) -> Result<DesignResult> {
    IsacDesigner::new(scene, channel, geometry, params, sigma2)?.design(weight)
}
