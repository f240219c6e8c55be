use super::SiteLattice;
use crate::error::{Error, Result};
use crate::series::{Monomial, Series, SeriesMeta, C64};

/// Result of substituting `q_{j_i} = √(I_i + y_i) e^{i x_i}` on the
/// tangential sites.
#[derive(Clone, Debug)]
pub struct ActionAngle {
    /// Series in `(x, y)` on `S` and `(q, q̄)` on the normal sites.
    pub series: Series,
    /// Terms of the input with an odd total power on some tangential site,
    /// which have no polynomial image; kept in the original variables.
    pub odd_remainder: Series,
    pub odd_mass: f64,
    /// Mass dropped by the caps of the output.
    pub dropped_mass: f64,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Action-angle substitution of a series over all retained sites. `actions`
/// are the reference torus actions `I_i`; with `I = 0` this is
/// `q_{j_i} = √y_i e^{i x_i}`.
pub fn to_action_angle(
    g: &Series,
    lattice: &SiteLattice,
    actions: &[f64],
    degree_cap: u32,
    fourier_cap: u32,
) -> Result<ActionAngle> {
    let n = lattice.n();
    if actions.len() != n {
        return Err(Error::Dimension(format!(
            "{} torus actions for {n} tangential sites",
            actions.len()
        )));
    }
    if g.n() != 0 || g.table().len() != lattice.retained.len() {
        return Err(Error::MetaMismatch(
            "input must be a series over the retained sites without angles".into(),
        ));
    }
    // Full slot -> tangential index or normal slot.
    let mut tangential_of = vec![None; lattice.retained.len()];
    let mut normal_of = vec![None; lattice.retained.len()];
    for (i, &pos) in lattice.tangential_index.iter().enumerate() {
        tangential_of[pos] = Some(i);
    }
    for (s, &pos) in lattice.normal_index.iter().enumerate() {
        normal_of[pos] = Some(s as u32);
    }
    let meta = SeriesMeta::new(lattice.action_angle_table(), degree_cap, fourier_cap);
    let mut out: Vec<(Monomial, C64)> = Vec::new();
    let mut odd: Vec<(Monomial, C64)> = Vec::new();
    for (m, &c) in g.iter() {
        let mut a = vec![0u32; n];
        let mut b = vec![0u32; n];
        let mut beta = Vec::new();
        let mut gamma = Vec::new();
        for &(slot, e) in &m.beta {
            match tangential_of[slot as usize] {
                Some(i) => a[i] += u32::from(e),
                None => beta.push((normal_of[slot as usize].expect("partition"), e)),
            }
        }
        for &(slot, e) in &m.gamma {
            match tangential_of[slot as usize] {
                Some(i) => b[i] += u32::from(e),
                None => gamma.push((normal_of[slot as usize].expect("partition"), e)),
            }
        }
        if (0..n).any(|i| (a[i] + b[i]) % 2 == 1) {
            odd.push((m.clone(), c));
            continue;
        }
        let k: Vec<i32> = (0..n).map(|i| a[i] as i32 - b[i] as i32).collect();
        let half: Vec<u32> = (0..n).map(|i| (a[i] + b[i]) / 2).collect();
        // Expand Π_i (I_i + y_i)^{half_i}.
        let mut alpha = vec![0u16; n];
        loop {
            let mut w = c;
            for i in 0..n {
                let l = u32::from(alpha[i]);
                w *= binomial(half[i], l) * actions[i].powi((half[i] - l) as i32);
            }
            if w != C64::new(0.0, 0.0) {
                out.push((Monomial::new(&k, &alpha, &beta, &gamma)?, w));
            }
            let mut i = 0;
            while i < n && u32::from(alpha[i]) == half[i] {
                alpha[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            alpha[i] += 1;
        }
    }
    let t = Series::from_terms_truncating(meta, out)?;
    let odd_remainder = Series::from_terms(g.meta().clone(), odd)?;
    Ok(ActionAngle {
        odd_mass: odd_remainder.l1_mass(),
        series: t.value,
        odd_remainder,
        dropped_mass: t.dropped_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_sites, ModelConfig};

    fn lattice() -> SiteLattice {
        let cfg = ModelConfig {
            d: 1,
            j_max: 2.0,
            tangential: vec![vec![1]],
            low_cutoff: 1.0,
            ..ModelConfig::default()
        };
        build_sites(&cfg).unwrap()
    }

    fn full(l: &SiteLattice, beta: &[(u32, u16)], gamma: &[(u32, u16)]) -> Series {
        let meta = SeriesMeta::new(l.full_table(), 8, 8);
        Series::monomial(
            meta,
            Monomial::new(&[], &[], beta, gamma).unwrap(),
            C64::new(1.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn action_substitution() {
        let l = lattice();
        let t = l.tangential_index[0] as u32;
        let g = full(&l, &[(t, 1)], &[(t, 1)]);
        let aa = to_action_angle(&g, &l, &[0.0], 8, 8).unwrap();
        assert_eq!(aa.series.len(), 1);
        assert_eq!(aa.series.get(&Monomial::y(1, 0)), C64::new(1.0, 0.0));

        let g2 = full(&l, &[(t, 2)], &[(t, 2)]);
        let aa2 = to_action_angle(&g2, &l, &[0.0], 8, 8).unwrap();
        let y2 = Monomial::new(&[0], &[2], &[], &[]).unwrap();
        assert_eq!(aa2.series.get(&y2), C64::new(1.0, 0.0));
        assert_eq!(aa2.series.len(), 1);
    }

    #[test]
    fn nonzero_actions_expand_binomially() {
        let l = lattice();
        let t = l.tangential_index[0] as u32;
        let g = full(&l, &[(t, 2)], &[(t, 2)]);
        let aa = to_action_angle(&g, &l, &[0.5], 8, 8).unwrap();
        let at = |a: u16| aa.series.get(&Monomial::new(&[0], &[a], &[], &[]).unwrap());
        assert_eq!(at(2), C64::new(1.0, 0.0));
        assert_eq!(at(1), C64::new(1.0, 0.0));
        assert_eq!(at(0), C64::new(0.25, 0.0));
    }

    #[test]
    fn odd_powers_go_to_remainder() {
        let l = lattice();
        let t = l.tangential_index[0] as u32;
        let g = full(&l, &[(t, 1)], &[]);
        let aa = to_action_angle(&g, &l, &[0.0], 8, 8).unwrap();
        assert!(aa.series.is_empty());
        assert_eq!(aa.odd_mass, 1.0);
    }

    #[test]
    fn angle_index_counts_conjugates() {
        let l = lattice();
        let t = l.tangential_index[0] as u32;
        let g = full(&l, &[(t, 3)], &[(t, 1)]);
        let aa = to_action_angle(&g, &l, &[0.0], 8, 8).unwrap();
        let m = Monomial::new(&[2], &[2], &[], &[]).unwrap();
        assert_eq!(aa.series.get(&m), C64::new(1.0, 0.0));
    }
}
