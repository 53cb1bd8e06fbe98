//! The skew product `T(x, y) = (A x, y g_{f(x)})` on the torus times the unit tangent bundle.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::fiber::{BumpObservable, FlowLine, Frame, FuchsianGroup};
use crate::mc;
use crate::stats::EmpiricalLaw;
use crate::torus::{ToralAutomorphism, TorusPoint, TrigObservable};

/// A point of the product space. `fiber` is always kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewState {
    pub base: TorusPoint,
    pub fiber: Frame,
}

impl SkewState {
    /// Draws from Lebesgue times normalised Haar measure.
    pub fn sample<R: rand::Rng + ?Sized>(group: &FuchsianGroup, rng: &mut R) -> Result<Self, GeometryError> {
        let base = TorusPoint::uniform(rng);
        let fiber = group.sample_haar(rng)?.frame;
        Ok(Self { base, fiber })
    }
}

#[derive(Debug, Clone)]
pub struct SkewSystem {
    automorphism: ToralAutomorphism,
    roof: TrigObservable,
    group: FuchsianGroup,
}

impl SkewSystem {
    pub fn new(automorphism: ToralAutomorphism, roof: TrigObservable, group: FuchsianGroup) -> Self {
        Self {
            automorphism,
            roof,
            group,
        }
    }

    /// Cat map base, `f = sin(2 pi x1)`, octagon fiber.
    pub fn example() -> Self {
        Self::new(ToralAutomorphism::cat_map(), TrigObservable::sin_x1(), FuchsianGroup::bolza())
    }

    pub fn automorphism(&self) -> &ToralAutomorphism {
        &self.automorphism
    }

    pub fn roof(&self) -> &TrigObservable {
        &self.roof
    }

    pub fn group(&self) -> &FuchsianGroup {
        &self.group
    }

    /// One application of `T`; the flow time is `f` at the point before it moves.
    #[inline]
    pub fn step(&self, s: &SkewState) -> Result<SkewState, GeometryError> {
        let t = self.roof.eval(&s.base);
        Ok(SkewState {
            base: self.automorphism.apply(&s.base),
            fiber: self.group.flow_reduced(&s.fiber, t)?,
        })
    }

    /// `T^n(x, y) = (A^n x, y g_{S_n f(x)})`, evaluated the same way as in [`Self::birkhoff_partial_sums`].
    pub fn iterate(&self, s: &SkewState, n: usize) -> Result<SkewState, GeometryError> {
        let mut x = s.base;
        let mut total = 0.0;
        for _ in 0..n {
            total += self.roof.eval(&x);
            x = self.automorphism.apply(&x);
        }
        Ok(SkewState {
            base: x,
            fiber: FlowLine::new(&self.group, s.fiber).at(total)?,
        })
    }

    /// `sum_{k<n} phi(T^k s)` in one pass.
    pub fn birkhoff_sum(&self, phi: &SkewObservable, s: &SkewState, n: usize) -> Result<f64, GeometryError> {
        let mut acc = 0.0;
        self.birkhoff_partial_sums(phi, s, n, |k, v| {
            if k == n {
                acc = v;
            }
        })?;
        Ok(acc)
    }

    /// Runs the orbit for `n` steps and calls `visit(k, sum_{j<k} phi(T^j s))` for `k = 1..=n`.
    pub fn birkhoff_partial_sums(
        &self,
        phi: &SkewObservable,
        s: &SkewState,
        n: usize,
        mut visit: impl FnMut(usize, f64),
    ) -> Result<(), GeometryError> {
        // fiber points are read off one tabulated orbit, see `FlowLine`
        let mut line = FlowLine::new(&self.group, s.fiber);
        let mut cur = *s;
        let mut t = 0.0;
        let mut acc = 0.0;
        for k in 1..=n {
            acc += phi.eval(&cur);
            visit(k, acc);
            if k < n {
                t += self.roof.eval(&cur.base);
                cur = SkewState {
                    base: self.automorphism.apply(&cur.base),
                    fiber: line.at(t)?,
                };
            }
        }
        Ok(())
    }

    /// Normalised Birkhoff sums `n^{-exponent} sum_{k<n} phi o T^k` over product-measure starts.
    pub fn sample_normalized_sums(
        &self,
        phi: &SkewObservable,
        n: usize,
        samples: usize,
        seed: u64,
        exponent: f64,
    ) -> Result<EmpiricalLaw, GeometryError> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(GeometryError::InvalidArgument(format!("exponent {exponent} must lie in (0, 1]")));
        }
        if samples == 0 {
            return Err(GeometryError::InvalidArgument("samples must be >= 1".into()));
        }
        let scale = (n.max(1) as f64).powf(-exponent);
        let values: Result<Vec<f64>, GeometryError> = mc::par_samples(seed, samples, |_, rng| {
            let s = SkewState::sample(&self.group, rng)?;
            Ok(self.birkhoff_sum(phi, &s, n)? * scale)
        })
        .into_iter()
        .collect();
        Ok(EmpiricalLaw::new(values?, n, exponent, seed).expect("finite non-empty sample"))
    }
}

/// `phi(x, y) = phi_fiber(y) + phi_base(x)`. The base term exists to exercise the degenerate
/// direction where the fiber part vanishes.
#[derive(Debug, Clone)]
pub struct SkewObservable {
    pub fiber: BumpObservable,
    pub base: Option<TrigObservable>,
}

impl SkewObservable {
    pub fn fiber_only(fiber: BumpObservable) -> Self {
        Self { fiber, base: None }
    }

    /// A base-only observable (the fiber bump has amplitude zero).
    pub fn base_only(group: &FuchsianGroup, base: TrigObservable) -> Self {
        Self {
            fiber: BumpObservable::zero(group),
            base: Some(base),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.fiber.is_zero() && self.base.as_ref().is_none_or(|b| b.is_zero())
    }

    #[inline]
    pub fn eval(&self, s: &SkewState) -> f64 {
        let mut v = self.fiber.eval(&s.fiber);
        if let Some(b) = &self.base {
            v += b.eval(&s.base);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{flow, BumpParams, FlowTime};
    use crate::mc::Estimate;
    use crate::torus::{ergodic_sum, TrigTerm};
    use proptest::prelude::*;

    fn system_and_phi() -> (SkewSystem, SkewObservable) {
        let sys = SkewSystem::example();
        let phi = SkewObservable::fiber_only(BumpObservable::new(sys.group(), BumpParams::default()).unwrap());
        (sys, phi)
    }

    fn start(seed: u64) -> SkewState {
        SkewState::sample(&FuchsianGroup::bolza(), &mut mc::stream(seed, 0)).unwrap()
    }

    #[test]
    fn zero_roof_is_a_direct_product() {
        let sys = SkewSystem::new(ToralAutomorphism::cat_map(), TrigObservable::zero(), FuchsianGroup::bolza());
        let s = start(1);
        let t = sys.step(&s).unwrap();
        assert_eq!(t.fiber, s.fiber);
        assert_eq!(t.base, ToralAutomorphism::cat_map().apply(&s.base));
    }

    #[test]
    fn fixed_point_freezes_the_fiber() {
        let sys = SkewSystem::example();
        let mut s = SkewState {
            base: TorusPoint::origin(),
            ..start(2)
        };
        let y0 = s.fiber;
        for _ in 0..100 {
            s = sys.step(&s).unwrap();
        }
        assert_eq!(s.fiber, y0);
        assert_eq!(s.base, TorusPoint::origin());
    }

    #[test]
    fn iterate_matches_stepping() {
        let sys = SkewSystem::example();
        let s = start(3);
        let mut by_step = s;
        for _ in 0..10 {
            by_step = sys.step(&by_step).unwrap();
        }
        let it = sys.iterate(&s, 10).unwrap();
        assert_eq!(it.base, by_step.base);
        assert!(it.fiber.approx_eq(&by_step.fiber, 1e-8));
    }

    #[test]
    fn iterate_edge_cases() {
        let sys = SkewSystem::example();
        let s = start(4);
        assert_eq!(sys.iterate(&s, 0).unwrap(), s);
        let one = sys.iterate(&s, 1).unwrap();
        let st = sys.step(&s).unwrap();
        assert_eq!(one.base, st.base);
        assert!(one.fiber.approx_eq(&st.fiber, 1e-12));
    }

    #[test]
    fn flow_time_stays_below_clt_scale() {
        let sys = SkewSystem::example();
        let n = 1000;
        for seed in 0..100 {
            let x = TorusPoint::uniform(&mut mc::stream(seed, 7));
            let t = ergodic_sum(sys.automorphism(), sys.roof(), &x, n);
            assert!(t.abs() < (n as f64).powf(0.6), "seed {seed}: {t}");
        }
    }

    #[test]
    fn birkhoff_sum_matches_quadratic_oracle() {
        let (sys, phi) = system_and_phi();
        for seed in 0..5 {
            let s = start(100 + seed);
            let fast = sys.birkhoff_sum(&phi, &s, 64).unwrap();
            let mut naive = 0.0;
            for k in 0..64 {
                let mut x = s.base;
                let mut t = 0.0;
                for _ in 0..k {
                    t += sys.roof().eval(&x);
                    x = sys.automorphism().apply(&x);
                }
                let y = sys.group().flow_reduced(&s.fiber, t).unwrap();
                naive += phi.eval(&SkewState { base: x, fiber: y });
            }
            assert!((fast - naive).abs() < 1e-7, "{fast} vs {naive}");
        }
    }

    #[test]
    fn partial_sums_read_the_same_states_as_iterate() {
        let (sys, phi) = system_and_phi();
        let s = start(6);
        let n = 3000;
        let mut sums = Vec::new();
        sys.birkhoff_partial_sums(&phi, &s, n, |_, v| sums.push(v)).unwrap();
        let mut acc = 0.0;
        for k in 0..n {
            acc += phi.eval(&sys.iterate(&s, k).unwrap());
            if k % 500 == 499 {
                assert_eq!(acc, sums[k], "k={k}");
            }
        }
    }

    #[test]
    fn birkhoff_sum_trivial_cases() {
        let (sys, phi) = system_and_phi();
        let s = start(5);
        assert_eq!(sys.birkhoff_sum(&phi, &s, 0).unwrap(), 0.0);
        let zero = SkewObservable::fiber_only(BumpObservable::zero(sys.group()));
        assert_eq!(sys.birkhoff_sum(&zero, &s, 50).unwrap(), 0.0);
    }

    #[test]
    fn zero_observable_law_is_all_zero() {
        let sys = SkewSystem::example();
        let zero = SkewObservable::fiber_only(BumpObservable::zero(sys.group()));
        let law = sys.sample_normalized_sums(&zero, 64, 50, 9, 0.75).unwrap();
        assert!(law.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalized_sums_are_centered_and_nondegenerate() {
        let (sys, phi) = system_and_phi();
        let law = sys.sample_normalized_sums(&phi, 256, 4000, 10, 0.75).unwrap();
        let e = Estimate::from_samples(law.values());
        assert!(e.within(0.0, 3.0), "{e:?}");
        assert!(law.variance() > 0.0);
    }

    #[test]
    fn measure_invariance() {
        let (sys, phi) = system_and_phi();
        let phi = SkewObservable {
            base: Some(
                TrigObservable::new(vec![TrigTerm {
                    freq: (0, 1),
                    cos: 0.5,
                    sin: 0.0,
                }])
                .unwrap(),
            ),
            ..phi
        };
        let pairs: Vec<(f64, f64)> = mc::par_samples(77, 100_000, |_, rng| {
            let s = SkewState::sample(sys.group(), rng).unwrap();
            (phi.eval(&s), phi.eval(&sys.step(&s).unwrap()))
        });
        let a = Estimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let b = Estimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= 3.0 * se, "{a:?} vs {b:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cocycle_property(seed in 0u64..10_000, m in 0usize..200, n in 0usize..200) {
            let sys = SkewSystem::example();
            let s = start(seed);
            let whole = sys.iterate(&s, m + n).unwrap();
            let split = sys.iterate(&sys.iterate(&s, m).unwrap(), n).unwrap();
            prop_assert!(whole.base.torus_distance(&split.base) < 1e-7);
            // on the lift the cocycle identity holds at any flow time
            let t_all = ergodic_sum(sys.automorphism(), sys.roof(), &s.base, m + n);
            let t_m = ergodic_sum(sys.automorphism(), sys.roof(), &s.base, m);
            let t_n = ergodic_sum(sys.automorphism(), sys.roof(), &sys.iterate(&s, m).unwrap().base, n);
            let lifted = flow(&s.fiber, FlowTime(t_all)).unwrap();
            let two = flow(&flow(&s.fiber, FlowTime(t_m)).unwrap(), FlowTime(t_n)).unwrap();
            prop_assert!(lifted.approx_eq(&two, 1e-9));
            // on the quotient, rounding is stretched by e^{|t|} along the flow, so the
            // 1e-7 comparison is only meaningful while e^{|t|} * 1e-16 stays far below it
            if t_m.abs().max(t_all.abs()) <= 15.0 {
                prop_assert!(whole.fiber.approx_eq(&split.fiber, 1e-7));
            }
        }
    }
}
