//! Parameter lifting of the template over rectangular regions.
//!
//! Every state of the template is relaxed independently: each of its actions
//! becomes a bundle of vertex rows, one per corner of the region projected
//! onto the parameters that occur locally. Because rewards and probabilities
//! are multilinear, the optimum of every one-step backup over the region is
//! attained at one of these corners, so the resulting game brackets the value
//! of every instantiation.

use crate::error::{Error, Result};
use crate::model::{
    ExitMode, Pmdp, Region, ResultBounds, ResultVector, Template, Valuation, MAX_VERTEX_PARAMS,
};
use crate::numerics::{
    expected_reward_under, game_value_iteration, max_expected_reward, max_reachability, Objective,
    Role, SolverConfig, VertexGame, VertexGameBuilder,
};

/// The vertex game of a pMDP over a region, with the map from game actions
/// back to the original `(state, action)` pairs.
#[derive(Debug, Clone)]
pub struct VertexRelaxation {
    game: VertexGame,
    origin: Vec<(usize, usize)>,
}

impl VertexRelaxation {
    /// Fails with `NotWellDefined` or `GraphChange` if the region is not
    /// admissible for `pmdp`, and with `TooManyParameters` if a state
    /// depends on more than 16 parameters that vary inside the region.
    pub fn build(pmdp: &Pmdp, region: &Region) -> Result<Self> {
        pmdp.check_region(region)?;
        let mut b = VertexGameBuilder::new();
        let mut origin = Vec::new();
        for s in 0..pmdp.num_states() {
            b.push_state(pmdp.is_target(s));
            if pmdp.is_target(s) {
                continue;
            }
            let local = pmdp.local_params(s);
            let free = local
                .iter()
                .filter(|&&k| region.interval(k as usize).width() > 0.0)
                .count();
            if free > MAX_VERTEX_PARAMS {
                return Err(Error::TooManyParameters {
                    state: s,
                    count: free,
                    max: MAX_VERTEX_PARAMS,
                });
            }
            let corners = region.local_vertices(&local);
            for (a, choice) in pmdp.choices(s).iter().enumerate() {
                b.push_action();
                origin.push((s, a));
                for u in &corners {
                    let reward = pmdp.reward(s).eval(u).max(0.0);
                    let row = choice
                        .transitions
                        .iter()
                        .map(|(t, e)| (*t, e.eval(u).clamp(0.0, 1.0)));
                    b.push_vertex(reward, row);
                }
            }
        }
        Ok(VertexRelaxation {
            game: b.build(pmdp.initial()),
            origin,
        })
    }

    pub fn game(&self) -> &VertexGame {
        &self.game
    }

    /// The template state and action index a game action was built from.
    pub fn original_action(&self, game_action: usize) -> (usize, usize) {
        self.origin[game_action]
    }
}

/// Smallest box containing every valuation.
pub fn to_region<'a, I>(valuations: I) -> Result<Region>
where
    I: IntoIterator<Item = &'a Valuation>,
{
    let mut it = valuations.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::InvalidArgument("cannot bound an empty set of valuations".into()))?;
    let mut lower = first.values().to_vec();
    let mut upper = lower.clone();
    for v in it {
        if v.len() != lower.len() {
            return Err(Error::InvalidArgument(format!(
                "valuations of different arity ({} and {})",
                lower.len(),
                v.len()
            )));
        }
        for (k, &x) in v.values().iter().enumerate() {
            lower[k] = lower[k].min(x);
            upper[k] = upper[k].max(x);
        }
    }
    Region::new(lower, upper).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Bounds valid for the result vector of every instantiation in `region`.
///
/// The reward lower bound lets the controller maximize against minimizing
/// vertices; in success-target mode the subMDP policy is fixed by the success
/// objective instead, so both players minimize. Upper bounds let both
/// maximize. Residuals widen every bound.
pub fn bound_results_for_set(
    template: &Template,
    region: &Region,
    mode: ExitMode,
    cfg: &SolverConfig,
) -> Result<ResultBounds> {
    let relax = VertexRelaxation::build(template.pmdp(), region)?;
    let game = relax.game();
    let entry = template.entry();
    let solve = |a: Role, v: Role, obj: &Objective| -> Result<(f64, f64)> {
        let vv = game_value_iteration(game, a, v, obj, cfg)?;
        Ok((vv.at(entry), vv.residual))
    };
    let low_actions = match mode {
        ExitMode::Single => Role::Max,
        ExitMode::SuccessTarget { .. } => Role::Min,
    };
    let (lo, lo_res) = solve(low_actions, Role::Min, &Objective::Reward)?;
    let (hi, hi_res) = solve(Role::Max, Role::Max, &Objective::Reward)?;
    let reward = ((lo - lo_res).max(0.0), hi + hi_res);
    let (lower_probs, upper_probs) = match mode {
        ExitMode::Single => (vec![1.0], vec![1.0]),
        ExitMode::SuccessTarget { success_exit } => {
            let goal = exit_mask(template, success_exit);
            let reach = Objective::Reach(goal);
            let (pl, pl_res) = solve(Role::Max, Role::Min, &reach)?;
            let (pu, pu_res) = solve(Role::Max, Role::Max, &reach)?;
            let s_lo = (pl - pl_res).clamp(0.0, 1.0);
            let s_hi = (pu + pu_res).clamp(0.0, 1.0);
            let mut lower = vec![0.0; 2];
            let mut upper = vec![0.0; 2];
            lower[success_exit] = s_lo;
            upper[success_exit] = s_hi;
            lower[1 - success_exit] = 1.0 - s_hi;
            upper[1 - success_exit] = 1.0 - s_lo;
            (lower, upper)
        }
    };
    Ok(ResultBounds {
        lower: ResultVector::new(lower_probs, reward.0),
        upper: ResultVector::new(upper_probs, reward.1),
    })
}

fn exit_mask(template: &Template, j: usize) -> Vec<bool> {
    let mut goal = vec![false; template.pmdp().num_states()];
    goal[template.exits()[j]] = true;
    goal
}

/// The exact result vector of the subMDP at valuation `v`.
///
/// In single-exit mode this is the maximal expected reward. In success-target
/// mode the policy maximizes the probability of the success exit (ties to the
/// lowest action index) and the reward is the one it accrues.
pub fn check_one(
    template: &Template,
    v: &Valuation,
    mode: ExitMode,
    cfg: &SolverConfig,
) -> Result<ResultVector> {
    let mdp = template.instantiate(v)?;
    let entry = template.entry();
    match mode {
        ExitMode::Single => {
            let (val, _) = max_expected_reward(&mdp, cfg)?;
            Ok(ResultVector::new(vec![1.0], val.at(entry)))
        }
        ExitMode::SuccessTarget { success_exit } => {
            let goal = exit_mask(template, success_exit);
            let (reach, policy) = max_reachability(&mdp, &goal, cfg)?;
            let reward = expected_reward_under(&mdp, &policy, cfg)?;
            let p = reach.at(entry).clamp(0.0, 1.0);
            let mut probs = vec![0.0; 2];
            probs[success_exit] = p;
            probs[1 - success_exit] = 1.0 - p;
            Ok(ResultVector::new(probs, reward.at(entry)))
        }
    }
}

/// A set of call indices sharing one set of cached bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBinding {
    pub calls: Vec<usize>,
    pub bounds: ResultBounds,
}

impl TemplateBinding {
    pub fn new(calls: Vec<usize>, bounds: ResultBounds) -> Self {
        TemplateBinding { calls, bounds }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    /// Smallest box containing the members' valuations.
    pub fn region(&self, valuation: impl Fn(usize) -> Valuation) -> Result<Region> {
        let vals: Vec<Valuation> = self.calls.iter().map(|&i| valuation(i)).collect();
        to_region(&vals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coeff, MultilinearExpr, PmdpBuilder};
    use proptest::prelude::*;

    fn one_minus(k: u32) -> MultilinearExpr {
        MultilinearExpr::one()
            .sub(&MultilinearExpr::var(k))
            .unwrap()
    }

    fn token() -> Template {
        let mut b = PmdpBuilder::new(vec!["p".into()]);
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let s2 = b.add_state("s2");
        let p = MultilinearExpr::var(0);
        b.add_choice(s0, "go", vec![(s1, p.clone()), (s0, one_minus(0))]);
        b.add_choice(s1, "go", vec![(s2, p), (s1, one_minus(0))]);
        b.set_reward(s0, MultilinearExpr::one());
        b.set_reward(s1, MultilinearExpr::one());
        b.set_target(s2, true);
        let admissible = Region::new(vec![0.05], vec![0.95]).unwrap();
        Template::new(b.build(s0), vec![s2], admissible)
    }

    /// Two actions at the entry: `safe` (success w.p. p) and `risky`
    /// (success w.p. q, reward q), both retrying from a loop state that
    /// fails w.p. 1/4.
    fn two_exit() -> Template {
        let mut b = PmdpBuilder::new(vec!["p".into(), "q".into()]);
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let ok = b.add_state("ok");
        let fail = b.add_state("fail");
        let p = MultilinearExpr::var(0);
        let q = MultilinearExpr::var(1);
        b.add_choice(s0, "safe", vec![(ok, p.clone()), (s1, one_minus(0))]);
        b.add_choice(s0, "risky", vec![(ok, q.clone()), (s1, one_minus(1))]);
        let quarter = MultilinearExpr::constant(Coeff::new(1, 4));
        b.add_choice(
            s1,
            "retry",
            vec![
                (s0, quarter.clone()),
                (fail, quarter.clone()),
                (ok, MultilinearExpr::constant(Coeff::new(1, 2))),
            ],
        );
        b.set_reward(s0, MultilinearExpr::one().add(&q).unwrap());
        b.set_reward(s1, MultilinearExpr::one());
        b.set_target(ok, true);
        b.set_target(fail, true);
        let admissible = Region::new(vec![0.1, 0.1], vec![0.9, 0.9]).unwrap();
        Template::new(b.build(s0), vec![ok, fail], admissible)
    }

    fn region(lo: f64, hi: f64) -> Region {
        Region::new(vec![lo], vec![hi]).unwrap()
    }

    #[test]
    fn token_bounds_over_all_six_calls() {
        let vals: Vec<Valuation> = [0.5, 0.4, 0.625, 0.32, 0.5, 0.78125]
            .iter()
            .map(|&p| Valuation::new(vec![p]))
            .collect();
        let r = to_region(&vals).unwrap();
        assert_eq!(r.interval(0).lo, 0.32);
        assert_eq!(r.interval(0).hi, 0.78125);
        let b = bound_results_for_set(&token(), &r, ExitMode::Single, &SolverConfig::default())
            .unwrap();
        assert!((b.lower.reward - 2.56).abs() < 1e-7);
        assert!((b.upper.reward - 6.25).abs() < 1e-7);
        assert_eq!(b.lower.probs, vec![1.0]);
    }

    #[test]
    fn token_bounds_on_upper_half() {
        let b = bound_results_for_set(
            &token(),
            &region(0.5, 0.78125),
            ExitMode::Single,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((b.lower.reward - 2.56).abs() < 1e-7);
        assert!((b.upper.reward - 4.0).abs() < 1e-7);
    }

    #[test]
    fn point_region_collapses() {
        let b = bound_results_for_set(
            &token(),
            &region(0.4, 0.4),
            ExitMode::Single,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((b.lower.reward - 5.0).abs() < 2e-8);
        assert!((b.upper.reward - 5.0).abs() < 2e-8);
    }

    #[test]
    fn check_one_token_values() {
        let cfg = SolverConfig::default();
        for (p, want) in [(0.5, 4.0), (25.0 / 32.0, 64.0 / 25.0), (0.625, 3.2)] {
            let r = check_one(&token(), &Valuation::new(vec![p]), ExitMode::Single, &cfg).unwrap();
            assert!((r.reward - want).abs() < 1e-7, "p = {p}");
            assert_eq!(r.probs, vec![1.0]);
        }
    }

    #[test]
    fn to_region_is_componentwise() {
        let vals = [
            Valuation::new(vec![0.2, 0.9]),
            Valuation::new(vec![0.4, 0.1]),
        ];
        let r = to_region(&vals).unwrap();
        assert_eq!(r.lower(), &[0.2, 0.1]);
        assert_eq!(r.upper(), &[0.4, 0.9]);
        assert!(to_region(&[]).is_err());
    }

    #[test]
    fn graph_changing_region_rejected() {
        let r = bound_results_for_set(
            &token(),
            &region(0.0, 0.5),
            ExitMode::Single,
            &SolverConfig::default(),
        );
        assert!(matches!(r, Err(Error::GraphChange(_))));
    }

    #[test]
    fn success_target_check_one() {
        // p = 0.6, q = 0.3: safe wins on success probability.
        // x = p + (1-p)(x/4 + 1/2)  =>  x = (p + (1-p)/2) / (1 - (1-p)/4)
        let (p, q) = (0.6, 0.3);
        let x = (p + (1.0 - p) / 2.0) / (1.0 - (1.0 - p) / 4.0);
        // reward: r0 = 1 + q + (1-p) r1, r1 = 1 + r0/4
        let r0 = (1.0 + q + (1.0 - p)) / (1.0 - (1.0 - p) / 4.0);
        let mode = ExitMode::SuccessTarget { success_exit: 0 };
        let r = check_one(
            &two_exit(),
            &Valuation::new(vec![p, q]),
            mode,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((r.probs[0] - x).abs() < 1e-7);
        assert!((r.probs[1] - (1.0 - x)).abs() < 1e-7);
        assert!((r.reward - r0).abs() < 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sampled_token_values_lie_inside_bounds(a in 0.05f64..0.95, b in 0.05f64..0.95, t in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let cfg = SolverConfig::default();
            let bounds = bound_results_for_set(&token(), &region(lo, hi), ExitMode::Single, &cfg).unwrap();
            let v = Valuation::new(vec![lo + t * (hi - lo)]);
            let r = check_one(&token(), &v, ExitMode::Single, &cfg).unwrap();
            prop_assert!(bounds.contains(&r, 2e-8));
        }

        #[test]
        fn sampled_two_exit_values_lie_inside_bounds(
            p0 in 0.1f64..0.9, p1 in 0.1f64..0.9, q0 in 0.1f64..0.9, q1 in 0.1f64..0.9,
            s in 0.0f64..=1.0, t in 0.0f64..=1.0,
        ) {
            let r = Region::new(vec![p0.min(p1), q0.min(q1)], vec![p0.max(p1), q0.max(q1)]).unwrap();
            let cfg = SolverConfig::default();
            let mode = ExitMode::SuccessTarget { success_exit: 0 };
            let bounds = bound_results_for_set(&two_exit(), &r, mode, &cfg).unwrap();
            let v = Valuation::new(vec![
                r.lower()[0] + s * r.interval(0).width(),
                r.lower()[1] + t * r.interval(1).width(),
            ]);
            let exact = check_one(&two_exit(), &v, mode, &cfg).unwrap();
            prop_assert!(bounds.contains(&exact, 2e-8), "{bounds:?} vs {exact:?}");
        }

        #[test]
        fn shrinking_region_tightens_bounds(a in 0.05f64..0.95, b in 0.05f64..0.95, s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let x = lo + s * (hi - lo);
            let y = x + t * (hi - x);
            let cfg = SolverConfig::default();
            let outer = bound_results_for_set(&token(), &region(lo, hi), ExitMode::Single, &cfg).unwrap();
            let inner = bound_results_for_set(&token(), &region(x, y), ExitMode::Single, &cfg).unwrap();
            prop_assert!(inner.lower.reward >= outer.lower.reward - 2e-8);
            prop_assert!(inner.upper.reward <= outer.upper.reward + 2e-8);
        }
    }
}
