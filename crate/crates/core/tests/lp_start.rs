use vpp_bidding::cadmmb::evaluate_dual_lower_bound;
use vpp_bidding::centralized::{assemble_centralized, initial_lower_bound, solve_centralized};
use vpp_bidding::consensus::{lp_start, ConsensusProblem, ConsensusState};
use vpp_bidding::presets;
use vpp_bidding::solver::SolveOptions;

#[test]
fn consensus_lp_matches_the_centralized_relaxation() {
    let (c, s) = presets::random_desk_instance(1).unwrap();
    let inst = assemble_centralized(&c, &s).unwrap();
    let lp = initial_lower_bound(&inst, &SolveOptions::default()).unwrap();
    let problem = ConsensusProblem::new(&c, &s).unwrap();
    let mut state = ConsensusState::new(problem.dims(), 1.0);
    let v = lp_start(&problem, &mut state).unwrap();
    assert!((v - lp).abs() <= 1e-6 * lp.abs(), "{v} vs {lp}");
    assert_eq!(state.zero_sum_violation(), 0.0);
    // copies start in consensus
    let (primal, _) = state.consensus_residuals();
    assert!(primal < 1e-5, "{primal}");
}

#[test]
fn lagrangian_bound_at_lp_duals_lies_between_lp_and_optimum() {
    let c = presets::toy_cascade(6, 3);
    let s = presets::toy_scenarios(&c, 2, 5).unwrap();
    let inst = assemble_centralized(&c, &s).unwrap();
    let j = solve_centralized(&inst, &SolveOptions::default()).unwrap().objective;
    let problem = ConsensusProblem::new(&c, &s).unwrap();
    let mut state = ConsensusState::new(problem.dims(), 1.0);
    let lp = lp_start(&problem, &mut state).unwrap();
    let d = evaluate_dual_lower_bound(&problem, &state, 1).unwrap().unwrap();
    let tol = 1e-6 * j.abs();
    assert!(lp <= d + tol, "LP {lp} above D {d}");
    assert!(d <= j + tol, "D {d} above J* {j}");
}
