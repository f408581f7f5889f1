from ._nets import greedy_epsilon_net, covering_radius, sample_l1_ball, maurey_check, net_dimension_slope
from ._srec import srec_gamma, concentration_check, concentration_bound, apply_rows
from ._theorem import TheoryInstance, make_theory_instance, l1_ball_candidates, recovery_bound_check, \
    recovery_bound_trials, MAX_CANDIDATES
from ._verify import verify_theory, manifold_points, CHECKS, STATUS_PASS, STATUS_FAIL
