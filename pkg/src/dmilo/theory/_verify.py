import logging

import numpy as np

from dmilo.api import ExperimentConfig, gaussian_operator
from ._nets import maurey_check, net_dimension_slope
from ._srec import concentration_check, srec_gamma
from ._theorem import recovery_bound_trials

_logger = logging.getLogger("dmilo.theory")

STATUS_PASS = "pass"
STATUS_FAIL = "fail"


def _status(ok: bool) -> str:
    return STATUS_PASS if ok else STATUS_FAIL


def manifold_points(ambient: int, latent_dim: int, samples: int, seed: int) -> np.ndarray:
    """
    Samples a latent_dim-dimensional tanh manifold embedded in R^ambient.
    """
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal((ambient, latent_dim))
    z = rng.uniform(-1.0, 1.0, (samples, latent_dim))
    return np.tanh(z @ weights.T)


def check_nets(b: dict) -> dict:
    points = manifold_points(b["net_ambient"], b["latent_dim"], b["net_samples"], b["seed"])
    result = net_dimension_slope(points, b["net_eps"])
    result["max_slope"] = b["net_max_slope"]
    result["status"] = _status(result["slope"] <= b["net_max_slope"])
    return result


def check_maurey(b: dict) -> dict:
    result = maurey_check(b["maurey_n"], b["maurey_r"], b["maurey_L1"], b["maurey_delta"], b["maurey_samples"], seed=b["seed"])
    result["status"] = _status(result["holds"])
    return result


def check_concentration(b: dict) -> dict:
    runs = [concentration_check(b["concentration_n"], m, b["concentration_eps"], b["concentration_trials"], b["seed"])
            for m in b["concentration_m"]]
    within = all(r["failure_rate"] <= r["bound"] for r in runs)
    rates = [r["failure_rate"] for r in sorted(runs, key=lambda r: r["m"])]
    monotone = all(rates[i + 1] <= rates[i] for i in range(len(rates) - 1))
    return {
        "runs": runs,
        "within_bound": within,
        "monotone": monotone,
        "status": _status(within and monotone),
    }


def check_srec(b: dict) -> dict:
    gammas = []
    for t in range(b["srec_trials"]):
        points = manifold_points(b["srec_n"], b["latent_dim"], b["srec_points"], int(np.random.SeedSequence([b["seed"], t]).generate_state(1)[0]))
        A = gaussian_operator(b["srec_m"], b["srec_n"], [b["seed"], t, 3])
        gammas.append(srec_gamma(A, points, 0.0))
    passed = sum(1 for g in gammas if g >= b["srec_min_gamma"])
    return {
        "trials": b["srec_trials"],
        "min_gamma": b["srec_min_gamma"],
        "passed": passed,
        "median_gamma": float(np.median(gammas)),
        "status": _status(passed >= b["srec_min_pass"]),
    }


def check_recovery_bound(b: dict) -> dict:
    reports = recovery_bound_trials(b["instances"], b["seed"], n=b["n"], latent_dim=b["latent_dim"], m=b["m"],
                              delta=b["delta"], k=b["k"], tau=b["tau"], N=b["N"], latent_grid=b["latent_grid"],
                              offset=b["offset"], gamma_points=b["gamma_points"])
    passed = sum(1 for r in reports if r["holds"])
    return {
        "instances": len(reports),
        "passed": passed,
        "min_pass": b["min_pass"],
        "median_gamma": float(np.median([r["gamma"] for r in reports])),
        "reports": reports,
        "status": _status(passed >= b["min_pass"]),
    }


CHECKS = [
    ("epsilon_net", check_nets),
    ("maurey", check_maurey),
    ("concentration", check_concentration),
    ("srec", check_srec),
    ("recovery_bound", check_recovery_bound),
]


def verify_theory(cfg: ExperimentConfig, checks=None) -> dict:
    """
    Runs the empirical checks configured in the theory block.

    :param cfg: the configuration
    :type cfg: ExperimentConfig
    :param checks: the names of the checks to run, all if None
    :type checks: list
    :return: the report, with a status per check and overall
    :rtype: dict
    """
    b = cfg.theory
    result = {"config_hash": cfg.hash(), "checks": dict()}
    for name, func in CHECKS:
        if (checks is not None) and (name not in checks):
            continue
        _logger.info("Running check: %s" % name)
        result["checks"][name] = func(b)
        _logger.info("Check %s: %s" % (name, result["checks"][name]["status"]))
    result["status"] = _status(all(c["status"] == STATUS_PASS for c in result["checks"].values()))
    return result
