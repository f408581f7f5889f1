import copy
import hashlib
import json
import logging
import os
from typing import Any

from ._errors import ConfigurationError
from ._metrics import LAYOUTS, LAYOUT_GRID
from ._operators import TASK_KINDS, KIND_INPAINT, KIND_DOWNSAMPLE, KIND_NONLINEAR, KIND_BLIND_DEBLUR, \
    KIND_IDENTITY, KIND_DEBLUR, KIND_GAUSSIAN, ForwardOperator, make_operator, make_kernel, Kernel
from ._optim import MODES
from ._prior import GmmPrior, make_toy_prior, prior_from_dict, load_prior
from ._schedule import Schedule, make_schedule

_logger = logging.getLogger("dmilo.config")

SOLVER_DMILO = "dmilo"
SOLVER_DMILO_PGD = "dmilo_pgd"
SOLVER_DMPLUG = "dmplug"
SOLVER_DMILO_BID = "dmilo_bid"
SOLVER_DMILO_PGD_BID = "dmilo_pgd_bid"
SOLVER_KINDS = [SOLVER_DMILO, SOLVER_DMILO_PGD, SOLVER_DMPLUG, SOLVER_DMILO_BID, SOLVER_DMILO_PGD_BID]
BLIND_SOLVER_KINDS = [SOLVER_DMILO_BID, SOLVER_DMILO_PGD_BID]

PROJECTION_MEASUREMENT = "measurement"
PROJECTION_DISTANCE = "distance"
PROJECTIONS = [PROJECTION_MEASUREMENT, PROJECTION_DISTANCE]

SOURCE_PRIOR = "prior"
SOURCE_RANGE = "range"
SOURCES = [SOURCE_PRIOR, SOURCE_RANGE]

# inner iterations, outer iterations, gradient step size (None: 1/L of the current kernel)
TASK_DEFAULTS = {
    KIND_IDENTITY: (200, 5, 0.5),
    KIND_INPAINT: (200, 5, 0.5),
    KIND_DEBLUR: (200, 5, 0.5),
    KIND_GAUSSIAN: (200, 5, 0.5),
    KIND_DOWNSAMPLE: (400, 10, 8.0),
    KIND_NONLINEAR: (200, 5, 0.3),
    KIND_BLIND_DEBLUR: (200, 10, None),
}

# dimension up to which the default inner iteration counts get scaled down
SMALL_DIM = 16
REFERENCE_DIM = 64

DEFAULTS = {
    "schedule": {
        "beta0": 0.1,
        "beta1": 20.0,
        "epsilon": 1e-3,
        "T": 1.0,
        "N": 3,
    },
    "prior": {
        "K": 5,
        "n": 16,
        "tau": 0.1,
        "seed": 0,
        "path": None,
        "means": None,
        "weights": None,
        "stddevs": None,
    },
    "task": {
        "kind": KIND_IDENTITY,
        "source": SOURCE_PRIOR,
        "sigma": 0.0,
        "keep_fraction": 0.3,
        "factor": 4,
        "kernel": "gaussian",
        "kernel_size": 5,
        "kernel_width": 1.0,
        "m": None,
        "gain": 1.0,
        "spike_count": 0,
        "spike_magnitude": 0.5,
        "layout": "flat",
        "grid": None,
        "peak": None,
        "seed": 0,
    },
    "optim": {
        "inner_lr": None,
        "inner_iters": None,
        "lam": 0.1,
        "l2_weight": 1e-3,
        "mode": "subgradient",
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
    },
    "solver": {
        "kind": SOLVER_DMILO,
        "outer_iters": None,
        "eta": None,
        "eta_x": None,
        "eta_k": None,
        "inner_lr_k": None,
        "last_timestep_only": False,
        "sparse_deviation": True,
        "projection": PROJECTION_MEASUREMENT,
        "normalize_kernel": False,
        "kernel_init": None,
        "seed": 0,
        "logging_level": None,
    },
    "theory": {
        "seed": 0,
        "net_samples": 500,
        "net_ambient": 16,
        "net_eps": [0.4, 0.2, 0.1, 0.05],
        "net_max_slope": 2.5,
        "maurey_n": 8,
        "maurey_r": 1.0,
        "maurey_L1": 1.0,
        "maurey_delta": 0.5,
        "maurey_samples": 2000,
        "concentration_n": 16,
        "concentration_m": [50, 100, 400],
        "concentration_eps": 0.5,
        "concentration_trials": 1000,
        "srec_n": 16,
        "srec_m": 64,
        "srec_points": 200,
        "srec_trials": 100,
        "srec_min_gamma": 0.5,
        "srec_min_pass": 95,
        "n": 6,
        "latent_dim": 2,
        "m": 24,
        "instances": 50,
        "min_pass": 48,
        "latent_grid": 21,
        "delta": 0.05,
        "k": 1.0,
        "tau": 0.5,
        "N": 3,
        "offset": 0.05,
        "gamma_points": 300,
    },
    "trials": 20,
    "seed": 0,
    "output": None,
    "record_time": False,
}

TOP_LEVEL_SCALARS = ["trials", "seed", "output", "record_time"]


def _check_fields(name: str, block: Any, allowed: dict):
    if not isinstance(block, dict):
        raise ConfigurationError("Block '%s' must be an object, got: %s" % (name, type(block).__name__))
    for key in block:
        if key not in allowed:
            raise ConfigurationError("Unknown field in block '%s': %s" % (name, key))


def _merge(d: dict) -> dict:
    """
    Merges the user supplied values into a copy of the defaults, rejecting unknown blocks/fields.
    """
    if not isinstance(d, dict):
        raise ConfigurationError("Configuration must be a JSON object")
    result = copy.deepcopy(DEFAULTS)
    for key, value in d.items():
        if key not in DEFAULTS:
            raise ConfigurationError("Unknown configuration block: %s" % key)
        if key in TOP_LEVEL_SCALARS:
            result[key] = value
        else:
            _check_fields(key, value, DEFAULTS[key])
            result[key].update(copy.deepcopy(value))
    return result


def _fill_task_defaults(d: dict):
    """
    Fills in iteration counts and step sizes that depend on the task family and the dimension.
    """
    kind = d["task"]["kind"]
    if (not isinstance(kind, str)) or (kind not in TASK_DEFAULTS):
        raise ConfigurationError("Unknown task kind: %s" % str(kind))
    inner, outer, eta = TASK_DEFAULTS[kind]
    n = d["prior"]["n"]
    if d["prior"]["means"] is not None:
        n = len(d["prior"]["means"][0])
    if d["optim"]["inner_iters"] is None:
        if n <= SMALL_DIM:
            inner = max(1, int(round(inner * n / REFERENCE_DIM)))
        d["optim"]["inner_iters"] = inner
    if d["optim"]["inner_lr"] is None:
        d["optim"]["inner_lr"] = 0.01 if (d["solver"]["kind"] == SOLVER_DMILO_BID) else 0.02
    if d["solver"]["outer_iters"] is None:
        d["solver"]["outer_iters"] = outer
    if d["solver"]["eta"] is None:
        d["solver"]["eta"] = eta if (d["solver"]["eta_x"] is None) else d["solver"]["eta_x"]
    if d["solver"]["eta_x"] is None:
        d["solver"]["eta_x"] = d["solver"]["eta"]
    if d["solver"]["inner_lr_k"] is None:
        d["solver"]["inner_lr_k"] = d["optim"]["inner_lr"]


class ExperimentConfig(object):
    """
    Fully defaulted and validated experiment configuration.
    """

    def __init__(self, d: dict):
        """
        Initializes the configuration from a (partial) dictionary.

        :param d: the dictionary with the blocks schedule, prior, task, optim, solver, theory and the fields
                  trials, seed, output, record_time
        :type d: dict
        """
        self._raw = copy.deepcopy(d)
        self._values = _merge(d)
        _fill_task_defaults(self._values)
        self.validate()

    @property
    def schedule(self) -> dict:
        return self._values["schedule"]

    @property
    def prior(self) -> dict:
        return self._values["prior"]

    @property
    def task(self) -> dict:
        return self._values["task"]

    @property
    def optim(self) -> dict:
        return self._values["optim"]

    @property
    def solver(self) -> dict:
        return self._values["solver"]

    @property
    def theory(self) -> dict:
        return self._values["theory"]

    @property
    def trials(self) -> int:
        return self._values["trials"]

    @property
    def seed(self) -> int:
        return self._values["seed"]

    @property
    def output(self) -> str:
        return self._values["output"]

    @property
    def record_time(self) -> bool:
        return self._values["record_time"]

    def validate(self):
        """
        Validates all blocks, raising a ConfigurationError for the first problem found.
        """
        v = self._values
        if (not isinstance(v["trials"], int)) or (v["trials"] < 1):
            raise ConfigurationError("Number of trials must be a positive integer: %s" % str(v["trials"]))
        if not isinstance(v["seed"], int):
            raise ConfigurationError("Master seed must be an integer: %s" % str(v["seed"]))
        task = v["task"]
        if task["kind"] not in TASK_KINDS:
            raise ConfigurationError("Unknown task kind: %s" % str(task["kind"]))
        if task["source"] not in SOURCES:
            raise ConfigurationError("Unknown signal source: %s" % str(task["source"]))
        if task["sigma"] < 0:
            raise ConfigurationError("Noise level must be non-negative: %s" % str(task["sigma"]))
        if task["layout"] not in LAYOUTS:
            raise ConfigurationError("Unknown layout: %s" % str(task["layout"]))
        if task["spike_count"] < 0:
            raise ConfigurationError("Spike count must be non-negative: %s" % str(task["spike_count"]))
        optim = v["optim"]
        if optim["mode"] not in MODES:
            raise ConfigurationError("Unknown inner mode: %s" % str(optim["mode"]))
        if optim["inner_iters"] < 1:
            raise ConfigurationError("Inner iteration count must be at least 1: %s" % str(optim["inner_iters"]))
        if not (optim["inner_lr"] > 0):
            raise ConfigurationError("Inner learning rate must be positive: %s" % str(optim["inner_lr"]))
        if optim["lam"] < 0:
            raise ConfigurationError("l1 weight must be non-negative: %s" % str(optim["lam"]))
        solver = v["solver"]
        if solver["kind"] not in SOLVER_KINDS:
            raise ConfigurationError("Unknown solver kind: %s" % str(solver["kind"]))
        if (solver["kind"] in BLIND_SOLVER_KINDS) != (task["kind"] == KIND_BLIND_DEBLUR):
            raise ConfigurationError("Solver '%s' does not fit task '%s'" % (solver["kind"], task["kind"]))
        if solver["outer_iters"] < 0:
            raise ConfigurationError("Outer iteration count must be non-negative: %s" % str(solver["outer_iters"]))
        for key in ["eta", "eta_x", "eta_k"]:
            if (solver[key] is not None) and (solver[key] < 0):
                raise ConfigurationError("Step size %s must be non-negative: %s" % (key, str(solver[key])))
        if solver["projection"] not in PROJECTIONS:
            raise ConfigurationError("Unknown projection: %s" % str(solver["projection"]))
        schedule = self.build_schedule()
        prior = self.build_prior()
        if (task["layout"] == LAYOUT_GRID) and ((task["grid"] is None) or (task["grid"][0] * task["grid"][1] != prior.n)):
            raise ConfigurationError("Grid layout requires [h, w] with h*w = %d: %s" % (prior.n, str(task["grid"])))
        self.build_operator(0)
        _logger.debug("Configuration valid: %s, prior K=%d n=%d" % (str(schedule), prior.K, prior.n))

    def build_schedule(self) -> Schedule:
        """
        Creates the schedule from the schedule block.
        """
        b = self.schedule
        return make_schedule(b["beta0"], b["beta1"], b["epsilon"], b["T"], b["N"])

    def build_prior(self) -> GmmPrior:
        """
        Creates the prior: from a file, from explicit means or as seeded toy mixture.
        """
        b = self.prior
        if b["path"] is not None:
            if not os.path.exists(b["path"]):
                raise ConfigurationError("Prior file not found: %s" % b["path"])
            return load_prior(b["path"])
        if b["means"] is not None:
            d = {"means": b["means"], "weights": b["weights"]}
            if b["stddevs"] is not None:
                d["stddevs"] = b["stddevs"]
            else:
                d["tau"] = b["tau"]
            return prior_from_dict(d)
        return make_toy_prior(b["K"], b["n"], b["tau"], b["seed"])

    def build_kernel(self) -> Kernel:
        """
        Creates the (true) deblurring kernel of the task block.
        """
        b = self.task
        return make_kernel(b["kernel"], size=b["kernel_size"], width=b["kernel_width"])

    def build_operator(self, seed: int) -> ForwardOperator:
        """
        Creates the forward operator of the task, random operators seeded with the task seed offset by the
        given seed.

        :param seed: the per-trial seed
        :type seed: int
        :return: the operator
        :rtype: ForwardOperator
        """
        b = self.task
        n = self.build_prior().n
        kernel = None
        if b["kind"] in (KIND_DEBLUR, KIND_BLIND_DEBLUR):
            kernel = self.build_kernel()
        return make_operator(b["kind"], n, seed=b["seed"] + seed, keep_fraction=b["keep_fraction"],
                             factor=b["factor"], kernel=kernel, m=b["m"], gain=b["gain"], grid=b["grid"])

    def to_dict(self) -> dict:
        """
        Returns the fully defaulted configuration.

        :return: the configuration
        :rtype: dict
        """
        return copy.deepcopy(self._values)

    def hash(self) -> str:
        """
        SHA-256 of the canonical JSON of the fully defaulted configuration.

        :return: the hex digest
        :rtype: str
        """
        canonical = json.dumps(self._values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_value(self, path: str, value) -> 'ExperimentConfig':
        """
        Returns a copy with a single field replaced, e.g., with_value("solver.kind", "dmplug").

        :param path: the dotted path of the field
        :type path: str
        :param value: the new value
        :return: the new configuration
        :rtype: ExperimentConfig
        """
        parts = path.split(".")
        d = copy.deepcopy(self._raw)
        if len(parts) == 1:
            if parts[0] not in TOP_LEVEL_SCALARS:
                raise ConfigurationError("Unknown top-level field: %s" % path)
            d[parts[0]] = value
        elif len(parts) == 2:
            block, field = parts
            if (block not in DEFAULTS) or (block in TOP_LEVEL_SCALARS) or (field not in DEFAULTS[block]):
                raise ConfigurationError("Unknown field: %s" % path)
            d.setdefault(block, dict())
            d[block][field] = value
        else:
            raise ConfigurationError("Field path must have one or two parts: %s" % path)
        return ExperimentConfig(d)

    def __repr__(self):
        return "ExperimentConfig(solver=%s, task=%s, hash=%s)" % (self.solver["kind"], self.task["kind"], self.hash()[:12])


def config_from_dict(d: dict) -> ExperimentConfig:
    return ExperimentConfig(d)


def load_config(path: str) -> ExperimentConfig:
    """
    Loads an experiment configuration from a JSON file.

    :param path: the file to load
    :type path: str
    :return: the configuration
    :rtype: ExperimentConfig
    """
    if not os.path.exists(path):
        raise ConfigurationError("Configuration file not found: %s" % path)
    try:
        with open(path, "r") as fp:
            d = json.load(fp)
    except json.JSONDecodeError as e:
        raise ConfigurationError("Invalid JSON in %s: %s" % (path, str(e)))
    _logger.info("Loaded configuration: %s" % path)
    return ExperimentConfig(d)
